#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fab/config/profile.hpp"
#include "fab/config/schema.hpp"
#include "fab/config/template.hpp"
#include "fab/config/value.hpp"

namespace fab::config {

namespace detail {

struct OrderedStatement {
  const Statement* statement;
  const std::string* owner;  // template the statement was written in
};

// Depth-first include expansion: a template's includes contribute their
// statements before the template's own. Each template is expanded at most
// once; revisiting one mid-expansion is a cycle.
inline void expand(const TemplateSet& set, const TemplateSource& tpl,
                   std::set<std::string>& expanded,
                   std::vector<std::string>& in_progress,
                   std::vector<OrderedStatement>& out) {
  in_progress.push_back(tpl.name);
  for (const TemplateSource::IncludeRef& ref : tpl.includes) {
    for (const std::string& open : in_progress) {
      if (open == ref.name) {
        throw Error("CYCLIC_INCLUDE",
                    "template '" + ref.name + "' includes itself (via '" +
                        tpl.name + "' line " + std::to_string(ref.line) + ")");
      }
    }
    if (expanded.contains(ref.name)) continue;
    const TemplateSource* inc = set.find(ref.name);
    if (inc == nullptr) {
      throw Error("MISSING_TEMPLATE",
                  "template '" + ref.name + "' not found (included from '" +
                      tpl.name + "' line " + std::to_string(ref.line) + ")");
    }
    if (inc->kind != TemplateSource::Kind::Include) {
      throw Error("BAD_INCLUDE", "object template '" + ref.name +
                                     "' cannot be included (from '" +
                                     tpl.name + "')");
    }
    expand(set, *inc, expanded, in_progress, out);
  }
  in_progress.pop_back();
  expanded.insert(tpl.name);
  for (const Statement& st : tpl.statements) out.push_back({&st, &tpl.name});
}

inline void apply_statement(ConfigValue& root, const Statement& st,
                            const std::string& tpl_name) {
  const auto& segs = st.path.segments();
  ConfigValue* cur = &root;
  std::string prefix;
  for (size_t i = 0; i + 1 < segs.size(); ++i) {
    prefix += '/';
    prefix += segs[i];
    auto& rec = cur->as_record();
    auto it = rec.find(segs[i]);
    if (it == rec.end()) {
      if (st.mode == Statement::Mode::Delete) return;  // nothing to delete
      it = rec.emplace(segs[i], ConfigValue(ConfigValue::Record{})).first;
    } else if (it->second.kind() != ConfigValue::Kind::Record) {
      if (st.mode == Statement::Mode::Delete) return;
      if (st.mode == Statement::Mode::Override) {
        it->second = ConfigValue(ConfigValue::Record{});
      } else {
        throw Error("ASSIGN_COLLISION",
                    "path " + st.path.str() + " descends through " + prefix +
                        ", which already holds a non-record value ('" +
                        tpl_name + "' line " + std::to_string(st.line) + ")");
      }
    }
    cur = &it->second;
  }

  auto& rec = cur->as_record();
  const std::string& leaf = segs.back();
  switch (st.mode) {
    case Statement::Mode::Assign: {
      auto [it, inserted] = rec.emplace(leaf, st.value);
      if (!inserted) {
        throw Error("ASSIGN_COLLISION",
                    "path " + st.path.str() +
                        " is already assigned; use ':=' to override ('" +
                        tpl_name + "' line " + std::to_string(st.line) + ")");
      }
      break;
    }
    case Statement::Mode::Override:
      rec[leaf] = st.value;
      break;
    case Statement::Mode::Delete:
      rec.erase(leaf);
      break;
  }
}

}  // namespace detail

// Compiles the object template named `node` against the template set.
// When `previous` is given, the generation is carried forward and bumped
// only if the tree content changed; otherwise the profile starts at 1.
inline ProfileTree compile_profile(
    const TemplateSet& templates, const std::string& node,
    const GlobalSchema* schema = nullptr,
    const ProfileTree* previous = nullptr) {
  const TemplateSource* object = templates.find(node);
  if (object == nullptr || object->kind != TemplateSource::Kind::Object) {
    throw Error("MISSING_TEMPLATE",
                "no object template for node '" + node + "'");
  }

  std::vector<detail::OrderedStatement> ordered;
  std::set<std::string> expanded;
  std::vector<std::string> in_progress;
  detail::expand(templates, *object, expanded, in_progress, ordered);

  ProfileTree tree;
  tree.node_name = node;
  tree.root = ConfigValue(ConfigValue::Record{});
  for (const detail::OrderedStatement& st : ordered) {
    detail::apply_statement(tree.root, *st.statement, *st.owner);
  }

  if (schema != nullptr) {
    std::vector<SchemaViolation> violations = validate_schema(tree, *schema);
    if (!violations.empty()) {
      std::string msg = "profile for '" + node + "' violates schema:";
      for (const SchemaViolation& v : violations) {
        msg += " [" + v.path.str() + ": " + v.reason + "]";
      }
      throw Error("SCHEMA_VIOLATION", msg);
    }
  }

  if (previous != nullptr) {
    tree.generation = (previous->root == tree.root) ? previous->generation
                                                    : previous->generation + 1;
  } else {
    tree.generation = 1;
  }
  return tree;
}

// Remembers the last compiled profile per node so generations evolve
// content-addressed across recompilations.
class ProfileDatabase {
 public:
  const ProfileTree& compile(const TemplateSet& templates,
                             const std::string& node,
                             const GlobalSchema* schema = nullptr) {
    auto it = last_.find(node);
    const ProfileTree* previous = it == last_.end() ? nullptr : &it->second;
    ProfileTree tree = compile_profile(templates, node, schema, previous);
    return last_[node] = std::move(tree);
  }

  const ProfileTree* last(const std::string& node) const {
    auto it = last_.find(node);
    return it == last_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, ProfileTree> last_;
};

}  // namespace fab::config
