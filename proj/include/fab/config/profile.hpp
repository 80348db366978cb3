#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fab/config/template.hpp"
#include "fab/config/value.hpp"
#include "fab/util.hpp"

namespace fab::config {

// The compiled per-node configuration. The root is always a record.
// `generation` is content-addressed: recompiling bumps it only when the
// tree actually changed.
struct ProfileTree {
  std::string node_name;
  std::int64_t generation = 1;
  ConfigValue root;

  bool operator==(const ProfileTree& other) const = default;
};

inline const ConfigValue* query(const ProfileTree& p, const ConfigPath& path) {
  return find(p.root, path);
}

inline const ConfigValue* query(const ProfileTree& p, std::string_view path) {
  return find(p.root, ConfigPath::parse(path));
}

namespace detail {

inline std::string quote_string(const std::string& s) {
  std::string out;
  out.push_back('\'');
  for (char c : s) {
    if (c == '\n' || c == '\r') {
      throw Error("UNSERIALIZABLE", "string scalar contains a line break");
    }
    out.push_back(c);
    if (c == '\'') out.push_back('\'');
  }
  out.push_back('\'');
  return out;
}

inline void render_entry(std::string& out, const std::string& key,
                         const ConfigValue& v, int depth) {
  out.append(static_cast<size_t>(depth) * 2, ' ');
  out += key;
  out += ' ';
  out += ConfigValue::kind_name(v.kind());
  switch (v.kind()) {
    case ConfigValue::Kind::String:
      out += ' ';
      out += quote_string(v.as_string());
      out += '\n';
      break;
    case ConfigValue::Kind::Integer:
      out += ' ';
      out += std::to_string(v.as_integer());
      out += '\n';
      break;
    case ConfigValue::Kind::Boolean:
      out += v.as_boolean() ? " true\n" : " false\n";
      break;
    case ConfigValue::Kind::List: {
      out += " {\n";
      const auto& items = v.as_list();
      for (size_t i = 0; i < items.size(); ++i) {
        render_entry(out, std::to_string(i), items[i], depth + 1);
      }
      out.append(static_cast<size_t>(depth) * 2, ' ');
      out += "}\n";
      break;
    }
    case ConfigValue::Kind::Record: {
      out += " {\n";
      for (const auto& [k, child] : v.as_record()) {
        render_entry(out, k, child, depth + 1);
      }
      out.append(static_cast<size_t>(depth) * 2, ' ');
      out += "}\n";
      break;
    }
  }
}

inline std::string render_root(const ConfigValue& root) {
  std::string out = "root record {\n";
  for (const auto& [k, child] : root.as_record()) {
    render_entry(out, k, child, 1);
  }
  out += "}\n";
  return out;
}

}  // namespace detail

// Canonical text form: header line, then the root record one entry per
// line, two-space indentation, record keys bytewise sorted, list items
// keyed by index. Equal trees serialize to identical bytes.
inline std::string serialize_profile(const ProfileTree& p) {
  std::string out = "profile " + p.node_name + " generation " +
                    std::to_string(p.generation) + "\n";
  out += detail::render_root(p.root);
  return out;
}

// Digest of the tree content alone (no node name, no generation number).
inline std::string profile_content_digest(const ProfileTree& p) {
  return util::to_hex(util::fnv1a64(detail::render_root(p.root)));
}

inline ProfileTree parse_profile(std::string_view bytes) {
  auto malformed = [](int line, const std::string& msg) -> Error {
    return Error("MALFORMED_DOCUMENT",
                 "line " + std::to_string(line) + ": " + msg);
  };

  std::vector<std::string> lines = util::split(bytes, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 3) throw malformed(1, "truncated document");

  ProfileTree tree;
  {
    detail::LineParser p(lines[0], 1);
    if (!p.try_keyword("profile")) throw malformed(1, "expected 'profile'");
    tree.node_name = p.identifier("node name");
    if (!p.try_keyword("generation")) {
      throw malformed(1, "expected 'generation'");
    }
    ConfigValue gen = p.value();
    if (gen.kind() != ConfigValue::Kind::Integer || !p.at_end()) {
      throw malformed(1, "bad generation");
    }
    tree.generation = gen.as_integer();
  }
  if (lines[1] != "root record {") {
    throw malformed(2, "expected 'root record {'");
  }

  struct Frame {
    ConfigValue container;
    std::string key;  // key of this container in its parent
  };
  std::vector<Frame> stack;
  stack.push_back({ConfigValue(ConfigValue::Record{}), "root"});

  auto attach = [&](int line, const std::string& key, ConfigValue v) {
    ConfigValue& parent = stack.back().container;
    if (parent.kind() == ConfigValue::Kind::List) {
      if (key != std::to_string(parent.as_list().size())) {
        throw malformed(line, "list items must be indexed in order");
      }
      parent.as_list().push_back(std::move(v));
    } else {
      if (!util::is_identifier(key)) {
        throw malformed(line, "bad record key '" + key + "'");
      }
      if (!parent.as_record().emplace(key, std::move(v)).second) {
        throw malformed(line, "duplicate record key '" + key + "'");
      }
    }
  };

  size_t i = 2;
  for (; i < lines.size(); ++i) {
    int line_no = static_cast<int>(i) + 1;
    std::string_view line = lines[i];
    size_t indent = 0;
    while (indent < line.size() && line[indent] == ' ') ++indent;
    std::string_view body = line.substr(indent);
    if (body.empty()) throw malformed(line_no, "blank line in document");
    if (indent != 2 * stack.size() && !(body == "}" && indent == 2 * (stack.size() - 1))) {
      throw malformed(line_no, "bad indentation");
    }

    if (body == "}") {
      Frame done = std::move(stack.back());
      stack.pop_back();
      if (stack.empty()) {
        tree.root = std::move(done.container);
        ++i;
        break;  // root closed
      }
      attach(line_no, done.key, std::move(done.container));
      continue;
    }

    detail::LineParser p(body, line_no);
    std::string key;
    if (stack.back().container.kind() == ConfigValue::Kind::List) {
      ConfigValue idx = p.value();
      if (idx.kind() != ConfigValue::Kind::Integer) {
        throw malformed(line_no, "expected list index");
      }
      key = std::to_string(idx.as_integer());
    } else {
      key = p.identifier("entry key");
    }
    std::string kind = p.identifier("value kind");
    if (kind == "string") {
      attach(line_no, key, ConfigValue(p.quoted_string()));
    } else if (kind == "integer") {
      ConfigValue v = p.value();
      if (v.kind() != ConfigValue::Kind::Integer) {
        throw malformed(line_no, "expected integer scalar");
      }
      attach(line_no, key, std::move(v));
    } else if (kind == "boolean") {
      if (p.try_keyword("true")) {
        attach(line_no, key, ConfigValue(true));
      } else if (p.try_keyword("false")) {
        attach(line_no, key, ConfigValue(false));
      } else {
        throw malformed(line_no, "expected true or false");
      }
    } else if (kind == "list") {
      p.expect('{', "to open list");
      stack.push_back({ConfigValue(ConfigValue::List{}), key});
      continue;
    } else if (kind == "record") {
      p.expect('{', "to open record");
      stack.push_back({ConfigValue(ConfigValue::Record{}), key});
      continue;
    } else {
      throw Error("UNKNOWN_KIND", "line " + std::to_string(line_no) +
                                      ": unknown value kind '" + kind + "'");
    }
    if (!p.at_end()) throw malformed(line_no, "trailing characters");
  }

  if (!stack.empty()) {
    throw malformed(static_cast<int>(lines.size()), "unclosed container");
  }
  if (i != lines.size()) {
    throw malformed(static_cast<int>(i) + 1, "content after closing brace");
  }
  return tree;
}

}  // namespace fab::config
