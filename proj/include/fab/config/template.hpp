#pragma once

#include <charconv>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fab/config/value.hpp"
#include "fab/util.hpp"

namespace fab::config {

struct Statement {
  enum class Mode { Assign, Override, Delete };

  ConfigPath path;
  Mode mode = Mode::Assign;
  ConfigValue value;
  int line = 0;
};

// One parsed template. Object templates are per-host roots; include
// templates are shared building blocks. Include directives are expanded
// by the compiler before the template's own statements.
struct TemplateSource {
  enum class Kind { Object, Include };

  struct IncludeRef {
    std::string name;
    int line = 0;
  };

  std::string name;
  Kind kind = Kind::Object;
  std::vector<IncludeRef> includes;
  std::vector<Statement> statements;
};

namespace detail {

class LineParser {
 public:
  LineParser(std::string_view text, int line) : text_(text), line_(line) {}

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) {
      ++pos_;
    }
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool try_eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c, const char* what) {
    if (!try_eat(c)) fail(std::string("expected '") + c + "' " + what);
  }

  bool try_keyword(std::string_view word) {
    skip_ws();
    if (text_.substr(pos_, word.size()) != word) return false;
    size_t after = pos_ + word.size();
    if (after < text_.size() && util::is_identifier_char(text_[after])) {
      return false;
    }
    pos_ = after;
    return true;
  }

  std::string identifier(const char* what) {
    skip_ws();
    size_t start = pos_;
    while (pos_ < text_.size() && util::is_identifier_char(text_[pos_])) ++pos_;
    if (pos_ == start) fail(std::string("expected ") + what);
    return std::string(text_.substr(start, pos_ - start));
  }

  // Single-quoted string; an embedded quote is written as ''.
  std::string quoted_string() {
    expect('\'', "to begin string");
    std::string out;
    while (true) {
      if (pos_ >= text_.size()) fail("unterminated string");
      char c = text_[pos_++];
      if (c == '\'') {
        if (pos_ < text_.size() && text_[pos_] == '\'') {
          out.push_back('\'');
          ++pos_;
          continue;
        }
        return out;
      }
      out.push_back(c);
    }
  }

  ConfigValue value() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected value");
    char c = text_[pos_];
    if (c == '\'') return ConfigValue(quoted_string());
    if (c == '[') return list_value();
    if (c == '{') return record_value();
    if (try_keyword("true")) return ConfigValue(true);
    if (try_keyword("false")) return ConfigValue(false);
    if (c == '-' || (c >= '0' && c <= '9')) return integer_value();
    fail("expected value");
    return ConfigValue();
  }

  void expect_statement_end() { expect(';', "to end statement"); }

  [[noreturn]] void fail(const std::string& msg) {
    throw Error("SYNTAX", "line " + std::to_string(line_) + " col " +
                              std::to_string(pos_ + 1) + ": " + msg);
  }

 private:
  ConfigValue integer_value() {
    skip_ws();
    size_t start = pos_;
    if (pos_ < text_.size() && text_[pos_] == '-') ++pos_;
    while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
      ++pos_;
    }
    std::int64_t v = 0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_ ||
        pos_ == start) {
      fail("bad integer literal");
    }
    return ConfigValue(v);
  }

  ConfigValue list_value() {
    expect('[', "to begin list");
    ConfigValue::List items;
    if (try_eat(']')) return ConfigValue(std::move(items));
    while (true) {
      items.push_back(value());
      if (try_eat(']')) return ConfigValue(std::move(items));
      expect(',', "between list items");
    }
  }

  ConfigValue record_value() {
    expect('{', "to begin record");
    ConfigValue::Record rec;
    if (try_eat('}')) return ConfigValue(std::move(rec));
    while (true) {
      std::string key = identifier("record key");
      expect('=', "after record key");
      ConfigValue v = value();
      if (!rec.emplace(key, std::move(v)).second) {
        fail("duplicate record key '" + key + "'");
      }
      if (try_eat('}')) return ConfigValue(std::move(rec));
      expect(',', "between record entries");
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
  int line_;
};

// Cuts a '#' comment, ignoring '#' inside quoted strings.
inline std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '\'') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace detail

// Parses one template: a header (`object <name>;` or `include <name>;`)
// followed by include directives and statements, each terminated by ';'.
// `'<path>' = v;` assigns, `'<path>' := v;` overrides, `delete '<path>';`
// removes a subtree. Comments start with '#' and run to end of line.
inline TemplateSource parse_template(std::string_view text) {
  TemplateSource tpl;
  bool have_header = false;
  int line_no = 0;
  for (const std::string& raw : util::split(text, '\n')) {
    ++line_no;
    std::string_view body = util::trim(detail::strip_comment(raw));
    if (body.empty()) continue;
    detail::LineParser p(body, line_no);

    while (!p.at_end()) {
      if (!have_header) {
        if (p.try_keyword("object")) {
          tpl.kind = TemplateSource::Kind::Object;
        } else if (p.try_keyword("include")) {
          tpl.kind = TemplateSource::Kind::Include;
        } else {
          p.fail("expected 'object <name>;' or 'include <name>;' header");
        }
        tpl.name = p.identifier("template name");
        p.expect_statement_end();
        have_header = true;
        continue;
      }

      if (p.try_keyword("object")) {
        p.fail("a template source holds exactly one template");
      }
      if (p.try_keyword("include")) {
        TemplateSource::IncludeRef ref;
        ref.name = p.identifier("template name");
        ref.line = line_no;
        p.expect_statement_end();
        tpl.includes.push_back(std::move(ref));
        continue;
      }
      if (p.try_keyword("delete")) {
        Statement st;
        st.mode = Statement::Mode::Delete;
        st.path = ConfigPath::parse(p.quoted_string());
        st.line = line_no;
        p.expect_statement_end();
        tpl.statements.push_back(std::move(st));
        continue;
      }

      Statement st;
      st.path = ConfigPath::parse(p.quoted_string());
      st.line = line_no;
      if (p.try_eat(':')) {
        p.expect('=', "after ':'");
        st.mode = Statement::Mode::Override;
      } else if (p.peek() == '?') {
        p.fail("operator '?=' is not supported");
      } else {
        p.expect('=', "after path");
        st.mode = Statement::Mode::Assign;
      }
      st.value = p.value();
      p.expect_statement_end();
      tpl.statements.push_back(std::move(st));
    }
  }
  if (!have_header) {
    throw Error("SYNTAX", "empty template source");
  }
  return tpl;
}

// The compiler's input: templates addressable by name, names unique.
class TemplateSet {
 public:
  void add(TemplateSource tpl) {
    auto [it, inserted] = templates_.emplace(tpl.name, std::move(tpl));
    if (!inserted) {
      throw Error("DUPLICATE_TEMPLATE",
                  "duplicate template name '" + it->first + "'");
    }
  }

  void add_source(std::string_view text) { add(parse_template(text)); }

  // Replaces an existing template (or adds it). This is how the central
  // configuration database evolves.
  void put(TemplateSource tpl) { templates_[tpl.name] = std::move(tpl); }

  const TemplateSource* find(const std::string& name) const {
    auto it = templates_.find(name);
    return it == templates_.end() ? nullptr : &it->second;
  }

  size_t size() const { return templates_.size(); }

  const std::map<std::string, TemplateSource>& all() const {
    return templates_;
  }

 private:
  std::map<std::string, TemplateSource> templates_;
};

}  // namespace fab::config
