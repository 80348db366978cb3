#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fab/util.hpp"

namespace fab::config {

// Absolute path into a profile tree, e.g. /software/packages/openssh.
// Segments are lowercase identifiers; the root itself is not addressable.
class ConfigPath {
 public:
  ConfigPath() = default;

  explicit ConfigPath(std::vector<std::string> segments)
      : segments_(std::move(segments)) {
    validate();
  }

  static ConfigPath parse(std::string_view text) {
    if (text.empty() || text.front() != '/') {
      throw Error("MALFORMED_PATH",
                  "path must be absolute: '" + std::string(text) + "'");
    }
    text.remove_prefix(1);
    std::vector<std::string> segments;
    for (const std::string& seg : util::split(text, '/')) {
      segments.push_back(seg);
    }
    return ConfigPath(std::move(segments));
  }

  const std::vector<std::string>& segments() const { return segments_; }

  std::string str() const {
    std::string out;
    for (const std::string& s : segments_) {
      out += '/';
      out += s;
    }
    return out;
  }

  bool operator==(const ConfigPath& other) const = default;
  auto operator<=>(const ConfigPath& other) const = default;

 private:
  void validate() const {
    if (segments_.empty()) {
      throw Error("MALFORMED_PATH", "path has no segments");
    }
    for (const std::string& s : segments_) {
      if (!util::is_identifier(s)) {
        throw Error("MALFORMED_PATH", "bad path segment '" + s + "'");
      }
    }
  }

  std::vector<std::string> segments_;
};

// A finite typed tree: scalars (string, integer, boolean), lists and
// records. Records keep their keys bytewise sorted, which makes equality
// insertion-order independent and serialization canonical.
class ConfigValue {
 public:
  enum class Kind { String, Integer, Boolean, List, Record };

  using List = std::vector<ConfigValue>;
  using Record = std::map<std::string, ConfigValue>;

  ConfigValue() : data_(Record{}) {}
  ConfigValue(std::string v) : data_(std::move(v)) {}
  ConfigValue(const char* v) : data_(std::string(v)) {}
  ConfigValue(std::int64_t v) : data_(v) {}
  ConfigValue(int v) : data_(static_cast<std::int64_t>(v)) {}
  ConfigValue(bool v) : data_(v) {}
  ConfigValue(List v) : data_(std::move(v)) {}
  ConfigValue(Record v) : data_(std::move(v)) {}

  Kind kind() const { return static_cast<Kind>(data_.index()); }

  bool is_scalar() const {
    Kind k = kind();
    return k == Kind::String || k == Kind::Integer || k == Kind::Boolean;
  }

  const std::string& as_string() const { return expect<std::string>("string"); }
  std::int64_t as_integer() const { return expect<std::int64_t>("integer"); }
  bool as_boolean() const { return expect<bool>("boolean"); }
  const List& as_list() const { return expect<List>("list"); }
  const Record& as_record() const { return expect<Record>("record"); }
  List& as_list() { return std::get<List>(data_); }
  Record& as_record() { return std::get<Record>(data_); }

  bool operator==(const ConfigValue& other) const = default;

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::String: return "string";
      case Kind::Integer: return "integer";
      case Kind::Boolean: return "boolean";
      case Kind::List: return "list";
      case Kind::Record: return "record";
    }
    return "?";
  }

 private:
  template <typename T>
  const T& expect(const char* what) const {
    if (!std::holds_alternative<T>(data_)) {
      throw Error("KIND_MISMATCH", std::string("value is not a ") + what);
    }
    return std::get<T>(data_);
  }

  std::variant<std::string, std::int64_t, bool, List, Record> data_;
};

// Walks a record tree along a path. Returns nullptr when any segment is
// missing or a non-record is traversed; a present empty value is returned
// as-is, so "not found" stays distinct from "present but empty".
inline const ConfigValue* find(const ConfigValue& root, const ConfigPath& path) {
  const ConfigValue* cur = &root;
  for (const std::string& seg : path.segments()) {
    if (cur->kind() != ConfigValue::Kind::Record) return nullptr;
    const auto& rec = cur->as_record();
    auto it = rec.find(seg);
    if (it == rec.end()) return nullptr;
    cur = &it->second;
  }
  return cur;
}

}  // namespace fab::config
