#pragma once

#include <string>
#include <vector>

#include "fab/config/profile.hpp"
#include "fab/config/value.hpp"

namespace fab::config {

// Structural requirements every compiled profile must satisfy: required
// paths with an expected kind, optionally restricted to an enumeration of
// scalar values.
struct SchemaRule {
  ConfigPath path;
  ConfigValue::Kind kind = ConfigValue::Kind::Record;
  std::vector<ConfigValue> allowed;  // empty = any value of that kind
};

struct SchemaViolation {
  ConfigPath path;
  std::string reason;
};

class GlobalSchema {
 public:
  GlobalSchema& require(std::string_view path, ConfigValue::Kind kind,
                        std::vector<ConfigValue> allowed = {}) {
    rules_.push_back({ConfigPath::parse(path), kind, std::move(allowed)});
    return *this;
  }

  const std::vector<SchemaRule>& rules() const { return rules_; }

 private:
  std::vector<SchemaRule> rules_;
};

inline std::vector<SchemaViolation> validate_schema(const ProfileTree& p,
                                                    const GlobalSchema& s) {
  std::vector<SchemaViolation> out;
  for (const SchemaRule& rule : s.rules()) {
    const ConfigValue* v = query(p, rule.path);
    if (v == nullptr) {
      out.push_back({rule.path, "required path is missing"});
      continue;
    }
    if (v->kind() != rule.kind) {
      out.push_back({rule.path,
                     std::string("expected ") +
                         ConfigValue::kind_name(rule.kind) + ", found " +
                         ConfigValue::kind_name(v->kind())});
      continue;
    }
    if (!rule.allowed.empty()) {
      bool ok = false;
      for (const ConfigValue& a : rule.allowed) {
        if (a == *v) {
          ok = true;
          break;
        }
      }
      if (!ok) out.push_back({rule.path, "value not in allowed enumeration"});
    }
  }
  return out;
}

}  // namespace fab::config
