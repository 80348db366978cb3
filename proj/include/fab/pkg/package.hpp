#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fab/util.hpp"

namespace fab::pkg {

// A package at an exact version. (name, arch) is the identity key inside
// any list: two versions of the same package never coexist.
struct PackageSpec {
  std::string name;
  std::string version;
  std::string release;
  std::string arch;

  std::pair<std::string_view, std::string_view> key() const {
    return {name, arch};
  }

  std::string evr() const { return version + "-" + release; }

  bool operator==(const PackageSpec& other) const = default;
};

inline bool key_order(const PackageSpec& a, const PackageSpec& b) {
  return a.key() < b.key();
}

enum class Order { Less, Equal, Greater };

namespace detail {

inline bool is_alnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

inline std::vector<std::string> version_segments(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !is_alnum(s[i])) ++i;
    size_t start = i;
    while (i < s.size() && is_alnum(s[i])) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

inline bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) {
           return c >= '0' && c <= '9';
         });
}

inline Order compare_segment(std::string_view a, std::string_view b) {
  bool na = all_digits(a);
  bool nb = all_digits(b);
  if (na && nb) {
    // numeric: ignore leading zeros, compare magnitudes
    a.remove_prefix(std::min(a.find_first_not_of('0'), a.size()));
    b.remove_prefix(std::min(b.find_first_not_of('0'), b.size()));
    if (a.size() != b.size()) {
      return a.size() < b.size() ? Order::Less : Order::Greater;
    }
    int c = a.compare(b);
    return c < 0 ? Order::Less : c > 0 ? Order::Greater : Order::Equal;
  }
  if (na != nb) return na ? Order::Greater : Order::Less;
  int c = a.compare(b);
  return c < 0 ? Order::Less : c > 0 ? Order::Greater : Order::Equal;
}

inline Order compare_segment_string(std::string_view a, std::string_view b) {
  std::vector<std::string> sa = version_segments(a);
  std::vector<std::string> sb = version_segments(b);
  size_t n = std::min(sa.size(), sb.size());
  for (size_t i = 0; i < n; ++i) {
    Order o = compare_segment(sa[i], sb[i]);
    if (o != Order::Equal) return o;
  }
  if (sa.size() == sb.size()) return Order::Equal;
  return sa.size() < sb.size() ? Order::Less : Order::Greater;
}

}  // namespace detail

// Total order over (version, release). Strings split into alphanumeric
// segments; numeric segments compare numerically, alphabetic ones
// bytewise, numeric beats alphabetic at a mismatch, and on a shared
// segment prefix the longer string wins.
inline Order compare_versions(const PackageSpec& a, const PackageSpec& b) {
  if (a.key() != b.key()) {
    throw Error("KEY_MISMATCH", "cannot order " + a.name + "." + a.arch +
                                    " against " + b.name + "." + b.arch);
  }
  Order o = detail::compare_segment_string(a.version, b.version);
  if (o != Order::Equal) return o;
  return detail::compare_segment_string(a.release, b.release);
}

// The configured package list for one node, derived from its profile.
struct DesiredList {
  std::vector<PackageSpec> packages;
  std::int64_t source_generation = 0;

  void validate() const {
    std::map<std::pair<std::string, std::string>, bool> seen;
    for (const PackageSpec& p : packages) {
      if (p.name.empty()) {
        throw Error("BAD_DESIRED", "package with empty name");
      }
      if (!seen.emplace(std::make_pair(p.name, p.arch), true).second) {
        throw Error("BAD_DESIRED",
                    "duplicate package key " + p.name + "." + p.arch);
      }
    }
  }

  std::vector<PackageSpec> sorted() const {
    std::vector<PackageSpec> out = packages;
    std::sort(out.begin(), out.end(), key_order);
    return out;
  }
};

// What is actually on a node, keyed by (name, arch).
class InstalledSet {
 public:
  InstalledSet() = default;

  explicit InstalledSet(const std::vector<PackageSpec>& packages) {
    for (const PackageSpec& p : packages) insert(p);
  }

  void insert(const PackageSpec& p) {
    auto [it, inserted] =
        map_.emplace(std::make_pair(p.name, p.arch), p);
    if (!inserted) {
      throw Error("DUPLICATE_KEY",
                  "package key " + p.name + "." + p.arch + " already present");
    }
  }

  void erase(const PackageSpec& p) { map_.erase({p.name, p.arch}); }

  const PackageSpec* find(const std::string& name,
                          const std::string& arch) const {
    auto it = map_.find({name, arch});
    return it == map_.end() ? nullptr : &it->second;
  }

  size_t size() const { return map_.size(); }
  bool empty() const { return map_.empty(); }

  std::vector<PackageSpec> sorted() const {
    std::vector<PackageSpec> out;
    out.reserve(map_.size());
    for (const auto& [k, v] : map_) out.push_back(v);
    return out;
  }

  bool operator==(const InstalledSet& other) const = default;

 private:
  std::map<std::pair<std::string, std::string>, PackageSpec> map_;
};

// One desired-list line: `name version release arch`, '#' comments.
inline std::string render_desired(const DesiredList& desired) {
  std::string out;
  for (const PackageSpec& p : desired.sorted()) {
    out += p.name + " " + p.version + " " + p.release + " " + p.arch + "\n";
  }
  return out;
}

inline DesiredList parse_desired(std::string_view text) {
  DesiredList out;
  int line_no = 0;
  for (const std::string& raw : util::split(text, '\n')) {
    ++line_no;
    std::string_view line = util::trim(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = util::trim(line.substr(0, hash));
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    for (const std::string& f : util::split(line, ' ')) {
      if (!f.empty()) fields.push_back(f);
    }
    if (fields.size() != 4) {
      throw Error("BAD_DESIRED", "line " + std::to_string(line_no) +
                                     ": expected 'name version release arch'");
    }
    out.packages.push_back({fields[0], fields[1], fields[2], fields[3]});
  }
  out.validate();
  return out;
}

}  // namespace fab::pkg
