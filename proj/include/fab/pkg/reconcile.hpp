#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "fab/pkg/package.hpp"
#include "fab/util.hpp"

namespace fab::pkg {

struct Action {
  enum class Kind { Remove, Downgrade, Upgrade, Install };

  Kind kind;
  PackageSpec from;  // unset for Install
  PackageSpec to;    // unset for Remove

  bool operator==(const Action& other) const = default;
};

struct ReconcilePlan {
  std::vector<Action> actions;
  std::int64_t source_generation = 0;

  bool empty() const { return actions.empty(); }
};

// The transformation from what a node has to exactly what is configured.
// Anything installed but not desired is removed: an unconfigured package
// is drift, not an asset. Action order is removes, downgrades, upgrades,
// installs, each alphabetical by (name, arch).
inline ReconcilePlan plan(const DesiredList& desired,
                          const InstalledSet& installed) {
  desired.validate();
  std::vector<Action> removes, downgrades, upgrades, installs;

  for (const PackageSpec& have : installed.sorted()) {
    bool wanted = false;
    for (const PackageSpec& want : desired.packages) {
      if (want.key() == have.key()) {
        wanted = true;
        break;
      }
    }
    if (!wanted) removes.push_back({Action::Kind::Remove, have, {}});
  }

  for (const PackageSpec& want : desired.sorted()) {
    const PackageSpec* have = installed.find(want.name, want.arch);
    if (have == nullptr) {
      installs.push_back({Action::Kind::Install, {}, want});
      continue;
    }
    switch (compare_versions(want, *have)) {
      case Order::Equal:
        break;
      case Order::Less:
        downgrades.push_back({Action::Kind::Downgrade, *have, want});
        break;
      case Order::Greater:
        upgrades.push_back({Action::Kind::Upgrade, *have, want});
        break;
    }
  }

  ReconcilePlan out;
  out.source_generation = desired.source_generation;
  out.actions.reserve(removes.size() + downgrades.size() + upgrades.size() +
                      installs.size());
  for (auto* group : {&removes, &downgrades, &upgrades, &installs}) {
    out.actions.insert(out.actions.end(), group->begin(), group->end());
  }
  return out;
}

// Applies a plan all-or-nothing: every action is checked against the set
// first, so a plan computed for a different installed set leaves this one
// untouched.
inline InstalledSet apply(const ReconcilePlan& plan_,
                          const InstalledSet& installed) {
  for (const Action& a : plan_.actions) {
    switch (a.kind) {
      case Action::Kind::Remove:
      case Action::Kind::Downgrade:
      case Action::Kind::Upgrade: {
        const PackageSpec* have = installed.find(a.from.name, a.from.arch);
        if (have == nullptr || *have != a.from) {
          throw Error("STALE_PLAN", "expected " + a.from.name + "-" +
                                        a.from.evr() + "." + a.from.arch +
                                        " on the node");
        }
        break;
      }
      case Action::Kind::Install:
        if (installed.find(a.to.name, a.to.arch) != nullptr) {
          throw Error("STALE_PLAN", a.to.name + "." + a.to.arch +
                                        " already present, plan is stale");
        }
        break;
    }
  }

  InstalledSet result = installed;
  for (const Action& a : plan_.actions) {
    switch (a.kind) {
      case Action::Kind::Remove:
        result.erase(a.from);
        break;
      case Action::Kind::Downgrade:
      case Action::Kind::Upgrade:
        result.erase(a.from);
        result.insert(a.to);
        break;
      case Action::Kind::Install:
        result.insert(a.to);
        break;
    }
  }
  return result;
}

// CLI rendering, one action per line: `R|D|U|I name old→new` with '-' on
// the side an action does not have.
inline std::string render_plan(const ReconcilePlan& plan_) {
  std::string out;
  for (const Action& a : plan_.actions) {
    switch (a.kind) {
      case Action::Kind::Remove:
        out += "R " + a.from.name + " " + a.from.evr() + "→-\n";
        break;
      case Action::Kind::Downgrade:
        out += "D " + a.from.name + " " + a.from.evr() + "→" +
               a.to.evr() + "\n";
        break;
      case Action::Kind::Upgrade:
        out += "U " + a.from.name + " " + a.from.evr() + "→" +
               a.to.evr() + "\n";
        break;
      case Action::Kind::Install:
        out += "I " + a.to.name + " -→" + a.to.evr() + "\n";
        break;
    }
  }
  return out;
}

}  // namespace fab::pkg
