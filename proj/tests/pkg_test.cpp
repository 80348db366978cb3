#include <gtest/gtest.h>

#include <map>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "fab/pkg/package.hpp"
#include "fab/pkg/reconcile.hpp"

using namespace fab;
using namespace fab::pkg;

namespace {

// ---- independent oracles -----------------------------------------------------
// Written against the comparison rule directly, sharing no code with the
// implementation: regex segmentation, numeric conversion via stoull.

std::vector<std::string> oracle_segments(const std::string& s) {
  static const std::regex re("[0-9a-zA-Z]+");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re);
       it != std::sregex_iterator(); ++it) {
    out.push_back(it->str());
  }
  return out;
}

int oracle_compare_string(const std::string& a, const std::string& b) {
  auto sa = oracle_segments(a);
  auto sb = oracle_segments(b);
  for (size_t i = 0;; ++i) {
    if (i == sa.size() && i == sb.size()) return 0;
    if (i == sa.size()) return -1;  // shared prefix, longer wins
    if (i == sb.size()) return 1;
    const std::string& x = sa[i];
    const std::string& y = sb[i];
    bool xd = x.find_first_not_of("0123456789") == std::string::npos;
    bool yd = y.find_first_not_of("0123456789") == std::string::npos;
    if (xd && yd) {
      unsigned long long xv = std::stoull(x);
      unsigned long long yv = std::stoull(y);
      if (xv != yv) return xv < yv ? -1 : 1;
    } else if (xd != yd) {
      return xd ? 1 : -1;  // numeric beats alpha
    } else {
      int c = x.compare(y);
      if (c != 0) return c < 0 ? -1 : 1;
    }
  }
}

int oracle_compare(const PackageSpec& a, const PackageSpec& b) {
  int c = oracle_compare_string(a.version, b.version);
  if (c != 0) return c;
  return oracle_compare_string(a.release, b.release);
}

int as_int(Order o) {
  return o == Order::Less ? -1 : o == Order::Greater ? 1 : 0;
}

// Key-by-key diff, one (name, arch) at a time.
struct OracleAction {
  char kind;  // R D U I
  std::string name, arch;
};

std::vector<OracleAction> oracle_plan(const DesiredList& desired,
                                      const InstalledSet& installed) {
  std::map<std::pair<std::string, std::string>, PackageSpec> want, have;
  for (const PackageSpec& p : desired.packages) want[{p.name, p.arch}] = p;
  for (const PackageSpec& p : installed.sorted()) have[{p.name, p.arch}] = p;
  std::vector<OracleAction> out;
  for (const auto& [key, p] : have) {
    if (!want.contains(key)) out.push_back({'R', key.first, key.second});
  }
  for (const auto& [key, p] : want) {
    if (!have.contains(key)) {
      out.push_back({'I', key.first, key.second});
    } else {
      int c = oracle_compare(p, have.at(key));
      if (c < 0) out.push_back({'D', key.first, key.second});
      if (c > 0) out.push_back({'U', key.first, key.second});
    }
  }
  return out;
}

char action_letter(Action::Kind k) {
  switch (k) {
    case Action::Kind::Remove: return 'R';
    case Action::Kind::Downgrade: return 'D';
    case Action::Kind::Upgrade: return 'U';
    case Action::Kind::Install: return 'I';
  }
  return '?';
}

// ---- generators ---------------------------------------------------------------

std::string random_version(std::mt19937& rng) {
  static const char* seps = ".-_";
  std::uniform_int_distribution<int> nseg(1, 4);
  std::uniform_int_distribution<int> seg_kind(0, 2);
  std::uniform_int_distribution<int> digit(0, 9);
  std::uniform_int_distribution<int> alpha(0, 25);
  std::uniform_int_distribution<int> len(1, 3);
  std::string out;
  int n = nseg(rng);
  for (int i = 0; i < n; ++i) {
    if (i > 0) out.push_back(seps[rng() % 3]);
    int l = len(rng);
    if (seg_kind(rng) < 2) {
      for (int k = 0; k < l; ++k) out.push_back(char('0' + digit(rng)));
    } else {
      for (int k = 0; k < l; ++k) out.push_back(char('a' + alpha(rng)));
    }
  }
  return out;
}

PackageSpec random_package(std::mt19937& rng) {
  static const char* names[] = {"glibc", "kernel", "openssh", "perl",
                                "rpm",   "castor", "zsh",     "emacs"};
  static const char* arches[] = {"i386", "athlon"};
  return {names[rng() % 8], random_version(rng), random_version(rng),
          arches[rng() % 2]};
}

InstalledSet random_installed(std::mt19937& rng, int max_n) {
  InstalledSet out;
  int n = static_cast<int>(rng() % (max_n + 1));
  for (int i = 0; i < n; ++i) {
    PackageSpec p = random_package(rng);
    if (out.find(p.name, p.arch) == nullptr) out.insert(p);
  }
  return out;
}

DesiredList random_desired(std::mt19937& rng, int max_n) {
  DesiredList out;
  InstalledSet dedup = random_installed(rng, max_n);
  out.packages = dedup.sorted();
  return out;
}

// ---- compare_versions -----------------------------------------------------------

TEST(CompareVersions, PinnedExamples) {
  PackageSpec a{"pkg", "1.0", "1", "i386"};
  PackageSpec b{"pkg", "1.0", "1", "i386"};
  EXPECT_EQ(compare_versions(a, b), Order::Equal);

  a.version = "1.9";
  b.version = "1.10";
  EXPECT_EQ(compare_versions(a, b), Order::Less);  // 9 < 10 numerically

  a.version = "7.3";
  b.version = "6.1";
  EXPECT_EQ(compare_versions(a, b), Order::Greater);
}

TEST(CompareVersions, RuleDetails) {
  auto cmp = [](const char* va, const char* vb) {
    return compare_versions({"p", va, "1", "i386"}, {"p", vb, "1", "i386"});
  };
  EXPECT_EQ(cmp("1.0a", "1.0"), Order::Less);     // numeric beats alpha
  EXPECT_EQ(cmp("1.0.1", "1.0"), Order::Greater); // longer wins on prefix
  EXPECT_EQ(cmp("1.01", "1.1"), Order::Equal);    // leading zeros ignored
  EXPECT_EQ(cmp("1-2", "1.2"), Order::Equal);     // separators equivalent
  EXPECT_EQ(cmp("abc", "abd"), Order::Less);      // alpha bytewise
}

TEST(CompareVersions, ReleaseBreaksTies) {
  PackageSpec a{"pkg", "1.0", "2", "i386"};
  PackageSpec b{"pkg", "1.0", "10", "i386"};
  EXPECT_EQ(compare_versions(a, b), Order::Less);
}

TEST(CompareVersions, KeyMismatchRejected) {
  PackageSpec a{"pkg", "1.0", "1", "i386"};
  PackageSpec b{"other", "1.0", "1", "i386"};
  EXPECT_THROW(compare_versions(a, b), Error);
  PackageSpec c{"pkg", "1.0", "1", "athlon"};
  EXPECT_THROW(compare_versions(a, c), Error);
}

TEST(CompareVersions, AgreesWithOracle) {
  std::mt19937 rng(7331);
  for (int i = 0; i < 5000; ++i) {
    PackageSpec a{"p", random_version(rng), random_version(rng), "i386"};
    PackageSpec b{"p", random_version(rng), random_version(rng), "i386"};
    EXPECT_EQ(as_int(compare_versions(a, b)), oracle_compare(a, b))
        << a.evr() << " vs " << b.evr();
  }
}

TEST(CompareVersions, TotalOrderProperties) {
  std::mt19937 rng(40021);
  std::vector<PackageSpec> pool;
  for (int i = 0; i < 60; ++i) {
    pool.push_back({"p", random_version(rng), random_version(rng), "i386"});
  }
  for (const PackageSpec& a : pool) {
    EXPECT_EQ(compare_versions(a, a), Order::Equal);
    for (const PackageSpec& b : pool) {
      EXPECT_EQ(as_int(compare_versions(a, b)),
                -as_int(compare_versions(b, a)));
      for (const PackageSpec& c : pool) {
        int ab = as_int(compare_versions(a, b));
        int bc = as_int(compare_versions(b, c));
        if (ab == bc) {
          EXPECT_EQ(as_int(compare_versions(a, c)), ab)
              << a.evr() << " " << b.evr() << " " << c.evr();
        }
      }
    }
  }
}

// ---- plan ------------------------------------------------------------------------

TEST(Plan, IdenticalSetsGiveEmptyPlan) {
  DesiredList desired;
  desired.packages = {{"a", "1.0", "1", "i386"}};
  InstalledSet installed(desired.packages);
  EXPECT_TRUE(plan(desired, installed).empty());
}

TEST(Plan, UnconfiguredPackageIsRemoved) {
  DesiredList desired;
  desired.packages = {{"a", "1.0", "1", "i386"}};
  InstalledSet installed({{"a", "1.0", "1", "i386"}, {"b", "2.0", "1", "i386"}});
  ReconcilePlan p = plan(desired, installed);
  ASSERT_EQ(p.actions.size(), 1u);
  EXPECT_EQ(p.actions[0].kind, Action::Kind::Remove);
  EXPECT_EQ(p.actions[0].from.name, "b");
}

TEST(Plan, ActionOrderIsRemovesDowngradesUpgradesInstalls) {
  DesiredList desired;
  desired.packages = {
      {"up", "2.0", "1", "i386"},
      {"down", "1.0", "1", "i386"},
      {"fresh", "1.0", "1", "i386"},
  };
  InstalledSet installed({
      {"up", "1.0", "1", "i386"},
      {"down", "2.0", "1", "i386"},
      {"gone", "1.0", "1", "i386"},
  });
  ReconcilePlan p = plan(desired, installed);
  std::string letters;
  for (const Action& a : p.actions) letters.push_back(action_letter(a.kind));
  EXPECT_EQ(letters, "RDUI");
}

TEST(Plan, AlphabeticalWithinGroup) {
  DesiredList desired;
  InstalledSet installed({
      {"zeta", "1.0", "1", "i386"},
      {"alpha", "1.0", "1", "i386"},
      {"mid", "1.0", "1", "i386"},
  });
  ReconcilePlan p = plan(desired, installed);
  ASSERT_EQ(p.actions.size(), 3u);
  EXPECT_EQ(p.actions[0].from.name, "alpha");
  EXPECT_EQ(p.actions[1].from.name, "mid");
  EXPECT_EQ(p.actions[2].from.name, "zeta");
}

TEST(Plan, MatchesBruteForceOracle) {
  std::mt19937 rng(271828);
  for (int i = 0; i < 2000; ++i) {
    DesiredList desired = random_desired(rng, 8);
    InstalledSet installed = random_installed(rng, 8);
    ReconcilePlan p = plan(desired, installed);
    std::vector<OracleAction> expected = oracle_plan(desired, installed);

    ASSERT_EQ(p.actions.size(), expected.size());
    std::multiset<std::string> got, want;
    for (const Action& a : p.actions) {
      const PackageSpec& key =
          a.kind == Action::Kind::Install ? a.to : a.from;
      got.insert(std::string(1, action_letter(a.kind)) + key.name + "." +
                 key.arch);
    }
    for (const OracleAction& a : expected) {
      want.insert(std::string(1, a.kind) + a.name + "." + a.arch);
    }
    EXPECT_EQ(got, want);
  }
}

// ---- apply -----------------------------------------------------------------------

TEST(Apply, EmptyPlanLeavesSetAlone) {
  InstalledSet installed({{"a", "1.0", "1", "i386"}});
  ReconcilePlan empty;
  EXPECT_EQ(apply(empty, installed), installed);
}

TEST(Apply, PlanReachesExactlyDesired) {
  std::mt19937 rng(1618);
  for (int i = 0; i < 2000; ++i) {
    DesiredList desired = random_desired(rng, 8);
    InstalledSet installed = random_installed(rng, 8);
    InstalledSet result = apply(plan(desired, installed), installed);
    EXPECT_EQ(result.sorted(), desired.sorted());
  }
}

TEST(Apply, StalePlanRejectedWithoutMutation) {
  InstalledSet original({{"a", "1.0", "1", "i386"}});
  DesiredList desired;
  desired.packages = {{"a", "2.0", "1", "i386"}};
  ReconcilePlan p = plan(desired, original);  // upgrade a 1.0 -> 2.0

  InstalledSet different({{"a", "1.5", "1", "i386"}});
  try {
    apply(p, different);
    FAIL() << "expected stale plan";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "STALE_PLAN");
  }
  EXPECT_NE(different.find("a", "i386"), nullptr);
  EXPECT_EQ(different.find("a", "i386")->version, "1.5");
}

TEST(Apply, IdempotentReplan) {
  std::mt19937 rng(9182);
  for (int i = 0; i < 500; ++i) {
    DesiredList desired = random_desired(rng, 6);
    InstalledSet installed = random_installed(rng, 6);
    InstalledSet converged = apply(plan(desired, installed), installed);
    EXPECT_TRUE(plan(desired, converged).empty());
  }
}

// ---- formats ----------------------------------------------------------------------

TEST(Format, DesiredListRoundTrip) {
  DesiredList desired;
  desired.packages = {
      {"openssh", "3.4", "1", "i386"},
      {"glibc", "2.2.5", "34", "i386"},
  };
  std::string text = render_desired(desired);
  EXPECT_EQ(text,
            "glibc 2.2.5 34 i386\n"
            "openssh 3.4 1 i386\n");
  DesiredList back = parse_desired("# managed list\n" + text + "\n");
  EXPECT_EQ(back.sorted(), desired.sorted());
}

TEST(Format, DesiredListRejectsDuplicates) {
  EXPECT_THROW(parse_desired("a 1 1 i386\na 2 1 i386\n"), Error);
}

TEST(Format, PlanRendering) {
  DesiredList desired;
  desired.packages = {
      {"kernel", "2.4.21", "27", "i386"},
      {"castor", "1.4", "1", "i386"},
  };
  InstalledSet installed({
      {"kernel", "2.4.21", "20", "i386"},
      {"zsh", "4.0", "1", "i386"},
  });
  EXPECT_EQ(render_plan(plan(desired, installed)),
            "R zsh 4.0-1→-\n"
            "U kernel 2.4.21-20→2.4.21-27\n"
            "I castor -→1.4-1\n");
}

}  // namespace
