#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "fab/config/template.hpp"
#include "fab/config/value.hpp"
#include "fab/pkg/package.hpp"
#include "fab/rundown/rundown.hpp"
#include "fab/util.hpp"

namespace fab::sim {

struct NodeDecl {
  std::string name;
  std::string kind;  // batch | interactive | disk
  int slots = 2;
  std::string cluster = "default";
};

struct GroupDecl {
  std::string name;
  double share = 0.0;
};

struct EvInstall { std::string node; };
struct EvReinstall { std::string node; };
struct EvSubmit { std::string group; SimTime runtime = 0; };
struct EvFailNode { std::string node; };
struct EvFailReplica { std::string replica; };
struct EvRecoverReplica { std::string replica; };
struct EvRundown {
  std::string target;  // node name, or cluster name when cluster=true
  bool cluster = false;
  rundown::ActionKind action = rundown::ActionKind::Reboot;
  SimTime grace = 0;
  int max_parallel = 0;
};
struct EvNotify { std::string tag; };
struct EvLogin { std::string node; };
struct EvLogout { std::string node; };
struct EvDiskWrite { std::string node; std::string mount; std::string content; };
struct EvConfigSet { config::ConfigPath path; config::ConfigValue value; };
struct EvPkgAdd { pkg::PackageSpec spec; };
struct EvPkgDrop { std::string name; std::string arch; };
struct EvCheckpoint {};
struct EvMetric { std::string node; std::string metric; std::int64_t value = 0; };
struct EvAlarm { std::string node; std::string condition; };

using EventPayload =
    std::variant<EvInstall, EvReinstall, EvSubmit, EvFailNode, EvFailReplica,
                 EvRecoverReplica, EvRundown, EvNotify, EvLogin, EvLogout,
                 EvDiskWrite, EvConfigSet, EvPkgAdd, EvPkgDrop, EvCheckpoint,
                 EvMetric, EvAlarm>;

struct ScenarioEvent {
  SimTime at = 0;
  EventPayload payload;
};

// Seeded failure injection, expanded into concrete fail events at load
// time: `count` distinct nodes fail at uniform times in [from, to]; when
// recover_after >= 0 each is reinstalled that much later.
struct ChaosDecl {
  int count = 0;
  SimTime from = 0;
  SimTime to = 0;
  SimTime recover_after = -1;
};

// A declarative run description. Everything the simulator does is in
// here; together with the seed it fully determines the trace.
struct Scenario {
  std::vector<NodeDecl> nodes;
  std::vector<std::string> replicas;
  std::vector<GroupDecl> groups;
  std::vector<ScenarioEvent> events;  // kept in file order
  std::vector<ChaosDecl> chaos;
  bool use_default_schema = false;
  SimTime key_window = 60;

  static Scenario parse(std::string_view text);
};

namespace detail {

inline std::vector<std::string> words_of(std::string_view line) {
  std::vector<std::string> out;
  for (const std::string& w : util::split(line, ' ')) {
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

// key=value option on a scenario line
inline bool opt_of(const std::string& word, std::string_view key,
                   std::string& value) {
  if (word.size() > key.size() + 1 && word.compare(0, key.size(), key) == 0 &&
      word[key.size()] == '=') {
    value = word.substr(key.size() + 1);
    return true;
  }
  return false;
}

[[noreturn]] inline void scenario_fail(int line, const std::string& msg) {
  throw Error("SCENARIO_PARSE", "line " + std::to_string(line) + ": " + msg);
}

inline rundown::ActionKind parse_action(int line_no, const std::string& name) {
  if (name == "reboot") return rundown::ActionKind::Reboot;
  if (name == "reinstall") return rundown::ActionKind::Reinstall;
  if (name == "kernel-update" || name == "kernel_update") {
    return rundown::ActionKind::KernelUpdate;
  }
  scenario_fail(line_no, "unknown action '" + name + "'");
}

}  // namespace detail

inline Scenario Scenario::parse(std::string_view text) {
  Scenario sc;
  int line_no = 0;
  std::map<std::string, bool> node_names;

  for (const std::string& raw : util::split(text, '\n')) {
    ++line_no;
    std::string_view line = util::trim(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = util::trim(line.substr(0, hash));
    }
    if (line.empty()) continue;
    std::vector<std::string> w = detail::words_of(line);

    try {
      if (w[0] == "node") {
        if (w.size() < 3) detail::scenario_fail(line_no, "node <name> kind=...");
        NodeDecl decl;
        decl.name = w[1];
        if (!util::is_identifier(decl.name)) {
          detail::scenario_fail(line_no, "bad node name '" + decl.name + "'");
        }
        if (node_names.contains(decl.name)) {
          detail::scenario_fail(line_no, "duplicate node '" + decl.name + "'");
        }
        node_names[decl.name] = true;
        std::string v;
        for (size_t i = 2; i < w.size(); ++i) {
          if (detail::opt_of(w[i], "kind", v)) {
            decl.kind = v;
          } else if (detail::opt_of(w[i], "slots", v)) {
            decl.slots = std::stoi(v);
          } else if (detail::opt_of(w[i], "cluster", v)) {
            decl.cluster = v;
          } else {
            detail::scenario_fail(line_no, "unknown option '" + w[i] + "'");
          }
        }
        if (decl.kind != "batch" && decl.kind != "interactive" &&
            decl.kind != "disk") {
          detail::scenario_fail(line_no, "kind must be batch|interactive|disk");
        }
        sc.nodes.push_back(std::move(decl));
        continue;
      }
      if (w[0] == "replica") {
        if (w.size() != 2) detail::scenario_fail(line_no, "replica <name>");
        sc.replicas.push_back(w[1]);
        continue;
      }
      if (w[0] == "group") {
        std::string v;
        if (w.size() != 3 || !detail::opt_of(w[2], "share", v)) {
          detail::scenario_fail(line_no, "group <name> share=<fraction>");
        }
        sc.groups.push_back({w[1], std::stod(v)});
        continue;
      }
      if (w[0] == "schema") {
        if (w.size() != 2 || w[1] != "default") {
          detail::scenario_fail(line_no, "schema default");
        }
        sc.use_default_schema = true;
        continue;
      }
      if (w[0] == "window") {
        if (w.size() != 2) detail::scenario_fail(line_no, "window <seconds>");
        sc.key_window = std::stoll(w[1]);
        continue;
      }
      if (w[0] == "chaos") {
        // chaos fail <count> between <t1> <t2> [recover <delay>]
        if (w.size() < 6 || w[1] != "fail" || w[3] != "between") {
          detail::scenario_fail(line_no,
                                "chaos fail <n> between <t1> <t2> [recover <d>]");
        }
        ChaosDecl chaos;
        chaos.count = std::stoi(w[2]);
        chaos.from = std::stoll(w[4]);
        chaos.to = std::stoll(w[5]);
        if (w.size() == 8 && w[6] == "recover") {
          chaos.recover_after = std::stoll(w[7]);
        } else if (w.size() != 6) {
          detail::scenario_fail(line_no, "bad chaos options");
        }
        sc.chaos.push_back(chaos);
        continue;
      }
      if (w[0] != "at" || w.size() < 3) {
        detail::scenario_fail(line_no, "unknown directive '" + w[0] + "'");
      }

      SimTime at = std::stoll(w[1]);
      const std::string& verb = w[2];
      auto arg = [&](size_t i) -> const std::string& {
        if (2 + i >= w.size()) detail::scenario_fail(line_no, "missing argument");
        return w[2 + i];
      };

      if (verb == "install") {
        sc.events.push_back({at, EvInstall{arg(1)}});
      } else if (verb == "reinstall") {
        sc.events.push_back({at, EvReinstall{arg(1)}});
      } else if (verb == "submit") {
        sc.events.push_back({at, EvSubmit{arg(1), std::stoll(arg(2))}});
      } else if (verb == "fail") {
        if (arg(1) == "node") {
          sc.events.push_back({at, EvFailNode{arg(2)}});
        } else if (arg(1) == "replica") {
          sc.events.push_back({at, EvFailReplica{arg(2)}});
        } else {
          detail::scenario_fail(line_no, "fail node|replica <name>");
        }
      } else if (verb == "recover") {
        if (arg(1) != "replica") {
          detail::scenario_fail(line_no, "recover replica <name>");
        }
        sc.events.push_back({at, EvRecoverReplica{arg(2)}});
      } else if (verb == "rundown") {
        EvRundown ev;
        size_t first_opt = 2;
        if (arg(1) == "cluster") {
          ev.cluster = true;
          ev.target = arg(2);
          first_opt = 3;
        } else {
          ev.target = arg(1);
        }
        bool have_action = false;
        std::string v;
        for (size_t i = 2 + first_opt; i < w.size(); ++i) {
          if (detail::opt_of(w[i], "action", v)) {
            ev.action = detail::parse_action(line_no, v);
            have_action = true;
          } else if (detail::opt_of(w[i], "grace", v)) {
            ev.grace = std::stoll(v);
          } else if (detail::opt_of(w[i], "max-parallel", v)) {
            ev.max_parallel = std::stoi(v);
          } else {
            detail::scenario_fail(line_no, "unknown option '" + w[i] + "'");
          }
        }
        if (!have_action) detail::scenario_fail(line_no, "rundown needs action=");
        sc.events.push_back({at, std::move(ev)});
      } else if (verb == "notify") {
        sc.events.push_back({at, EvNotify{arg(1)}});
      } else if (verb == "login") {
        sc.events.push_back({at, EvLogin{arg(1)}});
      } else if (verb == "logout") {
        sc.events.push_back({at, EvLogout{arg(1)}});
      } else if (verb == "diskwrite") {
        sc.events.push_back({at, EvDiskWrite{arg(1), arg(2), arg(3)}});
      } else if (verb == "config") {
        if (arg(1) != "set") detail::scenario_fail(line_no, "config set ...");
        // remainder of the line is template statement syntax: '<path>' <value>
        size_t pos = raw.find(" set ");
        std::string rest(util::trim(raw.substr(pos + 5)));
        config::detail::LineParser p(rest, line_no);
        EvConfigSet ev{config::ConfigPath::parse(p.quoted_string()), {}};
        ev.value = p.value();
        sc.events.push_back({at, std::move(ev)});
      } else if (verb == "pkg") {
        if (arg(1) == "add") {
          sc.events.push_back(
              {at, EvPkgAdd{{arg(2), arg(3), arg(4), arg(5)}}});
        } else if (arg(1) == "drop") {
          sc.events.push_back({at, EvPkgDrop{arg(2), arg(3)}});
        } else {
          detail::scenario_fail(line_no, "pkg add|drop ...");
        }
      } else if (verb == "checkpoint") {
        sc.events.push_back({at, EvCheckpoint{}});
      } else if (verb == "metric") {
        sc.events.push_back({at, EvMetric{arg(1), arg(2), std::stoll(arg(3))}});
      } else if (verb == "alarm") {
        sc.events.push_back({at, EvAlarm{arg(1), arg(2)}});
      } else {
        detail::scenario_fail(line_no, "unknown event verb '" + verb + "'");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      detail::scenario_fail(line_no, std::string("bad value: ") + e.what());
    }
  }
  return sc;
}

}  // namespace fab::sim
