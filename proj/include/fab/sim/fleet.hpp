#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fab/batch/scheduler.hpp"
#include "fab/config/compile.hpp"
#include "fab/config/schema.hpp"
#include "fab/node/agent.hpp"
#include "fab/notify/broker.hpp"
#include "fab/pkg/reconcile.hpp"
#include "fab/rundown/rundown.hpp"
#include "fab/secure/keyserver.hpp"
#include "fab/sim/monitor.hpp"
#include "fab/sim/scenario.hpp"
#include "fab/sim/trace.hpp"
#include "fab/sim/transport.hpp"
#include "fab/util.hpp"

namespace fab::sim {

struct FleetConfig {
  SimTime first_boot_delay = 300;  // base install until the first reboot
  SimTime reboot_duration = 120;
  SimTime kernel_update_duration = 600;
  SimTime batch_half_life = 86400;
};

// The stock cluster packages, as they would come out of the distribution.
inline std::vector<pkg::PackageSpec> default_cluster_packages() {
  return {
      {"glibc", "2.2.5", "34", "i386"},
      {"kernel", "2.4.21", "20", "i386"},
      {"openssh", "3.4", "1", "i386"},
      {"perl", "5.6.1", "34", "i386"},
      {"rpm", "4.0.4", "7x", "i386"},
  };
}

inline config::GlobalSchema default_fleet_schema() {
  using Kind = config::ConfigValue::Kind;
  config::GlobalSchema schema;
  schema.require("/cluster/name", Kind::String)
      .require("/system/kernel", Kind::String)
      .require("/install/boot_method", Kind::String,
               {config::ConfigValue("floppy"), config::ConfigValue("kernel"),
                config::ConfigValue("pxe")})
      .require("/software/packages", Kind::List)
      .require("/hardware/partitions", Kind::List)
      .require("/node/kind", Kind::String,
               {config::ConfigValue("batch"), config::ConfigValue("interactive"),
                config::ConfigValue("disk")});
  return schema;
}

// Deterministic discrete-event simulator over a virtual fleet: nodes, the
// replicated server cluster, the key server, the notification broker, the
// batch scheduler, rundown orchestration and monitoring, all driven from
// one (time, insertion-order) event queue.
class FleetSim final : public rundown::RundownHost {
 public:
  FleetSim(Scenario scenario, std::uint64_t seed,
           FleetConfig config = FleetConfig{})
      : scenario_(std::move(scenario)),
        seed_(seed),
        cfg_(config),
        keyserver_(provider_, scenario_.key_window),
        scheduler_(cfg_.batch_half_life),
        coordinator_(*this),
        services_(*this),
        sweep_services_(*this) {
    setup();
  }

  // ---- main loop -----------------------------------------------------------

  SimTrace run(SimTime until) {
    trace_.record(0, "sim_start",
                  {{"seed", std::to_string(seed_)},
                   {"nodes", std::to_string(nodes_.size())},
                   {"replicas", std::to_string(scenario_.replicas.size())}});
    while (!queue_.empty() && queue_.top().at <= until) {
      Pending ev = queue_.top();
      queue_.pop();
      now_ = ev.at;
      ev.fire(ev.at);
    }
    now_ = until;
    trace_.record(until, "sim_end",
                  {{"production", std::to_string(production_count())},
                   {"jobs_done", std::to_string(scheduler_.done_count())},
                   {"violations", std::to_string(violations_.size())}});
    return SimTrace{trace_.lines(), violations_, until};
  }

  // ---- introspection -------------------------------------------------------

  const node::VirtualNode* find_node(const std::string& name) const {
    auto it = nodes_.find(name);
    return it == nodes_.end() ? nullptr : &it->second.vn;
  }

  size_t production_count() const {
    size_t n = 0;
    for (const auto& [name, m] : nodes_) {
      if (m.vn.phase() == node::Phase::Production) ++n;
    }
    return n;
  }

  batch::Scheduler& scheduler() { return scheduler_; }
  Monitoring& monitoring() { return monitoring_; }
  notify::Broker& broker() { return broker_; }
  rundown::RundownCoordinator& rundowns() { return coordinator_; }
  ReplicaSet& replicas() { return replicas_; }
  const std::vector<std::string>& violations() const { return violations_; }
  config::ProfileDatabase& profiles() { return profiles_; }
  const config::TemplateSet& templates() const { return templates_; }

  std::vector<std::string> cluster_nodes(const std::string& cluster) const {
    std::vector<std::string> out;
    for (const auto& [name, m] : nodes_) {
      if (m.decl.cluster == cluster) out.push_back(name);
    }
    return out;
  }

  // Extra events injected by the operator CLI before run().
  void inject(SimTime at, EventPayload payload) {
    schedule(at, [this, payload = std::move(payload)](SimTime t) {
      dispatch(payload, t);
    });
  }

  std::string render_alarms() const {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"node", "condition", "raised_at", "acknowledged"});
    for (const Alarm& a : monitoring_.alarms()) {
      rows.push_back({a.node, a.condition, std::to_string(a.raised_at),
                      a.acknowledged ? "yes" : "no"});
    }
    return util::render_columns(rows);
  }

  std::string render_rundowns() const {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"node", "action", "phase", "requested", "ready", "acted",
                    "finished"});
    auto time_str = [](SimTime t) {
      return t < 0 ? std::string("-") : std::to_string(t);
    };
    auto add = [&](const rundown::RundownCoordinator::Entry& e) {
      rows.push_back({e.plan.node, rundown::action_name(e.plan.action),
                      rundown::drain_phase_name(e.state.phase),
                      time_str(e.state.requested_at), time_str(e.state.ready_at),
                      time_str(e.state.act_started_at),
                      time_str(e.state.finished_at)});
    };
    for (const auto& [name, e] : coordinator_.active()) add(e);
    for (const auto& e : coordinator_.history()) add(e);
    return util::render_columns(rows);
  }

  std::string render_batch() const { return batch_report(scheduler_); }

  std::string render_nodes() const {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"node", "kind", "phase", "boots", "packages", "digest"});
    for (const auto& [name, m] : nodes_) {
      rows.push_back({name, m.decl.kind, node::phase_name(m.vn.phase()),
                      std::to_string(m.vn.state.boot_count),
                      std::to_string(m.vn.installed.size()),
                      m.vn.phase() == node::Phase::Production
                          ? node::state_digest(m.vn)
                          : "-"});
    }
    return util::render_columns(rows);
  }

  static std::string batch_report(const batch::Scheduler& sched) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"group", "share", "cpu_seconds", "fraction"});
    double total = 0.0;
    for (const auto& [name, g] : sched.groups()) total += g.consumed_total;
    char buf[64];
    for (const auto& [name, g] : sched.groups()) {
      std::snprintf(buf, sizeof buf, "%.3f", g.share);
      std::string share = buf;
      std::snprintf(buf, sizeof buf, "%.0f", g.consumed_total);
      std::string cpu = buf;
      std::snprintf(buf, sizeof buf, "%.3f",
                    total > 0 ? g.consumed_total / total : 0.0);
      rows.push_back({name, share, cpu, buf});
    }
    std::string out = util::render_columns(rows);
    out += "\n";
    rows.clear();
    rows.push_back({"pending_reason", "job_ticks"});
    for (const auto& [reason, n] : sched.reason_ticks()) {
      rows.push_back({reason, std::to_string(n)});
    }
    out += util::render_columns(rows);
    return out;
  }

  // ---- RundownHost ---------------------------------------------------------

  bool in_production(const std::string& n) override {
    return managed(n).vn.phase() == node::Phase::Production;
  }

  void close_batch(const std::string& n) override {
    if (is_batch_host(n)) {
      scheduler_.close_host(n);
      trace_.record(now_, "host_closed", {{"node", n}});
    }
  }

  void reopen_batch(const std::string& n) override {
    if (is_batch_host(n) && managed(n).vn.phase() == node::Phase::Production) {
      scheduler_.open_host(n);
      trace_.record(now_, "host_opened", {{"node", n}});
      tick_batch(now_);
    }
  }

  void block_logins(const std::string& n) override {
    managed(n).logins_blocked = true;
    trace_.record(now_, "logins_blocked", {{"node", n}});
  }

  void unblock_logins(const std::string& n) override {
    managed(n).logins_blocked = false;
    trace_.record(now_, "logins_unblocked", {{"node", n}});
  }

  std::int64_t running_jobs(const std::string& n) override {
    return is_batch_host(n) ? scheduler_.running_on(n) : 0;
  }

  std::int64_t logged_in_users(const std::string& n) override {
    return managed(n).users;
  }

  void mute_monitoring(const std::string& n) override {
    monitoring_.mute(n);
    trace_.record(now_, "monitoring_muted", {{"node", n}});
  }

  void unmute_monitoring(const std::string& n) override {
    monitoring_.unmute(n);
    trace_.record(now_, "monitoring_unmuted", {{"node", n}});
  }

  void operator_notice(const std::string& n, const std::string& text) override {
    trace_.record(now_, "operator_notice", {{"node", n}, {"text", quoted(text)}});
  }

  void enter_draining(const std::string& n) override {
    managed(n).vn.state.transition(node::Phase::Draining);
    trace_.record(now_, "draining", {{"node", n}});
  }

  void enter_intervention(const std::string& n) override {
    node::VirtualNode& vn = managed(n).vn;
    vn.state.transition(node::Phase::Intervention);
    if (managed(n).users > 0) {
      trace_.record(now_, "forced_logout",
                    {{"node", n}, {"users", std::to_string(managed(n).users)}});
      managed(n).users = 0;
    }
    trace_.record(now_, "intervention", {{"node", n}});
  }

  void abort_to_production(const std::string& n) override {
    node::VirtualNode& vn = managed(n).vn;
    if (vn.phase() == node::Phase::Draining) {
      vn.state.transition(node::Phase::Intervention);
    }
    vn.state.transition(node::Phase::Production);
    trace_.record(now_, "production", {{"node", n}});
  }

  void execute_action(const std::string& n, rundown::ActionKind action,
                      SimTime now) override {
    trace_.record(now, "action_start",
                  {{"node", n}, {"action", rundown::action_name(action)}});
    switch (action) {
      case rundown::ActionKind::Reboot:
        schedule(now + cfg_.reboot_duration, [this, n](SimTime t) {
          finish_simple_action(n, t, false);
        });
        break;
      case rundown::ActionKind::KernelUpdate:
        schedule(now + cfg_.kernel_update_duration, [this, n](SimTime t) {
          finish_simple_action(n, t, true);
        });
        break;
      case rundown::ActionKind::Reinstall:
        managed(n).rundown_reinstall = true;
        do_install(n, now);
        break;
    }
  }

 private:
  struct ManagedNode {
    NodeDecl decl;
    node::VirtualNode vn;
    std::int64_t users = 0;
    bool logins_blocked = false;
    bool rundown_reinstall = false;
    std::map<std::string, std::int64_t> seen_seq;  // client-side dedup
  };

  struct Pending {
    SimTime at;
    std::int64_t seq;
    std::function<void(SimTime)> fire;

    bool operator>(const Pending& other) const {
      return std::tie(at, seq) > std::tie(other.at, other.seq);
    }
  };

  // Node-side view of the server cluster, over the replica round-robin.
  class TransportServices final : public node::NodeServices {
   public:
    explicit TransportServices(FleetSim& sim) : sim_(sim) {}

    config::ProfileTree fetch_profile(const std::string& n) override {
      const ServerReplica& r = sim_.replicas_.route("profiles");
      const config::ProfileTree& tree = sim_.compile_profile(n);
      sim_.trace_.record(sim_.now_, "profile_fetch",
                         {{"node", n},
                          {"replica", r.name},
                          {"generation", std::to_string(tree.generation)}});
      // served as canonical bytes, parsed back on the node
      return config::parse_profile(config::serialize_profile(tree));
    }

    secure::KeyHandle fetch_private_key(const std::string& n) override {
      sim_.replicas_.route("keys");
      std::string reply =
          sim_.keyserver_.handle_line("FETCHKEY " + n, sim_.now_);
      std::vector<std::string> w = detail_words(reply);
      if (w.size() != 3 || w[0] != "OK") {
        throw Error(w.size() > 1 ? w[1] : "BAD_REPLY", "key fetch: " + reply);
      }
      sim_.trace_.record(sim_.now_, "key_fetched",
                         {{"node", n}, {"epoch", w[1]}});
      return secure::KeyHandle{n, std::stoll(w[1]), true, w[2]};
    }

    std::vector<secure::EncryptedSecret> fetch_secrets(
        const std::string& n) override {
      sim_.replicas_.route("keys");
      std::string reply =
          sim_.keyserver_.handle_line("LISTSECRETS " + n, sim_.now_);
      std::vector<std::string> w = detail_words(reply);
      if (w.empty() || w[0] != "OK") {
        throw Error("BAD_REPLY", "secret list: " + reply);
      }
      std::vector<secure::EncryptedSecret> out;
      for (size_t i = 1; i < w.size(); ++i) {
        std::string got =
            sim_.keyserver_.handle_line("GETSECRET " + n + " " + w[i], sim_.now_);
        std::vector<std::string> g = detail_words(got);
        if (g.size() != 3 || g[0] != "OK") continue;
        out.push_back({n, w[i], std::stoll(g[1]), g[2]});
      }
      return out;
    }

    std::string decrypt(const secure::KeyHandle& key,
                        const secure::EncryptedSecret& blob) override {
      return sim_.provider_.decrypt(key, blob);
    }

    void fetch_package(const pkg::PackageSpec&) override {
      sim_.replicas_.route("packages");
    }

   private:
    static std::vector<std::string> detail_words(const std::string& s) {
      std::vector<std::string> out;
      for (const std::string& w : util::split(s, ' ')) {
        if (!w.empty()) out.push_back(w);
      }
      return out;
    }

    FleetSim& sim_;
  };

  // Verification-only services: no transport, no traces, no keys.
  class SweepServices final : public node::NodeServices {
   public:
    explicit SweepServices(FleetSim& sim) : sim_(sim) {}

    config::ProfileTree fetch_profile(const std::string& n) override {
      return sim_.compile_profile(n);
    }
    secure::KeyHandle fetch_private_key(const std::string&) override {
      throw Error("NO_WINDOW", "not available during verification");
    }
    std::vector<secure::EncryptedSecret> fetch_secrets(
        const std::string&) override {
      return {};
    }
    std::string decrypt(const secure::KeyHandle&,
                        const secure::EncryptedSecret&) override {
      throw Error("PROVIDER_FAILURE", "not available during verification");
    }
    void fetch_package(const pkg::PackageSpec&) override {}

   private:
    FleetSim& sim_;
  };

  friend class TransportServices;
  friend class SweepServices;

  // ---- setup ---------------------------------------------------------------

  void setup() {
    if (scenario_.replicas.empty()) {
      scenario_.replicas.push_back("server1");
    }
    for (const std::string& r : scenario_.replicas) replicas_.add(r);

    for (const GroupDecl& g : scenario_.groups) {
      scheduler_.add_group(g.name, g.share);
    }

    cluster_packages_ = default_cluster_packages();
    build_base_templates();

    for (const NodeDecl& decl : scenario_.nodes) {
      ManagedNode m;
      m.decl = decl;
      m.vn.name = decl.name;
      nodes_.emplace(decl.name, std::move(m));
      templates_.put(object_template(decl));
      if (decl.kind == "batch") {
        scheduler_.add_host(decl.name, decl.slots);
        scheduler_.close_host(decl.name);  // closed until production
      }
    }

    if (scenario_.use_default_schema) {
      schema_ = default_fleet_schema();
      have_schema_ = true;
    }

    components_.add("system", [](const config::ProfileTree& p,
                                 node::VirtualNode& vn) {
      const config::ConfigValue* sys = config::query(p, "/system");
      if (sys == nullptr) return;
      for (const auto& [key, v] : sys->as_record()) {
        if (!v.is_scalar()) continue;
        std::string rendered;
        switch (v.kind()) {
          case config::ConfigValue::Kind::String: rendered = v.as_string(); break;
          case config::ConfigValue::Kind::Integer:
            rendered = std::to_string(v.as_integer());
            break;
          default: rendered = v.as_boolean() ? "true" : "false"; break;
        }
        vn.settings["system/" + key] = rendered;
      }
    });
    components_.add("cluster", [](const config::ProfileTree& p,
                                  node::VirtualNode& vn) {
      if (const config::ConfigValue* v = config::query(p, "/cluster/name")) {
        vn.settings["cluster/name"] = v->as_string();
      }
    });

    // scenario events keep file order within a tick
    for (const ScenarioEvent& ev : scenario_.events) {
      EventPayload payload = ev.payload;
      schedule(ev.at, [this, payload = std::move(payload)](SimTime t) {
        dispatch(payload, t);
      });
    }

    expand_chaos();
  }

  void expand_chaos() {
    std::mt19937_64 rng(seed_);
    for (const ChaosDecl& chaos : scenario_.chaos) {
      std::vector<std::string> names;
      for (const auto& [name, m] : nodes_) names.push_back(name);
      if (names.empty()) break;
      std::uniform_int_distribution<size_t> pick_node(0, names.size() - 1);
      std::uniform_int_distribution<SimTime> pick_time(chaos.from, chaos.to);
      std::set<std::string> chosen;
      for (int i = 0; i < chaos.count && chosen.size() < names.size(); ++i) {
        std::string victim = names[pick_node(rng)];
        if (!chosen.insert(victim).second) {
          --i;
          continue;
        }
        SimTime at = pick_time(rng);
        schedule(at, [this, victim](SimTime t) { fail_node(victim, t); });
        if (chaos.recover_after >= 0) {
          schedule(at + chaos.recover_after,
                   [this, victim](SimTime t) { do_install(victim, t); });
        }
      }
    }
  }

  // ---- templates / profiles --------------------------------------------------

  void build_base_templates() {
    using config::ConfigValue;
    config::TemplateSource base;
    base.name = "base";
    base.kind = config::TemplateSource::Kind::Include;
    auto assign = [&](config::TemplateSource& tpl, std::string_view path,
                      ConfigValue v, bool override_mode = false) {
      config::Statement st;
      st.path = config::ConfigPath::parse(path);
      st.mode = override_mode ? config::Statement::Mode::Override
                              : config::Statement::Mode::Assign;
      st.value = std::move(v);
      tpl.statements.push_back(std::move(st));
    };
    assign(base, "/cluster/name", ConfigValue("lxbatch"));
    assign(base, "/system/kernel", ConfigValue("2.4.21-20"));
    assign(base, "/system/timezone", ConfigValue("utc"));
    assign(base, "/install/boot_method", ConfigValue("pxe"));
    assign(base, "/hardware/partitions", default_partitions(false));
    assign(base, "/software/packages", packages_value());
    templates_.put(std::move(base));

    config::TemplateSource batch_kind;
    batch_kind.name = "kind_batch";
    batch_kind.kind = config::TemplateSource::Kind::Include;
    assign(batch_kind, "/batch/enabled", ConfigValue(true));
    templates_.put(std::move(batch_kind));

    config::TemplateSource inter_kind;
    inter_kind.name = "kind_interactive";
    inter_kind.kind = config::TemplateSource::Kind::Include;
    assign(inter_kind, "/interactive/logins", ConfigValue(true));
    templates_.put(std::move(inter_kind));

    config::TemplateSource disk_kind;
    disk_kind.name = "kind_disk";
    disk_kind.kind = config::TemplateSource::Kind::Include;
    assign(disk_kind, "/hardware/partitions", default_partitions(true), true);
    templates_.put(std::move(disk_kind));

    rebuild_site();
  }

  config::ConfigValue default_partitions(bool with_data_disk) const {
    using config::ConfigValue;
    ConfigValue::List parts;
    ConfigValue::Record root;
    root["mount"] = ConfigValue("/");
    root["size_gb"] = ConfigValue(40);
    root["preserve"] = ConfigValue(false);
    parts.push_back(ConfigValue(std::move(root)));
    if (with_data_disk) {
      ConfigValue::Record data;
      data["mount"] = ConfigValue("/data");
      data["size_gb"] = ConfigValue(500);
      data["preserve"] = ConfigValue(true);
      parts.push_back(ConfigValue(std::move(data)));
    }
    return ConfigValue(std::move(parts));
  }

  config::ConfigValue packages_value() const {
    using config::ConfigValue;
    ConfigValue::List list;
    std::vector<pkg::PackageSpec> sorted = cluster_packages_;
    std::sort(sorted.begin(), sorted.end(), pkg::key_order);
    for (const pkg::PackageSpec& p : sorted) {
      ConfigValue::Record rec;
      rec["name"] = ConfigValue(p.name);
      rec["version"] = ConfigValue(p.version);
      rec["release"] = ConfigValue(p.release);
      rec["arch"] = ConfigValue(p.arch);
      list.push_back(ConfigValue(std::move(rec)));
    }
    return ConfigValue(std::move(list));
  }

  // `site` carries everything the operators changed at runtime; it is
  // included after the defaults so its overrides win.
  void rebuild_site() {
    config::TemplateSource site;
    site.name = "site";
    site.kind = config::TemplateSource::Kind::Include;
    {
      config::Statement st;
      st.path = config::ConfigPath::parse("/software/packages");
      st.mode = config::Statement::Mode::Override;
      st.value = packages_value();
      site.statements.push_back(std::move(st));
    }
    for (const config::Statement& st : site_overrides_) {
      site.statements.push_back(st);
    }
    templates_.put(std::move(site));
  }

  config::TemplateSource object_template(const NodeDecl& decl) const {
    using config::ConfigValue;
    config::TemplateSource tpl;
    tpl.name = decl.name;
    tpl.kind = config::TemplateSource::Kind::Object;
    tpl.includes.push_back({"base", 0});
    tpl.includes.push_back({"kind_" + decl.kind, 0});
    tpl.includes.push_back({"site", 0});
    config::Statement kind_st;
    kind_st.path = config::ConfigPath::parse("/node/kind");
    kind_st.value = ConfigValue(decl.kind);
    tpl.statements.push_back(std::move(kind_st));
    if (decl.kind == "batch") {
      config::Statement slots;
      slots.path = config::ConfigPath::parse("/batch/slots");
      slots.value = ConfigValue(static_cast<std::int64_t>(decl.slots));
      tpl.statements.push_back(std::move(slots));
    }
    return tpl;
  }

  const config::ProfileTree& compile_profile(const std::string& n) {
    return profiles_.compile(templates_, n, have_schema_ ? &schema_ : nullptr);
  }

  // ---- event plumbing --------------------------------------------------------

  void schedule(SimTime at, std::function<void(SimTime)> fn) {
    queue_.push(Pending{at, next_seq_++, std::move(fn)});
  }

  ManagedNode& managed(const std::string& n) {
    auto it = nodes_.find(n);
    if (it == nodes_.end()) {
      throw Error("UNKNOWN_TARGET", "no node " + n);
    }
    return it->second;
  }

  bool is_batch_host(const std::string& n) {
    auto it = nodes_.find(n);
    return it != nodes_.end() && it->second.decl.kind == "batch";
  }

  static std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  }

  void violation(const std::string& what, SimTime t) {
    violations_.push_back("t=" + std::to_string(t) + " " + what);
    trace_.record(t, "violation", {{"what", quoted(what)}});
  }

  void dispatch(const EventPayload& payload, SimTime t) {
    try {
      std::visit([&](const auto& ev) { handle(ev, t); }, payload);
    } catch (const Error& e) {
      violation(std::string("event error [") + e.code() + "]: " + e.what(), t);
    }
  }

  // ---- handlers ---------------------------------------------------------------

  void handle(const EvInstall& ev, SimTime t) { do_install(ev.node, t); }
  void handle(const EvReinstall& ev, SimTime t) { do_install(ev.node, t); }

  void handle(const EvSubmit& ev, SimTime t) {
    std::int64_t id = scheduler_.submit(ev.group, ev.runtime, t);
    trace_.record(t, "submit",
                  {{"job", std::to_string(id)},
                   {"group", ev.group},
                   {"runtime", std::to_string(ev.runtime)}});
    tick_batch(t);
  }

  void handle(const EvFailNode& ev, SimTime t) { fail_node(ev.node, t); }

  void handle(const EvFailReplica& ev, SimTime t) {
    replicas_.set_alive(ev.replica, false);
    trace_.record(t, "replica_down", {{"replica", ev.replica}});
  }

  void handle(const EvRecoverReplica& ev, SimTime t) {
    replicas_.set_alive(ev.replica, true);
    trace_.record(t, "replica_up", {{"replica", ev.replica}});
  }

  void handle(const EvRundown& ev, SimTime t) {
    std::vector<std::string> targets;
    if (ev.cluster) {
      targets = cluster_nodes(ev.target);
      if (targets.empty()) {
        throw Error("UNKNOWN_TARGET", "no nodes in cluster " + ev.target);
      }
    } else {
      managed(ev.target);
      targets.push_back(ev.target);
    }
    rundown::RundownPlan plan;
    plan.action = ev.action;
    if (ev.cluster) {
      coordinator_.set_max_parallel(ev.max_parallel);
      std::vector<rundown::RundownPlan> plans;
      for (const std::string& n : targets) {
        rundown::RundownPlan p = plan;
        p.node = n;
        fill_kind(p);
        if (ev.grace > 0 && p.node_kind == rundown::NodeKind::Interactive) {
          p.grace = ev.grace;
        }
        coordinator_.start_rundown(p, t);
        if (p.node_kind == rundown::NodeKind::Interactive) {
          schedule(t + p.grace, [this](SimTime tt) { coordinator_.tick(tt); });
        }
      }
    } else {
      plan.node = ev.target;
      fill_kind(plan);
      if (ev.grace > 0 && plan.node_kind == rundown::NodeKind::Interactive) {
        plan.grace = ev.grace;
      }
      coordinator_.start_rundown(plan, t);
      if (plan.node_kind == rundown::NodeKind::Interactive) {
        schedule(t + plan.grace, [this](SimTime tt) { coordinator_.tick(tt); });
      }
    }
  }

  void fill_kind(rundown::RundownPlan& plan) {
    plan.node_kind = managed(plan.node).decl.kind == "interactive"
                         ? rundown::NodeKind::Interactive
                         : rundown::NodeKind::Batch;
    if (plan.node_kind == rundown::NodeKind::Interactive && plan.grace == 0) {
      plan.grace = 3600;
    }
  }

  void handle(const EvNotify& ev, SimTime t) {
    notify::NotifyEvent event = broker_.notify(ev.tag, t);
    trace_.record(t, "notify",
                  {{"tag", ev.tag}, {"seq", std::to_string(event.seq)}});
    schedule(t, [this](SimTime tt) { deliver_all(tt); });
  }

  void handle(const EvLogin& ev, SimTime t) {
    ManagedNode& m = managed(ev.node);
    if (m.logins_blocked || m.vn.phase() != node::Phase::Production) {
      trace_.record(t, "login_rejected", {{"node", ev.node}});
      return;
    }
    m.users += 1;
    trace_.record(t, "login",
                  {{"node", ev.node}, {"users", std::to_string(m.users)}});
  }

  void handle(const EvLogout& ev, SimTime t) {
    ManagedNode& m = managed(ev.node);
    if (m.users > 0) m.users -= 1;
    trace_.record(t, "logout",
                  {{"node", ev.node}, {"users", std::to_string(m.users)}});
    coordinator_.tick(t);
  }

  void handle(const EvDiskWrite& ev, SimTime t) {
    managed(ev.node).vn.write_data(ev.mount, ev.content);
    trace_.record(t, "diskwrite", {{"node", ev.node}, {"mount", ev.mount}});
  }

  void handle(const EvConfigSet& ev, SimTime t) {
    config::Statement st;
    st.path = ev.path;
    st.mode = config::Statement::Mode::Override;
    st.value = ev.value;
    site_overrides_.push_back(std::move(st));
    rebuild_site();
    trace_.record(t, "config_set", {{"path", ev.path.str()}});
  }

  void handle(const EvPkgAdd& ev, SimTime t) {
    bool replaced = false;
    for (pkg::PackageSpec& p : cluster_packages_) {
      if (p.key() == ev.spec.key()) {
        p = ev.spec;
        replaced = true;
        break;
      }
    }
    if (!replaced) cluster_packages_.push_back(ev.spec);
    rebuild_site();
    trace_.record(t, "pkg_add",
                  {{"name", ev.spec.name}, {"evr", ev.spec.evr()}});
  }

  void handle(const EvPkgDrop& ev, SimTime t) {
    std::erase_if(cluster_packages_, [&](const pkg::PackageSpec& p) {
      return p.name == ev.name && p.arch == ev.arch;
    });
    rebuild_site();
    trace_.record(t, "pkg_drop", {{"name", ev.name}});
  }

  void handle(const EvCheckpoint&, SimTime t) { run_checkpoint(t); }

  void handle(const EvMetric& ev, SimTime t) {
    managed(ev.node);
    monitoring_.record_metric(ev.node, ev.metric, ev.value, t);
    trace_.record(t, "metric",
                  {{"node", ev.node},
                   {"name", ev.metric},
                   {"value", std::to_string(ev.value)}});
  }

  void handle(const EvAlarm& ev, SimTime t) {
    managed(ev.node);
    raise_alarm(ev.node, ev.condition, t);
  }

  void raise_alarm(const std::string& n, const std::string& condition,
                   SimTime t) {
    if (monitoring_.raise_alarm(n, condition, t)) {
      trace_.record(t, "alarm", {{"node", n}, {"condition", condition}});
    } else {
      trace_.record(t, "alarm_suppressed",
                    {{"node", n}, {"condition", condition}});
    }
  }

  // ---- core flows --------------------------------------------------------------

  void do_install(const std::string& n, SimTime t) {
    ManagedNode& m = managed(n);
    try {
      std::int64_t epoch = m.vn.install_epoch + 1;
      keyserver_.generate_node_key(n, epoch, t);
      keyserver_.encrypt_secret(n, "root_password", "pw:" + n);
      keyserver_.encrypt_secret(n, "ssh_host_key", "hostkey:" + n);
      keyserver_.open_window(n, t);
      trace_.record(t, "key_generated",
                    {{"node", n}, {"epoch", std::to_string(epoch)}});
      trace_.record(t, "window_open", {{"node", n}});

      node::InstallSpec spec =
          node::install_spec_from_profile(services_.fetch_profile(n));

      if (broker_.is_connected(n)) broker_.disconnect(n);
      bool had_jobs = is_batch_host(n) && scheduler_.running_on(n) > 0;
      if (is_batch_host(n)) {
        scheduler_.close_host(n);
        if (had_jobs) {
          for (std::int64_t id : scheduler_.requeue_running_on(n, t)) {
            trace_.record(t, "job_requeued", {{"job", std::to_string(id)}});
          }
        }
      }
      m.users = 0;
      m.seen_seq.clear();

      node::begin_install(m.vn, spec, &services_);
      trace_.record(t, "install_begin",
                    {{"node", n}, {"epoch", std::to_string(m.vn.install_epoch)}});
      schedule(t + cfg_.first_boot_delay,
               [this, n](SimTime tt) { finish_first_boot(n, tt); });
    } catch (const Error& e) {
      m.vn.record_error(std::string("install: ") + e.what());
      trace_.record(t, "install_failed",
                    {{"node", n}, {"code", e.code()}});
    }
  }

  void finish_first_boot(const std::string& n, SimTime t) {
    ManagedNode& m = managed(n);
    if (m.vn.phase() != node::Phase::AwaitingFirstBoot) {
      trace_.record(t, "first_boot_skipped",
                    {{"node", n}, {"phase", node::phase_name(m.vn.phase())}});
      return;
    }
    bool ok = node::first_boot(m.vn, services_, components_);
    trace_.record(t, "first_boot",
                  {{"node", n},
                   {"ok", ok ? "1" : "0"},
                   {"generation",
                    std::to_string(m.vn.applied_profile_generation)}});
    if (!ok) {
      if (m.rundown_reinstall) {
        m.rundown_reinstall = false;
        violation("rundown reinstall left " + n + " in configuring", t);
        coordinator_.on_action_done(n, t);
      }
      return;
    }

    broker_.connect(n);
    broker_.subscribe(n, "rpmupdate", t);
    broker_.subscribe(n, "confupdate", t);
    trace_.record(t, "production", {{"node", n}});
    if (is_batch_host(n)) {
      scheduler_.open_host(n);
      trace_.record(t, "host_opened", {{"node", n}});
    }
    if (m.rundown_reinstall) {
      m.rundown_reinstall = false;
      coordinator_.on_action_done(n, t);
    }
    deliver_to(n, t);  // catch up on anything notified while offline
    tick_batch(t);
  }

  void finish_simple_action(const std::string& n, SimTime t, bool kernel) {
    ManagedNode& m = managed(n);
    try {
      if (kernel) {
        node::update_in_place(m.vn, services_, components_);
      }
      node::reboot(m.vn, services_, components_);
      m.vn.state.transition(node::Phase::Production);
      trace_.record(t, "production", {{"node", n}});
      coordinator_.on_action_done(n, t);
    } catch (const Error& e) {
      violation(std::string("action failed on ") + n + ": " + e.what(), t);
      coordinator_.on_action_done(n, t);
    }
  }

  void fail_node(const std::string& n, SimTime t) {
    ManagedNode& m = managed(n);
    if (m.vn.phase() == node::Phase::Down) {
      trace_.record(t, "node_fail", {{"node", n}, {"already", "down"}});
      return;
    }
    node::fail(m.vn);
    trace_.record(t, "node_fail", {{"node", n}});
    if (broker_.is_connected(n)) broker_.disconnect(n);
    m.users = 0;
    if (is_batch_host(n)) {
      scheduler_.close_host(n);
      for (std::int64_t id : scheduler_.requeue_running_on(n, t)) {
        trace_.record(t, "job_requeued", {{"job", std::to_string(id)}});
      }
    }
    raise_alarm(n, "node_down", t);
    coordinator_.tick(t);
    tick_batch(t);
  }

  void deliver_all(SimTime t) {
    for (auto& [name, m] : nodes_) deliver_to(name, t);
  }

  void deliver_to(const std::string& n, SimTime t) {
    if (!broker_.is_connected(n)) return;
    ManagedNode& m = managed(n);
    for (const notify::NotifyEvent& ev : broker_.deliver(n)) {
      trace_.record(t, "delivered",
                    {{"node", n},
                     {"tag", ev.tag},
                     {"seq", std::to_string(ev.seq)}});
      std::int64_t& seen = m.seen_seq[ev.tag];
      if (ev.seq > seen) {
        seen = ev.seq;
        act_on_tag(n, ev.tag, t);
      }
      broker_.ack(n, ev.tag, ev.seq);
    }
  }

  // rpmupdate converges the package set (and the rest); confupdate only
  // reruns the configuration components. No polling path exists.
  void act_on_tag(const std::string& n, const std::string& tag, SimTime t) {
    ManagedNode& m = managed(n);
    if (m.vn.phase() != node::Phase::Production &&
        m.vn.phase() != node::Phase::Configuring) {
      return;
    }
    if (tag == "rpmupdate") {
      size_t before = m.vn.installed.size();
      bool ok = node::update_in_place(m.vn, services_, components_);
      trace_.record(t, "reconcile",
                    {{"node", n},
                     {"ok", ok ? "1" : "0"},
                     {"packages_before", std::to_string(before)},
                     {"packages_after", std::to_string(m.vn.installed.size())},
                     {"generation",
                      std::to_string(m.vn.applied_profile_generation)}});
    } else if (tag == "confupdate") {
      try {
        config::ProfileTree profile = services_.fetch_profile(n);
        node::run_components(m.vn, profile, components_);
        trace_.record(t, "reconfigure",
                      {{"node", n},
                       {"generation", std::to_string(profile.generation)}});
      } catch (const Error& e) {
        m.vn.record_error(std::string("reconfigure: ") + e.what());
        trace_.record(t, "reconfigure_failed",
                      {{"node", n}, {"code", e.code()}});
      }
    }
  }

  void tick_batch(SimTime t) {
    std::vector<batch::Assignment> assigned = scheduler_.schedule_tick(t);
    for (const batch::Assignment& a : assigned) {
      const batch::Job& job = scheduler_.job(a.job);
      trace_.record(t, "assign",
                    {{"job", std::to_string(a.job)},
                     {"host", a.host},
                     {"group", job.group}});
      if (!scheduler_.hosts().at(a.host).open) {
        violation("job assigned to closed host " + a.host, t);
      }
      const node::VirtualNode* vn = find_node(a.host);
      if (vn == nullptr || vn->phase() != node::Phase::Production) {
        violation("job assigned to non-production host " + a.host, t);
      }
      SimTime finish = job.finish_time;
      std::int64_t id = a.job;
      schedule(finish, [this, id, finish](SimTime tt) {
        on_job_done(id, finish, tt);
      });
    }
    check_batch_invariants(t);
  }

  void on_job_done(std::int64_t id, SimTime expected_finish, SimTime t) {
    const batch::Job& job = scheduler_.job(id);
    // a requeued job carries a newer finish time; this event is stale
    if (job.state != batch::JobState::Running ||
        job.finish_time != expected_finish) {
      return;
    }
    scheduler_.complete(id, t);
    trace_.record(t, "job_done",
                  {{"job", std::to_string(id)}, {"group", job.group}});
    coordinator_.tick(t);
    tick_batch(t);
  }

  void check_batch_invariants(SimTime t) {
    if (scheduler_.pending_count() > 0) {
      for (const auto& [name, h] : scheduler_.hosts()) {
        if (h.open && h.free_slots() > 0) {
          violation("work conservation: open slot on " + name +
                        " with pending jobs",
                    t);
          break;
        }
      }
    }
    if (scheduler_.submitted_count() !=
        scheduler_.pending_count() + scheduler_.running_count() +
            scheduler_.done_count()) {
      violation("job conservation broken", t);
    }
  }

  // Reinstall-equivalence sweep: for every production node, converging a
  // copy in place and reinstalling another copy from scratch must land on
  // the same state digest.
  void run_checkpoint(SimTime t) {
    trace_.record(t, "checkpoint", {});
    for (auto& [name, m] : nodes_) {
      if (m.vn.phase() != node::Phase::Production) continue;
      node::VirtualNode updated = m.vn;
      node::VirtualNode reinstalled = m.vn;
      bool ok = true;
      std::string du, dr;
      try {
        ok &= node::update_in_place(updated, sweep_services_, components_);
        node::InstallSpec spec = node::install_spec_from_profile(
            compile_profile(name));
        node::begin_install(reinstalled, spec, nullptr);
        ok &= node::first_boot(reinstalled, sweep_services_, components_);
        du = node::state_digest(updated);
        dr = node::state_digest(reinstalled);
      } catch (const Error& e) {
        ok = false;
        du = std::string("error: ") + e.what();
      }
      if (!ok || du != dr) {
        violation("reinstall equivalence failed for " + name + " (update " +
                      du + " vs reinstall " + dr + ")",
                  t);
      }
      trace_.record(t, "digest",
                    {{"node", name},
                     {"value", du},
                     {"match", (ok && du == dr) ? "1" : "0"}});
    }
  }

  Scenario scenario_;
  std::uint64_t seed_;
  FleetConfig cfg_;

  secure::DeterministicProvider provider_;
  secure::KeyServer keyserver_;
  notify::Broker broker_;
  batch::Scheduler scheduler_;
  rundown::RundownCoordinator coordinator_;
  ReplicaSet replicas_;
  Monitoring monitoring_;
  TraceRecorder trace_;

  config::TemplateSet templates_;
  config::ProfileDatabase profiles_;
  config::GlobalSchema schema_;
  bool have_schema_ = false;
  std::vector<config::Statement> site_overrides_;
  std::vector<pkg::PackageSpec> cluster_packages_;

  node::ComponentRegistry components_;
  TransportServices services_;
  SweepServices sweep_services_;

  std::map<std::string, ManagedNode> nodes_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>>
      queue_;
  std::int64_t next_seq_ = 0;
  SimTime now_ = 0;
  std::vector<std::string> violations_;
};

}  // namespace fab::sim
