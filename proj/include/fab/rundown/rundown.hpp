#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fab/util.hpp"

namespace fab::rundown {

enum class NodeKind { Batch, Interactive };
enum class ActionKind { Reboot, Reinstall, KernelUpdate };

inline const char* action_name(ActionKind a) {
  switch (a) {
    case ActionKind::Reboot: return "reboot";
    case ActionKind::Reinstall: return "reinstall";
    case ActionKind::KernelUpdate: return "kernel_update";
  }
  return "?";
}

struct RundownPlan {
  std::string node;
  NodeKind node_kind = NodeKind::Batch;
  ActionKind action = ActionKind::Reboot;
  SimTime grace = 0;  // interactive only
  SimTime requested_at = 0;

  void validate() const {
    if (node_kind == NodeKind::Interactive && grace <= 0) {
      throw Error("BAD_PLAN", "interactive rundown needs a grace time");
    }
    if (node_kind == NodeKind::Batch && grace != 0) {
      throw Error("BAD_PLAN", "grace time applies to interactive nodes only");
    }
  }
};

enum class DrainPhase { Requested, Draining, Ready, Acting, Done, Aborted };

inline const char* drain_phase_name(DrainPhase p) {
  switch (p) {
    case DrainPhase::Requested: return "requested";
    case DrainPhase::Draining: return "draining";
    case DrainPhase::Ready: return "ready";
    case DrainPhase::Acting: return "acting";
    case DrainPhase::Done: return "done";
    case DrainPhase::Aborted: return "aborted";
  }
  return "?";
}

struct DrainState {
  DrainPhase phase = DrainPhase::Requested;
  std::int64_t blocking = 0;  // running jobs (batch) or logged-in users
  SimTime requested_at = 0;
  SimTime ready_at = -1;
  SimTime act_started_at = -1;
  SimTime finished_at = -1;
};

// The environment a rundown touches: the batch system, login control,
// monitoring and the node itself. Action execution is asynchronous — the
// coordinator is told through on_action_done when it finished.
class RundownHost {
 public:
  virtual ~RundownHost() = default;

  virtual bool in_production(const std::string& node) = 0;
  virtual void close_batch(const std::string& node) = 0;
  virtual void reopen_batch(const std::string& node) = 0;
  virtual void block_logins(const std::string& node) = 0;
  virtual void unblock_logins(const std::string& node) = 0;
  virtual std::int64_t running_jobs(const std::string& node) = 0;
  virtual std::int64_t logged_in_users(const std::string& node) = 0;
  virtual void mute_monitoring(const std::string& node) = 0;
  virtual void unmute_monitoring(const std::string& node) = 0;
  virtual void operator_notice(const std::string& node,
                               const std::string& text) = 0;
  virtual void enter_draining(const std::string& node) = 0;
  virtual void enter_intervention(const std::string& node) = 0;
  virtual void abort_to_production(const std::string& node) = 0;
  virtual void execute_action(const std::string& node, ActionKind action,
                              SimTime now) = 0;
};

// Drives intervention rundowns per node: stop new work immediately, wait
// until the node is drained (or the grace time runs out), then act. Every
// node acts as soon as it alone is drained — the fleet never waits for
// its slowest member.
class RundownCoordinator {
 public:
  explicit RundownCoordinator(RundownHost& host) : host_(host) {}

  void set_max_parallel(int n) {
    max_parallel_ = n <= 0 ? std::numeric_limits<int>::max() : n;
  }

  DrainState start_rundown(RundownPlan plan, SimTime now) {
    plan.validate();
    plan.requested_at = now;
    if (active_.contains(plan.node)) {
      throw Error("RUNDOWN_ACTIVE",
                  "a rundown for " + plan.node + " is already active");
    }
    if (!host_.in_production(plan.node)) {
      throw Error("NOT_PRODUCTION",
                  plan.node + " is not in production");
    }

    host_.enter_draining(plan.node);
    if (plan.node_kind == NodeKind::Batch) {
      host_.close_batch(plan.node);
    } else {
      host_.block_logins(plan.node);
    }
    host_.mute_monitoring(plan.node);
    host_.operator_notice(plan.node, std::string("intervention scheduled: ") +
                                         action_name(plan.action));

    Entry entry;
    entry.plan = plan;
    entry.state.phase = DrainPhase::Draining;
    entry.state.requested_at = now;
    entry.state.blocking = blocking_count(plan);
    active_.emplace(plan.node, std::move(entry));
    tick(now);
    return state_of(plan.node);
  }

  // Re-evaluates drain progress and starts actions as capacity allows.
  // Deterministic: nodes become ready in (time, name) order.
  void tick(SimTime now) {
    for (auto& [node, entry] : active_) {
      if (entry.state.phase != DrainPhase::Draining) continue;
      entry.state.blocking = blocking_count(entry.plan);
      bool drained = entry.state.blocking == 0;
      bool grace_over = entry.plan.node_kind == NodeKind::Interactive &&
                        now >= entry.plan.requested_at + entry.plan.grace;
      if (drained || grace_over) {
        entry.state.phase = DrainPhase::Ready;
        entry.state.ready_at = now;
      }
    }

    std::vector<Entry*> ready;
    for (auto& [node, entry] : active_) {
      if (entry.state.phase == DrainPhase::Ready) ready.push_back(&entry);
    }
    std::sort(ready.begin(), ready.end(), [](const Entry* a, const Entry* b) {
      if (a->state.ready_at != b->state.ready_at) {
        return a->state.ready_at < b->state.ready_at;
      }
      return a->plan.node < b->plan.node;
    });
    for (Entry* entry : ready) {
      if (acting_ >= max_parallel_) break;
      entry->state.phase = DrainPhase::Acting;
      entry->state.act_started_at = now;
      ++acting_;
      host_.enter_intervention(entry->plan.node);
      host_.execute_action(entry->plan.node, entry->plan.action, now);
    }
  }

  void on_action_done(const std::string& node, SimTime now) {
    auto it = active_.find(node);
    if (it == active_.end() || it->second.state.phase != DrainPhase::Acting) {
      throw Error("NO_RUNDOWN", "no acting rundown for " + node);
    }
    Entry& entry = it->second;
    release(entry, now);
    entry.state.phase = DrainPhase::Done;
    entry.state.finished_at = now;
    --acting_;
    host_.operator_notice(node, "intervention complete");
    history_.push_back(entry);
    active_.erase(it);
    tick(now);  // a queued rundown may act now
  }

  // Allowed any time before the action starts; the node goes straight
  // back to service untouched.
  DrainState abort_rundown(const std::string& node, SimTime now) {
    auto it = active_.find(node);
    if (it == active_.end()) {
      throw Error("NO_RUNDOWN", "no active rundown for " + node);
    }
    Entry& entry = it->second;
    if (entry.state.phase == DrainPhase::Acting) {
      throw Error("RUNDOWN_ACTIVE", "action already started on " + node);
    }
    host_.abort_to_production(node);
    release(entry, now);
    entry.state.phase = DrainPhase::Aborted;
    entry.state.finished_at = now;
    host_.operator_notice(node, "intervention aborted");
    DrainState out = entry.state;
    history_.push_back(entry);
    active_.erase(it);
    return out;
  }

  // Starts the same intervention on many nodes at once. All of them drain
  // concurrently; max_parallel only bounds simultaneous actions.
  std::vector<DrainState> fleet_rundown(const std::vector<std::string>& nodes,
                                        RundownPlan plan_template,
                                        int max_parallel, SimTime now) {
    if (nodes.empty()) {
      throw Error("EMPTY_NODELIST", "fleet rundown needs at least one node");
    }
    set_max_parallel(max_parallel);
    std::vector<DrainState> out;
    for (const std::string& node : nodes) {
      RundownPlan plan = plan_template;
      plan.node = node;
      out.push_back(start_rundown(plan, now));
    }
    return out;
  }

  bool is_active(const std::string& node) const {
    return active_.contains(node);
  }

  DrainState state_of(const std::string& node) const {
    auto it = active_.find(node);
    if (it == active_.end()) {
      throw Error("NO_RUNDOWN", "no active rundown for " + node);
    }
    return it->second.state;
  }

  size_t active_count() const { return active_.size(); }

  struct Entry {
    RundownPlan plan;
    DrainState state;
  };

  const std::vector<Entry>& history() const { return history_; }
  const std::map<std::string, Entry>& active() const { return active_; }

 private:
  std::int64_t blocking_count(const RundownPlan& plan) {
    return plan.node_kind == NodeKind::Batch
               ? host_.running_jobs(plan.node)
               : host_.logged_in_users(plan.node);
  }

  void release(const Entry& entry, SimTime) {
    if (entry.plan.node_kind == NodeKind::Batch) {
      host_.reopen_batch(entry.plan.node);
    } else {
      host_.unblock_logins(entry.plan.node);
    }
    host_.unmute_monitoring(entry.plan.node);
  }

  RundownHost& host_;
  int max_parallel_ = std::numeric_limits<int>::max();
  int acting_ = 0;
  std::map<std::string, Entry> active_;
  std::vector<Entry> history_;
};

}  // namespace fab::rundown
