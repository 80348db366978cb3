#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "fab/util.hpp"

namespace fab::batch {

inline constexpr const char* kReasonNew = "new";
inline constexpr const char* kReasonNoSlots = "no_open_slots";
inline constexpr const char* kReasonHostClosed = "host_closed_for_intervention";
inline constexpr const char* kReasonPriority = "group_priority_below_others";

struct ShareGroup {
  std::string name;
  double share = 0.0;
  double decayed_usage = 0.0;   // cpu-seconds, exponentially decayed
  double consumed_total = 0.0;  // cpu-seconds, undecayed, for reporting
  int running = 0;
};

enum class JobState { Pending, Running, Done };

struct Job {
  std::int64_t id = 0;
  std::string group;
  SimTime submit_time = 0;
  SimTime runtime = 0;  // the scheduler treats this as a max-runtime bound
  JobState state = JobState::Pending;
  std::string pending_reason = kReasonNew;
  std::string host;
  SimTime start_time = -1;
  SimTime finish_time = -1;
};

struct HostSlot {
  std::string name;
  int slots = 1;
  bool open = true;
  std::set<std::int64_t> running;

  int free_slots() const {
    return slots - static_cast<int>(running.size());
  }
};

struct Assignment {
  std::int64_t job = 0;
  std::string host;
  SimTime at = 0;
};

// Single-cluster fairshare scheduler. Each group gets
// priority = share / (1 + decayed_usage), usage halving every half_life
// seconds, so groups that consumed recently yield to the others but idle
// capacity is always handed to whoever has pending work.
class Scheduler {
 public:
  explicit Scheduler(SimTime half_life = 86400) : half_life_(half_life) {}

  void add_group(const std::string& name, double share) {
    if (share <= 0.0 || share > 1.0) {
      throw Error("BAD_SHARES", "share for " + name + " outside (0,1]");
    }
    groups_[name] = ShareGroup{name, share};
    pending_[name];
    shares_checked_ = false;
  }

  void add_host(const std::string& name, int slots) {
    if (slots < 1) throw Error("BAD_HOST", "host needs at least one slot");
    hosts_[name] = HostSlot{name, slots, true, {}};
  }

  void close_host(const std::string& name) { host(name).open = false; }
  void open_host(const std::string& name) { host(name).open = true; }
  bool host_open(const std::string& name) { return host(name).open; }

  std::int64_t submit(const std::string& group, SimTime runtime, SimTime now) {
    accrue(now);
    if (!groups_.contains(group)) {
      throw Error("UNKNOWN_GROUP", "no share group '" + group + "'");
    }
    if (runtime < 0 || runtime > max_runtime_) {
      throw Error("BAD_RUNTIME", "runtime exceeds the cluster limit");
    }
    std::int64_t id = next_id_++;
    Job job;
    job.id = id;
    job.group = group;
    job.submit_time = now;
    job.runtime = runtime;
    jobs_[id] = job;
    pending_[group].push_back(id);
    ++n_pending_;
    return id;
  }

  double priority(const std::string& group, SimTime now) {
    accrue(now);
    auto it = groups_.find(group);
    if (it == groups_.end()) {
      throw Error("UNKNOWN_GROUP", "no share group '" + group + "'");
    }
    return it->second.share / (1.0 + it->second.decayed_usage);
  }

  // One pass of the dispatcher: fill open slots from the pending queues,
  // best group first, FIFO within a group, then refresh pending reasons.
  std::vector<Assignment> schedule_tick(SimTime now) {
    accrue(now);
    check_shares();
    std::vector<Assignment> out;

    while (true) {
      HostSlot* slot_host = first_open_free_host();
      if (slot_host == nullptr) break;
      ShareGroup* best = nullptr;
      for (auto& [name, g] : groups_) {
        if (pending_[name].empty()) continue;
        double p = g.share / (1.0 + g.decayed_usage);
        if (best == nullptr ||
            p > best->share / (1.0 + best->decayed_usage)) {
          best = &g;  // ties keep the lexicographically first group
        }
      }
      if (best == nullptr) break;

      std::int64_t id = pending_[best->name].front();
      pending_[best->name].pop_front();
      Job& job = jobs_.at(id);
      job.state = JobState::Running;
      job.host = slot_host->name;
      job.start_time = now;
      job.finish_time = now + job.runtime;
      job.pending_reason.clear();
      slot_host->running.insert(id);
      ++best->running;
      --n_pending_;
      ++n_running_;
      out.push_back({id, slot_host->name, now});
    }

    refresh_pending_reasons(out);
    return out;
  }

  void complete(std::int64_t id, SimTime now) {
    accrue(now);
    Job& job = jobs_.at(id);
    if (job.state != JobState::Running) {
      throw Error("NOT_RUNNING", "job " + std::to_string(id) + " not running");
    }
    host(job.host).running.erase(id);
    --groups_.at(job.group).running;
    job.state = JobState::Done;
    job.finish_time = now;
    --n_running_;
    ++n_done_;
  }

  // A lost node abandons its jobs; they queue again from scratch.
  std::vector<std::int64_t> requeue_running_on(const std::string& host_name,
                                               SimTime now) {
    accrue(now);
    HostSlot& h = host(host_name);
    std::vector<std::int64_t> lost(h.running.begin(), h.running.end());
    for (std::int64_t id : lost) {
      Job& job = jobs_.at(id);
      --groups_.at(job.group).running;
      job.state = JobState::Pending;
      job.pending_reason = kReasonNew;
      job.host.clear();
      job.start_time = -1;
      job.finish_time = -1;
      pending_[job.group].push_back(id);
      --n_running_;
      ++n_pending_;
    }
    h.running.clear();
    return lost;
  }

  const std::string& pending_reason(std::int64_t id) const {
    auto it = jobs_.find(id);
    if (it == jobs_.end()) {
      throw Error("UNKNOWN_JOB", "no job " + std::to_string(id));
    }
    if (it->second.state != JobState::Pending) {
      throw Error("NOT_PENDING",
                  "job " + std::to_string(id) + " is not pending");
    }
    return it->second.pending_reason;
  }

  const Job& job(std::int64_t id) const { return jobs_.at(id); }
  const std::map<std::int64_t, Job>& jobs() const { return jobs_; }
  const std::map<std::string, ShareGroup>& groups() const { return groups_; }
  const std::map<std::string, HostSlot>& hosts() const { return hosts_; }
  const std::map<std::string, std::int64_t>& reason_ticks() const {
    return reason_ticks_;
  }

  int pending_count() const { return n_pending_; }
  int running_count() const { return n_running_; }
  int done_count() const { return n_done_; }
  int submitted_count() const { return static_cast<int>(jobs_.size()); }

  int running_on(const std::string& host_name) {
    return static_cast<int>(host(host_name).running.size());
  }

  SimTime half_life() const { return half_life_; }
  void set_max_runtime(SimTime limit) { max_runtime_ = limit; }

 private:
  void accrue(SimTime now) {
    if (now < clock_) {
      throw Error("TIME_REGRESSION", "scheduler clock moved backwards");
    }
    SimTime dt = now - clock_;
    if (dt == 0) return;
    double decay = std::exp2(-static_cast<double>(dt) /
                             static_cast<double>(half_life_));
    for (auto& [name, g] : groups_) {
      double consumed = static_cast<double>(g.running) *
                        static_cast<double>(dt);
      g.decayed_usage = g.decayed_usage * decay + consumed;
      g.consumed_total += consumed;
    }
    clock_ = now;
  }

  void check_shares() {
    if (shares_checked_) return;
    double sum = 0.0;
    for (const auto& [name, g] : groups_) sum += g.share;
    if (!groups_.empty() && std::abs(sum - 1.0) > 1e-9) {
      throw Error("BAD_SHARES", "group shares sum to " + std::to_string(sum));
    }
    shares_checked_ = true;
  }

  HostSlot* first_open_free_host() {
    for (auto& [name, h] : hosts_) {
      if (h.open && h.free_slots() > 0) return &h;
    }
    return nullptr;
  }

  void refresh_pending_reasons(const std::vector<Assignment>& assigned) {
    bool closed_capacity = false;
    for (const auto& [name, h] : hosts_) {
      if (!h.open && h.free_slots() > 0) {
        closed_capacity = true;
        break;
      }
    }
    std::set<std::string> assigned_groups;
    for (const Assignment& a : assigned) {
      assigned_groups.insert(jobs_.at(a.job).group);
    }
    for (auto& [gname, queue] : pending_) {
      bool lost_to_other_group =
          assigned_groups.size() > 1 ||
          (assigned_groups.size() == 1 && !assigned_groups.contains(gname));
      const char* reason = closed_capacity      ? kReasonHostClosed
                           : lost_to_other_group ? kReasonPriority
                                                 : kReasonNoSlots;
      for (std::int64_t id : queue) {
        jobs_.at(id).pending_reason = reason;
        ++reason_ticks_[reason];
      }
    }
  }

  HostSlot& host(const std::string& name) {
    auto it = hosts_.find(name);
    if (it == hosts_.end()) throw Error("UNKNOWN_HOST", "no host " + name);
    return it->second;
  }

  SimTime half_life_;
  SimTime max_runtime_ = 10 * 86400;
  SimTime clock_ = 0;
  bool shares_checked_ = false;
  std::map<std::string, ShareGroup> groups_;
  std::map<std::string, HostSlot> hosts_;
  std::map<std::int64_t, Job> jobs_;
  std::map<std::string, std::deque<std::int64_t>> pending_;
  std::map<std::string, std::int64_t> reason_ticks_;
  std::int64_t next_id_ = 1;
  int n_pending_ = 0;
  int n_running_ = 0;
  int n_done_ = 0;
};

struct WorkloadEntry {
  SimTime at = 0;
  std::string group;
  SimTime runtime = 0;
};

// Workload files: `submit <t> <group> <runtime>` per line, '#' comments.
inline std::vector<WorkloadEntry> parse_workload(std::string_view text) {
  std::vector<WorkloadEntry> out;
  int line_no = 0;
  for (const std::string& raw : util::split(text, '\n')) {
    ++line_no;
    std::string_view line = util::trim(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = util::trim(line.substr(0, hash));
    }
    if (line.empty()) continue;
    std::vector<std::string> words;
    for (const std::string& w : util::split(line, ' ')) {
      if (!w.empty()) words.push_back(w);
    }
    if (words.size() != 4 || words[0] != "submit") {
      throw Error("BAD_WORKLOAD", "line " + std::to_string(line_no) +
                                      ": expected 'submit <t> <group> <runtime>'");
    }
    out.push_back({std::stoll(words[1]), words[2], std::stoll(words[3])});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const WorkloadEntry& a, const WorkloadEntry& b) {
                     return a.at < b.at;
                   });
  return out;
}

// Standalone event loop for a scheduler: submits from the workload,
// completions as they fall due, a dispatch pass after every event batch.
// Stops at `until`; a final zero-length tick closes the usage accounting.
inline void run_workload(Scheduler& sched,
                         const std::vector<WorkloadEntry>& workload,
                         SimTime until) {
  using Completion = std::pair<SimTime, std::int64_t>;
  std::priority_queue<Completion, std::vector<Completion>,
                      std::greater<Completion>>
      completions;
  size_t next_submit = 0;

  auto enqueue = [&](const std::vector<Assignment>& assigned) {
    for (const Assignment& a : assigned) {
      completions.emplace(sched.job(a.job).finish_time, a.job);
    }
  };

  SimTime now = 0;
  while (true) {
    SimTime next_t = -1;
    if (next_submit < workload.size()) next_t = workload[next_submit].at;
    if (!completions.empty() &&
        (next_t < 0 || completions.top().first < next_t)) {
      next_t = completions.top().first;
    }
    if (next_t < 0 || next_t > until) break;
    now = next_t;

    while (true) {
      bool progressed = false;
      while (!completions.empty() && completions.top().first <= now) {
        std::int64_t id = completions.top().second;
        completions.pop();
        sched.complete(id, now);
        progressed = true;
      }
      while (next_submit < workload.size() &&
             workload[next_submit].at <= now) {
        const WorkloadEntry& e = workload[next_submit++];
        sched.submit(e.group, e.runtime, now);
        progressed = true;
      }
      if (!progressed) break;
      enqueue(sched.schedule_tick(now));
    }
  }
  sched.schedule_tick(until);
}

}  // namespace fab::batch
