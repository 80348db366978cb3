#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "fab/util.hpp"

namespace fab::sim {

struct MetricSample {
  std::string node;
  std::string metric;
  std::int64_t value = 0;
  SimTime at = 0;
};

struct Alarm {
  std::string node;
  std::string condition;
  SimTime raised_at = 0;
  bool acknowledged = false;
};

// Central monitoring store: an append-only sample table and the alarm
// board the operators watch. Alarms never trigger any automated action;
// they only surface. Muting a node (during an intervention) suppresses
// its alarms entirely rather than recording them silenced.
class Monitoring {
 public:
  void record_metric(const std::string& node, const std::string& metric,
                     std::int64_t value, SimTime at) {
    samples_.push_back({node, metric, value, at});
  }

  // Returns whether the alarm was actually raised.
  bool raise_alarm(const std::string& node, const std::string& condition,
                   SimTime at) {
    if (muted_.contains(node)) return false;
    alarms_.push_back({node, condition, at, false});
    return true;
  }

  void mute(const std::string& node) { muted_.insert(node); }
  void unmute(const std::string& node) { muted_.erase(node); }
  bool is_muted(const std::string& node) const { return muted_.contains(node); }

  void acknowledge(size_t index) {
    if (index < alarms_.size()) alarms_[index].acknowledged = true;
  }

  const std::vector<MetricSample>& samples() const { return samples_; }
  const std::vector<Alarm>& alarms() const { return alarms_; }

 private:
  std::vector<MetricSample> samples_;
  std::vector<Alarm> alarms_;
  std::set<std::string> muted_;
};

}  // namespace fab::sim
