#pragma once

#include <string>

#include "fab/util.hpp"

namespace fab::node {

enum class Phase {
  Unprovisioned,
  BaseInstalling,
  AwaitingFirstBoot,
  Configuring,
  Production,
  Draining,
  Intervention,
  Down,
};

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Unprovisioned: return "unprovisioned";
    case Phase::BaseInstalling: return "base_installing";
    case Phase::AwaitingFirstBoot: return "awaiting_first_boot";
    case Phase::Configuring: return "configuring";
    case Phase::Production: return "production";
    case Phase::Draining: return "draining";
    case Phase::Intervention: return "intervention";
    case Phase::Down: return "down";
  }
  return "?";
}

// The fixed lifecycle graph. Hardware failure is the one exception: any
// phase may drop to Down, because machines can and do fail at any time.
inline bool legal_transition(Phase from, Phase to) {
  if (to == Phase::Down) return true;
  switch (from) {
    case Phase::Unprovisioned:
      return to == Phase::BaseInstalling;
    case Phase::BaseInstalling:
      return to == Phase::AwaitingFirstBoot;
    case Phase::AwaitingFirstBoot:
      return to == Phase::Configuring;
    case Phase::Configuring:
      return to == Phase::Production;
    case Phase::Production:
      return to == Phase::Draining || to == Phase::Intervention ||
             to == Phase::BaseInstalling;
    case Phase::Draining:
      return to == Phase::Intervention;
    case Phase::Intervention:
      return to == Phase::BaseInstalling || to == Phase::Production;
    case Phase::Down:
      return to == Phase::BaseInstalling;
  }
  return false;
}

struct NodeState {
  Phase phase = Phase::Unprovisioned;
  std::int64_t boot_count = 0;
  bool firstboot_hook_armed = false;

  void transition(Phase to) {
    if (!legal_transition(phase, to)) {
      throw Error("ILLEGAL_PHASE",
                  std::string("illegal transition ") + phase_name(phase) +
                      " -> " + phase_name(to));
    }
    phase = to;
    if (phase != Phase::AwaitingFirstBoot) firstboot_hook_armed = false;
  }
};

}  // namespace fab::node
