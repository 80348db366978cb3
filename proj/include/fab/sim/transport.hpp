#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fab/util.hpp"

namespace fab::sim {

struct ServerReplica {
  std::string name;
  bool alive = true;
  std::set<std::string> serves;
};

// The replicated server cluster behind one service name, as a client sees
// it through the DNS round-robin: requests rotate over the replicas that
// are up and serve the service, so losing one box only shifts traffic.
class ReplicaSet {
 public:
  void add(const std::string& name,
           std::set<std::string> serves = {"profiles", "packages", "keys",
                                           "notify"}) {
    replicas_.push_back({name, true, std::move(serves)});
  }

  void set_alive(const std::string& name, bool alive) {
    for (ServerReplica& r : replicas_) {
      if (r.name == name) {
        r.alive = alive;
        return;
      }
    }
    throw Error("UNKNOWN_TARGET", "no replica " + name);
  }

  const ServerReplica& select_replica(const std::string& service,
                                      std::int64_t request_index) const {
    std::vector<const ServerReplica*> candidates;
    for (const ServerReplica& r : replicas_) {
      if (r.alive && r.serves.contains(service)) candidates.push_back(&r);
    }
    if (candidates.empty()) {
      throw Error("ALL_REPLICAS_DOWN",
                  "no live replica serves '" + service + "'");
    }
    return *candidates[static_cast<size_t>(request_index) % candidates.size()];
  }

  // Client-side entry point: picks the replica for this request and keeps
  // the per-service rotation counter.
  const ServerReplica& route(const std::string& service) {
    return select_replica(service, counters_[service]++);
  }

  size_t alive_count(const std::string& service) const {
    size_t n = 0;
    for (const ServerReplica& r : replicas_) {
      if (r.alive && r.serves.contains(service)) ++n;
    }
    return n;
  }

  const std::vector<ServerReplica>& all() const { return replicas_; }
  bool empty() const { return replicas_.empty(); }

 private:
  std::vector<ServerReplica> replicas_;  // configuration order
  std::map<std::string, std::int64_t> counters_;
};

}  // namespace fab::sim
