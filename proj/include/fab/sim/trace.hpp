#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fab/util.hpp"

namespace fab::sim {

// Line-delimited run record: `t=<time> ev=<kind> k=v ...`. Traces are the
// determinism witness — two runs of the same scenario and seed must
// produce identical bytes.
class TraceRecorder {
 public:
  using Fields = std::vector<std::pair<std::string, std::string>>;

  void record(SimTime t, std::string_view kind, const Fields& fields = {}) {
    std::string line = "t=" + std::to_string(t) + " ev=" + std::string(kind);
    for (const auto& [k, v] : fields) {
      line += " " + k + "=" + v;
    }
    lines_.push_back(std::move(line));
  }

  const std::vector<std::string>& lines() const { return lines_; }

  std::string text() const {
    std::string out;
    for (const std::string& line : lines_) {
      out += line;
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<std::string> lines_;
};

struct SimTrace {
  std::vector<std::string> lines;
  std::vector<std::string> violations;
  SimTime end_time = 0;

  bool ok() const { return violations.empty(); }

  std::string text() const {
    std::string out;
    for (const std::string& line : lines) {
      out += line;
      out += '\n';
    }
    return out;
  }
};

}  // namespace fab::sim
