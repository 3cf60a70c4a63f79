#pragma once

// Line-delimited JSON records for timings and transient steps.

#include <fstream>
#include <iosfwd>
#include <string>

#include "json.hpp"
#include "tfem/sim.hpp"

namespace tfem {

nlohmann::ordered_json step_record(const StepReport& step);

/// One {"phase", "seconds", "calls"} line per phase, then a "total" line with
/// the wall time and the covered fraction.
void write_timing(const TimingReport& timing, double wall_seconds, std::ostream& out);

/// Appends one record per step and flushes, so interrupted runs keep the
/// steps already taken.
class StepLog {
 public:
  explicit StepLog(const std::string& path);
  void append(const StepReport& step);

 private:
  std::ofstream out_;
};

std::string quality_text(const QualityReport& report);

}  // namespace tfem
