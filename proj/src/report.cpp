#include "tfem/report.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

namespace tfem {

nlohmann::ordered_json step_record(const StepReport& s) {
  nlohmann::ordered_json j;
  j["step"] = s.step;
  j["t"] = s.t;
  j["dt"] = s.dt;
  j["dt_next"] = s.dt_next;
  j["max_dT"] = s.max_change;
  j["rejections"] = s.rejections;
  j["rejected_max_dT"] = s.rejected_changes;
  j["newton_iterations"] = s.newton_iterations;
  j["thermal_krylov_iterations"] = s.thermal_krylov_iterations;
  j["elastic_krylov_iterations"] = s.elastic_krylov_iterations;
  j["thermal_pc_built"] = s.thermal_pc_built;
  j["elastic_pc_built"] = s.elastic_pc_built;
  j["thermal_seconds"] = s.thermal_seconds;
  j["elastic_seconds"] = s.elastic_seconds;
  return j;
}

void write_timing(const TimingReport& timing, double wall_seconds, std::ostream& out) {
  for (const auto& p : timing.phases()) {
    nlohmann::ordered_json j;
    j["phase"] = p.name;
    j["seconds"] = p.seconds;
    j["calls"] = p.calls;
    out << j.dump() << '\n';
  }
  nlohmann::ordered_json j;
  j["phase"] = "total";
  j["seconds"] = wall_seconds;
  j["covered"] = wall_seconds > 0.0 ? timing.total() / wall_seconds : 1.0;
  out << j.dump() << '\n';
}

StepLog::StepLog(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw ValidationError("cannot open step log '" + path + "'");
}

void StepLog::append(const StepReport& step) {
  out_ << step_record(step).dump() << '\n';
  out_.flush();
}

std::string quality_text(const QualityReport& r) {
  std::ostringstream s;
  char buf[128];
  s << "cells " << r.cell_count << "\nvertices " << r.vertex_count << '\n';
  std::snprintf(buf, sizeof(buf), "min_angle %.6f\nmax_angle %.6f\n", r.min_angle, r.max_angle);
  s << buf << "bin_lo\tbin_hi\tcount\n";
  for (std::size_t b = 0; b < r.counts.size(); ++b) {
    std::snprintf(buf, sizeof(buf), "%.4f\t%.4f\t%lld\n", r.bin_edges[b], r.bin_edges[b + 1],
                  static_cast<long long>(r.counts[b]));
    s << buf;
  }
  return s.str();
}

}  // namespace tfem
