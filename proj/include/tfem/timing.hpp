#pragma once

// Wall-clock accounting by named phase.

#include <chrono>
#include <string>
#include <vector>

namespace tfem {

class TimingReport {
 public:
  struct Phase {
    std::string name;
    double seconds = 0.0;
    int calls = 0;
  };

  class Scope {
   public:
    Scope(TimingReport* report, std::string name)
        : report_(report), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
    ~Scope() { stop(); }
    double stop() {
      if (!report_) return 0.0;
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
      report_->add(name_, s);
      report_ = nullptr;
      return s;
    }

   private:
    TimingReport* report_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
  };

  /// Phases keep the order in which they were first seen; every call is also
  /// appended to the event sequence.
  void add(const std::string& name, double seconds) {
    events_.push_back(name);
    for (auto& p : phases_)
      if (p.name == name) {
        p.seconds += seconds;
        ++p.calls;
        return;
      }
    phases_.push_back({name, seconds, 1});
  }

  const std::vector<Phase>& phases() const { return phases_; }
  const std::vector<std::string>& events() const { return events_; }
  double seconds(const std::string& name) const {
    for (const auto& p : phases_)
      if (p.name == name) return p.seconds;
    return 0.0;
  }
  double total() const {
    double s = 0.0;
    for (const auto& p : phases_) s += p.seconds;
    return s;
  }
  void merge(const TimingReport& other) {
    for (const auto& p : other.phases_) {
      add(p.name, p.seconds);
      for (auto& q : phases_)
        if (q.name == p.name) q.calls += p.calls - 1;
    }
  }

 private:
  std::vector<Phase> phases_;
  std::vector<std::string> events_;
};

/// Timer that records into `report` when it is non-null.
inline TimingReport::Scope time_phase(TimingReport* report, std::string name) {
  return TimingReport::Scope(report, std::move(name));
}

}  // namespace tfem
