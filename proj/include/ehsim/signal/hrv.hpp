#pragma once

#include <span>
#include <vector>

#include "ehsim/signal/types.hpp"

namespace ehsim::signal {

struct PeakDetectorConfig {
  double refractory_s = 0.33;
  // Local threshold = median + fraction * (max - median) over +-window_s.
  double window_s = 1.0;
  double fraction = 0.5;
};

// Sorted peak times in seconds (relative to the window start). ECG/PPG only.
std::vector<double> detect_peaks(const Signal& signal, const PeakDetectorConfig& config = {});

// Same detector on a bare sample array.
std::vector<double> detect_peaks(std::span<const double> samples, double rate_hz,
                                 const PeakDetectorConfig& config = {});

// RMSSD of successive inter-peak intervals, milliseconds. Needs >= 3 peaks.
double compute_rmssd(std::span<const double> peak_times_s);

struct RmssdResult {
  double rmssd_ms = 0.0;
  bool reliable = false;
};

// RMSSD tagged with the window's quality: only Reliable windows give a
// trustworthy value.
RmssdResult assess_rmssd(std::span<const double> peak_times_s, QualityLabel window_label);

struct PeakMatch {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

// Greedy one-to-one matching within `tolerance_s`.
PeakMatch match_peaks(std::span<const double> detected, std::span<const double> truth,
                      double tolerance_s);

}  // namespace ehsim::signal
