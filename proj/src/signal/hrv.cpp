#include "ehsim/signal/hrv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ehsim/common/error.hpp"

namespace ehsim::signal {

std::vector<double> detect_peaks(const Signal& signal, const PeakDetectorConfig& config) {
  const auto& k = signal.modality.key();
  if (k != "ECG" && k != "PPG")
    throw InvalidArgument("peak detection unsupported for modality " + k);
  return detect_peaks(signal.samples, signal.sampling_rate_hz, config);
}

std::vector<double> detect_peaks(std::span<const double> x, double rate_hz,
                                 const PeakDetectorConfig& config) {
  if (!(rate_hz > 0.0)) throw InvalidArgument("sampling rate must be positive");
  const std::size_t n = x.size();
  if (n < 5) return {};
  const auto half = static_cast<std::size_t>(std::max(1.0, std::round(config.window_s * rate_hz)));

  struct Candidate {
    std::size_t index;
    double value;
  };
  std::vector<Candidate> candidates;
  std::vector<double> buf;
  // The outermost two samples are never peaks: a beat cut by the window edge
  // would otherwise show up as a grid-dependent maximum.
  for (std::size_t i = 2; i + 2 < n; ++i) {
    if (!(x[i] > x[i - 1] && x[i] >= x[i + 1])) continue;
    const std::size_t lo = i > half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    buf.assign(x.begin() + static_cast<std::ptrdiff_t>(lo), x.begin() + static_cast<std::ptrdiff_t>(hi));
    auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
    std::nth_element(buf.begin(), mid, buf.end());
    const double median = *mid;
    const double top = *std::max_element(buf.begin(), buf.end());
    if (top <= median) continue;
    if (x[i] >= median + config.fraction * (top - median)) candidates.push_back({i, x[i]});
  }

  // Strongest first; a candidate survives when no stronger peak lies within
  // the refractory period.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
  const double refractory = config.refractory_s * rate_hz;
  std::vector<std::size_t> kept;
  for (const auto& c : candidates) {
    bool clear = true;
    for (std::size_t j : kept) {
      const double gap = std::abs(static_cast<double>(j) - static_cast<double>(c.index));
      if (gap < refractory) {
        clear = false;
        break;
      }
    }
    if (clear) kept.push_back(c.index);
  }
  std::sort(kept.begin(), kept.end());

  std::vector<double> times;
  times.reserve(kept.size());
  for (std::size_t i : kept) {
    const double a = x[i - 1];
    const double b = x[i];
    const double c = x[i + 1];
    const double denom = a - 2.0 * b + c;
    double offset = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    times.push_back((static_cast<double>(i) + offset) / rate_hz);
  }
  return times;
}

double compute_rmssd(std::span<const double> peaks) {
  if (peaks.size() < 3) throw InvalidArgument("RMSSD needs at least 3 peaks");
  double acc = 0.0;
  for (std::size_t i = 2; i < peaks.size(); ++i) {
    const double d = (peaks[i] - peaks[i - 1]) - (peaks[i - 1] - peaks[i - 2]);
    acc += d * d;
  }
  return 1000.0 * std::sqrt(acc / static_cast<double>(peaks.size() - 2));
}

RmssdResult assess_rmssd(std::span<const double> peaks, QualityLabel window_label) {
  return {compute_rmssd(peaks), window_label == QualityLabel::kReliable};
}

double PeakMatch::precision() const {
  const auto d = true_positive + false_positive;
  return d ? static_cast<double>(true_positive) / static_cast<double>(d) : 1.0;
}

double PeakMatch::recall() const {
  const auto d = true_positive + false_negative;
  return d ? static_cast<double>(true_positive) / static_cast<double>(d) : 1.0;
}

double PeakMatch::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

PeakMatch match_peaks(std::span<const double> detected, std::span<const double> truth,
                      double tolerance_s) {
  PeakMatch m;
  std::vector<bool> used(detected.size(), false);
  for (double t : truth) {
    std::size_t best = detected.size();
    double best_gap = tolerance_s;
    for (std::size_t i = 0; i < detected.size(); ++i) {
      if (used[i]) continue;
      const double gap = std::abs(detected[i] - t);
      if (gap <= best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best < detected.size()) {
      used[best] = true;
      ++m.true_positive;
    } else {
      ++m.false_negative;
    }
  }
  m.false_positive = static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
  return m;
}

}  // namespace ehsim::signal
