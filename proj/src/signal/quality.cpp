#include "ehsim/signal/quality.hpp"

#include <algorithm>
#include <cmath>

#include "ehsim/common/error.hpp"
#include "ehsim/common/fft.hpp"

namespace ehsim::signal {

std::size_t noise_bin_limit(std::size_t n, double rate_hz, double low_hz) {
  const double edge = low_hz * static_cast<double>(n) / rate_hz;
  const auto k = static_cast<long long>(std::ceil(edge - 1e-9)) - 1;
  return k < 0 ? 0 : static_cast<std::size_t>(k);
}

bool is_detached(const Signal& signal, const ModalityProfile& profile) {
  return signal_power(signal.samples) < 1e-9 * profile.full_scale * profile.full_scale;
}

double estimate_snr(const Signal& signal, const ModalityProfile& profile) {
  if (signal.samples.empty() || signal.duration_s() < 1.0 - 1e-9)
    throw InvalidArgument("window too short for SNR estimation (need >= 1 s)");
  if (is_detached(signal, profile)) return kSnrFloorDb;
  const auto spectrum = fft::variance_spectrum(signal.samples);
  const std::size_t limit =
      std::min(noise_bin_limit(signal.samples.size(), signal.sampling_rate_hz, profile.signal_low_hz),
               spectrum.size() - 1);
  double drift = 0.0;
  double content = 0.0;
  for (std::size_t k = 1; k < spectrum.size(); ++k) (k <= limit ? drift : content) += spectrum[k];
  if (drift <= 0.0) return kSnrCeilingDb;
  if (content <= 0.0) return kSnrFloorDb;
  return std::clamp(10.0 * std::log10(content / drift), kSnrFloorDb, kSnrCeilingDb);
}

double estimate_snr(const Signal& signal, const SynthConfig& config) {
  return estimate_snr(signal, config.profile(signal.modality));
}

QualityLabel label_for(double snr_db, const QualityThresholds& th,
                       std::optional<QualityLabel> previous) {
  if (!(th.noisy_db > th.drop_db)) throw InvalidArgument("noisy threshold must exceed drop threshold");
  if (th.hysteresis_db < 0.0) throw InvalidArgument("hysteresis must be non-negative");
  const double h = th.hysteresis_db;
  const auto plain = [&] {
    if (snr_db >= th.noisy_db) return QualityLabel::kReliable;
    if (snr_db >= th.drop_db) return QualityLabel::kNoisy;
    return QualityLabel::kUnreliable;
  };
  if (snr_db >= th.noisy_db + h) return QualityLabel::kReliable;
  if (snr_db < th.drop_db - h) return QualityLabel::kUnreliable;
  if (snr_db >= th.drop_db + h && snr_db < th.noisy_db - h) return QualityLabel::kNoisy;
  if (!previous) return plain();
  if (snr_db >= th.noisy_db - h) {
    if (*previous == QualityLabel::kReliable || *previous == QualityLabel::kNoisy) return *previous;
    return QualityLabel::kNoisy;
  }
  if (*previous == QualityLabel::kNoisy || *previous == QualityLabel::kUnreliable) return *previous;
  return QualityLabel::kNoisy;
}

QualityReport assess_modalities(const std::map<ModalityId, Signal>& signals,
                                const QualityThresholds& thresholds,
                                const QualityReport* previous, const SynthConfig& config) {
  if (signals.empty()) throw InvalidArgument("empty modality set");
  QualityReport report;
  for (const auto& [m, s] : signals) {
    const ModalityProfile prof = config.profile(m);
    QualityEntry e;
    e.detached = is_detached(s, prof);
    e.estimated_snr_db = estimate_snr(s, prof);
    std::optional<QualityLabel> prior;
    if (previous) {
      auto it = previous->entries.find(m);
      if (it != previous->entries.end()) prior = it->second.label;
    }
    e.label = e.detached ? QualityLabel::kUnreliable : label_for(e.estimated_snr_db, thresholds, prior);
    report.entries[m] = e;
  }
  return report;
}

}  // namespace ehsim::signal
