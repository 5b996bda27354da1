#include "ehsim/signal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ehsim/common/error.hpp"
#include "ehsim/common/fft.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/signal/quality.hpp"

namespace ehsim::signal {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Class-dependent template parameter with a per-window nuisance draw.
struct Draw {
  Rng& rng;
  double c;
  double sep;
  double var;

  double operator()(double base, double per_class, double spread) {
    return base + per_class * c * sep + spread * var * rng.normal();
  }
};

// Beat onsets covering [-2 s, duration + 2 s] so edges are fully populated.
std::vector<double> beat_times(Rng& rng, double hr_bpm, double hrv_sd, double resp_hz,
                               double duration) {
  const double ibi = 60.0 / hr_bpm;
  const double phase = rng.uniform(0.0, kTwoPi);
  std::vector<double> beats;
  double t = -2.0 + rng.uniform(0.0, ibi);
  while (t < duration + 2.0) {
    beats.push_back(t);
    const double mod = 0.8 * std::sin(kTwoPi * resp_hz * t + phase) + 0.6 * rng.normal();
    t += std::max(0.36, ibi + hrv_sd * mod);
  }
  return beats;
}

void add_gaussian(std::vector<double>& x, double fs, double center, double amp, double sigma) {
  const double reach = 6.0 * sigma;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor((center - reach) * fs)));
  const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::ceil((center + reach) * fs)));
  for (auto i = lo; i <= hi; ++i) {
    const double u = (static_cast<double>(i) / fs - center) / sigma;
    x[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * u * u);
  }
}

void add_ricker(std::vector<double>& x, double fs, double center, double amp, double sigma) {
  const double reach = 6.0 * sigma;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor((center - reach) * fs)));
  const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::ceil((center + reach) * fs)));
  for (auto i = lo; i <= hi; ++i) {
    const double u = (static_cast<double>(i) / fs - center) / sigma;
    x[static_cast<std::size_t>(i)] += amp * (1.0 - u * u) * std::exp(-0.5 * u * u);
  }
}

std::vector<double> peaks_inside(const std::vector<double>& beats, double fs, double duration) {
  const double margin = 2.0 / fs;
  std::vector<double> out;
  for (double b : beats)
    if (b >= margin && b <= duration - margin) out.push_back(b);
  return out;
}

std::vector<double> band_pass(std::vector<double> x, double fs, Band band) {
  auto bins = fft::forward(x);
  const std::size_t n = x.size();
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double f = fft::bin_frequency(k, n, fs);
    if (f < band.lo_hz || f > band.hi_hz) bins[k] = 0.0;
  }
  return fft::inverse(bins, n);
}

std::vector<double> synth_ecg(Draw& d, Rng& rng, double fs, std::size_t n,
                              std::vector<double>& peaks) {
  const double duration = static_cast<double>(n) / fs;
  const double hr = clamp(d(75.0, 9.0, 6.0), 45.0, 140.0);
  const double amp = clamp(d(1.0, -0.15, 0.12), 0.3, 2.0);
  const double sigma = clamp(d(0.022, 0.003, 0.002), 0.012, 0.04);
  const double t_amp = clamp(d(0.25, 0.08, 0.05), 0.05, 0.6);
  const double hrv = clamp(d(0.045, -0.018, 0.01), 0.004, 0.1);
  const double resp = clamp(d(0.25, 0.04, 0.03), 0.12, 0.45);
  const auto beats = beat_times(rng, hr, hrv, resp, duration);
  std::vector<double> x(n, 0.0);
  for (double b : beats) {
    const double jitter = 1.0 + 0.05 * rng.normal();
    add_ricker(x, fs, b, amp * jitter, sigma);
    add_gaussian(x, fs, b + 0.26, t_amp * jitter, 0.045);
    add_gaussian(x, fs, b - 0.16, 0.1 * amp, 0.025);
  }
  peaks = peaks_inside(beats, fs, duration);
  return x;
}

std::vector<double> synth_ppg(Draw& d, Rng& rng, double fs, std::size_t n,
                              std::vector<double>& peaks) {
  const double duration = static_cast<double>(n) / fs;
  const double hr = clamp(d(75.0, 9.0, 6.0), 45.0, 140.0);
  const double amp = clamp(d(1.0, -0.12, 0.12), 0.3, 2.0);
  const double sigma = clamp(d(0.09, 0.015, 0.01), 0.05, 0.14);
  const double dicrotic = clamp(d(0.25, -0.06, 0.05), 0.0, 0.45);
  const double hrv = clamp(d(0.045, -0.018, 0.01), 0.004, 0.1);
  const double resp = clamp(d(0.25, 0.04, 0.03), 0.12, 0.45);
  const auto beats = beat_times(rng, hr, hrv, resp, duration);
  std::vector<double> x(n, 0.0);
  for (double b : beats) {
    const double jitter = 1.0 + 0.05 * rng.normal();
    add_gaussian(x, fs, b, amp * jitter, sigma);
    add_gaussian(x, fs, b + 0.3, amp * dicrotic * jitter, 0.06);
  }
  peaks = peaks_inside(beats, fs, duration);
  return x;
}

std::vector<double> synth_eda(Draw& d, Rng& rng, double fs, std::size_t n) {
  const double duration = static_cast<double>(n) / fs;
  const double tonic = clamp(d(2.0, 0.8, 0.5), 0.2, 20.0);
  const double rate_per_min = clamp(d(4.0, 4.0, 1.5), 0.5, 30.0);
  const double scr_amp = clamp(d(0.35, 0.15, 0.1), 0.02, 3.0);
  const double ripple = clamp(d(0.05, 0.03, 0.015), 0.01, 0.5);
  std::vector<double> x(n, tonic);
  double t = -5.0 + rng.exponential(rate_per_min / 60.0);
  while (t < duration) {
    const double a = scr_amp * rng.uniform(0.7, 1.3);
    const auto start = static_cast<std::ptrdiff_t>(std::ceil(t * fs));
    for (auto i = std::max<std::ptrdiff_t>(0, start); i < static_cast<std::ptrdiff_t>(n); ++i) {
      const double u = static_cast<double>(i) / fs - t;
      if (u > 6.0) break;
      // Fast rise, slower recovery; roughly unit peak height.
      x[static_cast<std::size_t>(i)] += a * 2.4 * (1.0 - std::exp(-u / 0.15)) * std::exp(-u / 0.7);
    }
    t += rng.exponential(rate_per_min / 60.0);
  }
  // Continuous fine-scale fluctuation so that no window is featureless.
  std::vector<double> w(n);
  for (double& v : w) v = rng.normal();
  w = band_pass(std::move(w), fs, {0.6, 0.45 * fs});
  const double pw = signal_power(w);
  if (pw > 0.0)
    for (std::size_t i = 0; i < n; ++i) x[i] += ripple * w[i] / std::sqrt(pw);
  return x;
}

std::vector<double> synth_acc(Draw& d, Rng& rng, double fs, std::size_t n) {
  const double f = clamp(d(1.6, 0.3, 0.15), 0.8, 3.0);
  const double a = clamp(d(0.3, 0.15, 0.08), 0.02, 2.0);
  const double p1 = rng.uniform(0.0, kTwoPi);
  const double p2 = rng.uniform(0.0, kTwoPi);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    x[i] = 1.0 + a * std::sin(kTwoPi * f * t + p1) + 0.4 * a * std::sin(2.0 * kTwoPi * f * t + p2) +
           0.05 * a * rng.normal();
  }
  return x;
}

std::vector<double> synth_rr(Draw& d, Rng& rng, double fs, std::size_t n) {
  const double f = clamp(d(0.25, 0.06, 0.03), 0.1, 0.6);
  const double a = clamp(d(1.0, -0.2, 0.1), 0.2, 3.0);
  const double p1 = rng.uniform(0.0, kTwoPi);
  const double p2 = rng.uniform(0.0, kTwoPi);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    x[i] = a * std::sin(kTwoPi * f * t + p1) + 0.2 * a * std::sin(2.0 * kTwoPi * f * t + p2);
  }
  return x;
}

// Removes all content strictly between DC and `low_hz`.
void band_limit(std::vector<double>& x, double fs, double low_hz) {
  auto bins = fft::forward(x);
  const std::size_t cut = noise_bin_limit(x.size(), fs, low_hz);
  for (std::size_t k = 1; k <= cut && k < bins.size(); ++k) bins[k] = 0.0;
  x = fft::inverse(bins, x.size());
}

}  // namespace

ModalityProfile default_profile(const ModalityId& m) {
  ModalityProfile p;
  const auto& k = m.key();
  if (k == "ECG") {
    p.nominal_rate_hz = 100.0;
    p.full_scale = 2.0;
  } else if (k == "EDA") {
    p.nominal_rate_hz = 4.0;
    p.full_scale = 20.0;
  } else if (k == "PPG") {
    p.nominal_rate_hz = 64.0;
    p.full_scale = 2.0;
  } else if (k == "ACC") {
    p.nominal_rate_hz = 32.0;
    p.full_scale = 4.0;
  } else if (k == "RR") {
    // Respiration itself sits inside the usual wander band, so its drift
    // model is pushed below the breathing rate.
    p.nominal_rate_hz = 25.0;
    p.full_scale = 4.0;
    p.signal_low_hz = 0.06;
    p.wander = {0.015, 0.05};
    p.artifact = {0.02, 0.3};
  }
  return p;
}

ModalityProfile SynthConfig::profile(const ModalityId& m) const {
  auto it = profiles.find(m);
  return it != profiles.end() ? it->second : default_profile(m);
}

double signal_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / n;
}

Signal generate_window(const ModalityId& modality, int class_label, double duration_s,
                       std::uint64_t seed, const SynthConfig& config) {
  if (!modality.builtin()) throw InvalidArgument("unknown modality '" + modality.key() + "'");
  if (!(duration_s > 0.0)) throw InvalidArgument("non-positive duration");
  if (class_label < 0 || class_label >= config.class_count)
    throw InvalidArgument("class label " + std::to_string(class_label) + " outside [0, " +
                          std::to_string(config.class_count) + ")");
  const ModalityProfile prof = config.profile(modality);
  const double fs = prof.nominal_rate_hz;
  if (duration_s < 1.0 / fs) throw InvalidArgument("duration shorter than one sample period");
  const auto n = static_cast<std::size_t>(std::floor(duration_s * fs + 1e-9));

  Rng rng(derive_seed(seed, "synth/" + modality.key()));
  Draw draw{rng, static_cast<double>(class_label), config.separability, config.variability};

  Signal s;
  s.modality = modality;
  s.sampling_rate_hz = fs;
  s.truth.class_label = class_label;
  const auto& k = modality.key();
  std::vector<double> x;
  if (k == "ECG") {
    x = synth_ecg(draw, rng, fs, n, s.truth.true_peak_times_s);
  } else if (k == "PPG") {
    x = synth_ppg(draw, rng, fs, n, s.truth.true_peak_times_s);
  } else if (k == "EDA") {
    x = synth_eda(draw, rng, fs, n);
  } else if (k == "ACC") {
    x = synth_acc(draw, rng, fs, n);
  } else {
    x = synth_rr(draw, rng, fs, n);
  }
  band_limit(x, fs, prof.signal_low_hz);
  s.samples = x;
  s.truth.clean_samples = std::move(x);
  s.truth.injected_noise_power = 0.0;
  s.truth.true_snr_db = kSnrCeilingDb;
  return s;
}

Signal inject_noise(const Signal& input, const NoiseSpec& spec, std::uint64_t seed,
                    const SynthConfig& config) {
  Signal out = input;
  out.truth.clean_samples = input.samples;
  out.truth.artifact_s.reset();
  if (spec.kind == NoiseKind::kNone) {
    out.truth.injected_noise_power = 0.0;
    out.truth.true_snr_db = kSnrCeilingDb;
    return out;
  }
  if (!std::isfinite(spec.target_snr_db))
    throw InvalidArgument("target SNR must be finite for noise kind " + to_string(spec.kind));
  const double duration = input.duration_s();
  if (spec.kind == NoiseKind::kWanderArtifact && spec.artifact_duration_s > duration)
    throw InvalidArgument("artifact duration exceeds signal duration");
  const auto& clean = input.samples;
  const double p_clean = signal_power(clean);
  if (!(p_clean > 0.0)) throw InvalidArgument("cannot set an SNR on a zero-power signal");

  const ModalityProfile prof = config.profile(input.modality);
  const double fs = input.sampling_rate_hz;
  const std::size_t n = clean.size();
  Rng rng(derive_seed(seed, "noise/" + input.modality.key()));

  // Two wander tones. Frequencies sit on the window's DFT grid when the band
  // contains at least two grid points, so the tones stay inside the band.
  const std::size_t limit = noise_bin_limit(n, fs, prof.signal_low_hz);
  std::vector<std::size_t> grid;
  for (std::size_t k = 1; k <= limit; ++k) {
    const double f = fft::bin_frequency(k, n, fs);
    if (f >= prof.wander.lo_hz - 1e-12 && f <= prof.wander.hi_hz + 1e-12) grid.push_back(k);
  }
  double f1 = 0.0;
  double f2 = 0.0;
  if (grid.size() >= 2) {
    const auto i1 = rng.below(grid.size());
    auto i2 = rng.below(grid.size() - 1);
    if (i2 >= i1) ++i2;
    f1 = fft::bin_frequency(grid[i1], n, fs);
    f2 = fft::bin_frequency(grid[i2], n, fs);
  } else {
    f1 = rng.uniform(prof.wander.lo_hz, prof.wander.hi_hz);
    f2 = rng.uniform(prof.wander.lo_hz, prof.wander.hi_hz);
  }
  const double a2 = rng.uniform(0.4, 1.0);
  const double ph1 = rng.uniform(0.0, kTwoPi);
  const double ph2 = rng.uniform(0.0, kTwoPi);
  std::vector<double> wander(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    wander[i] = std::cos(kTwoPi * f1 * t + ph1) + a2 * std::cos(kTwoPi * f2 * t + ph2);
  }
  const double p_wander = signal_power(wander);
  const double scale = std::sqrt(p_clean / (p_wander * std::pow(10.0, spec.target_snr_db / 10.0)));
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = clean[i] + scale * wander[i];

  if (spec.kind == NoiseKind::kWanderArtifact && spec.artifact_duration_s > 0.0) {
    const auto len = std::min<std::size_t>(
        n, static_cast<std::size_t>(std::llround(spec.artifact_duration_s * fs)));
    const std::size_t start = static_cast<std::size_t>(rng.below(n - len + 1));
    std::vector<double> burst(len);
    for (double& v : burst) v = rng.normal();
    Band band = prof.artifact;
    band.hi_hz = std::min(band.hi_hz, 0.45 * fs);
    burst = band_pass(std::move(burst), fs, band);
    const double p_burst = signal_power(burst);
    const double gain =
        p_burst > 0.0 ? spec.artifact_amplitude_scale * std::sqrt(p_clean / p_burst) : 0.0;
    const double level = std::accumulate(clean.begin(), clean.end(), 0.0) / static_cast<double>(n);
    for (std::size_t i = 0; i < len; ++i) out.samples[start + i] = level + gain * burst[i];
    out.truth.artifact_s = std::make_pair(static_cast<double>(start) / fs,
                                          static_cast<double>(start + len) / fs);
  }

  std::vector<double> noise(n);
  for (std::size_t i = 0; i < n; ++i) noise[i] = out.samples[i] - clean[i];
  out.truth.injected_noise_power = signal_power(noise);
  out.truth.true_snr_db = out.truth.injected_noise_power > 0.0
                              ? 10.0 * std::log10(p_clean / out.truth.injected_noise_power)
                              : kSnrCeilingDb;
  return out;
}

Signal downsample(const Signal& input, int factor) {
  if (factor < 1) throw InvalidArgument("downsample factor must be >= 1");
  if (factor == 1) return input;
  const std::size_t n_out = input.samples.size() / static_cast<std::size_t>(factor);
  if (n_out < 2) throw InvalidArgument("signal too short to downsample");
  const std::size_t n_in = n_out * static_cast<std::size_t>(factor);
  auto decimate = [&](const std::vector<double>& x) {
    const auto bins = fft::forward(std::span<const double>(x.data(), n_in));
    std::vector<std::complex<double>> kept(n_out / 2 + 1);
    const std::size_t top = (n_out % 2 == 0) ? n_out / 2 : n_out / 2 + 1;
    for (std::size_t k = 0; k < top; ++k) kept[k] = bins[k] / static_cast<double>(factor);
    return fft::inverse(kept, n_out);
  };
  Signal out = input;
  out.sampling_rate_hz = input.sampling_rate_hz / factor;
  out.samples = decimate(input.samples);
  if (input.truth.clean_samples.size() == input.samples.size()) {
    out.truth.clean_samples = decimate(input.truth.clean_samples);
    std::vector<double> noise(n_out);
    for (std::size_t i = 0; i < n_out; ++i) noise[i] = out.samples[i] - out.truth.clean_samples[i];
    const double p_noise = signal_power(noise);
    out.truth.injected_noise_power = p_noise;
    out.truth.true_snr_db =
        p_noise > 0.0 ? 10.0 * std::log10(signal_power(out.truth.clean_samples) / p_noise)
                      : kSnrCeilingDb;
  }
  const double end = out.duration_s() - 2.0 / out.sampling_rate_hz;
  std::erase_if(out.truth.true_peak_times_s, [&](double t) { return t > end; });
  return out;
}

NoiseScenario default_scenario(ScenarioId id, const std::vector<ModalityId>& modalities) {
  constexpr double kWeakSnrDb = 10.0;
  constexpr double kMildSnrDb = 20.0;
  constexpr double kArtifactS = 8.0;
  constexpr double kArtifactScale = 5.0;
  NoiseScenario sc;
  sc.id = id;
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    NoiseSpec spec;
    switch (id) {
      case ScenarioId::kS1:
        break;
      case ScenarioId::kS2:
        spec.kind = NoiseKind::kWander;
        spec.target_snr_db = i == 0 ? kWeakSnrDb : kMildSnrDb;
        break;
      case ScenarioId::kS3:
      case ScenarioId::kS4: {
        const std::size_t artifacts = id == ScenarioId::kS3 ? 1 : 2;
        spec.kind = i < artifacts ? NoiseKind::kWanderArtifact : NoiseKind::kWander;
        spec.target_snr_db = i < artifacts ? kWeakSnrDb : kMildSnrDb;
        if (i < artifacts) {
          spec.artifact_duration_s = kArtifactS;
          spec.artifact_amplitude_scale = kArtifactScale;
        }
        break;
      }
    }
    sc.per_modality[modalities[i]] = spec;
  }
  return sc;
}

}  // namespace ehsim::signal
