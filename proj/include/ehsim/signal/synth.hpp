#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "ehsim/signal/types.hpp"

namespace ehsim::signal {

struct Band {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

// Per-modality acquisition and noise-model parameters.
//
// Generated clean signals are band-limited to DC plus [signal_low_hz,
// Nyquist]; baseline wander lives in `wander` (below signal_low_hz). The
// blind SNR estimator relies on exactly this split.
struct ModalityProfile {
  double nominal_rate_hz = 100.0;
  double full_scale = 1.0;
  double signal_low_hz = 0.55;
  Band wander{0.05, 0.5};
  Band artifact{0.1, 1.0};
};

ModalityProfile default_profile(const ModalityId& m);

struct SynthConfig {
  int class_count = 2;
  // Multiplies the class-dependent shift of every template parameter.
  double separability = 1.0;
  // Multiplies the per-window nuisance spread (0 gives nominal templates).
  double variability = 1.0;
  std::map<ModalityId, ModalityProfile> profiles;

  // Profile for `m`; falls back to the built-in default.
  ModalityProfile profile(const ModalityId& m) const;
};

// Seeded synthetic window. Deterministic in all arguments.
Signal generate_window(const ModalityId& modality, int class_label, double duration_s,
                       std::uint64_t seed, const SynthConfig& config = {});

// Adds baseline wander scaled to the requested SNR and, for the artifact
// kind, overwrites one contiguous segment with a band-passed burst.
Signal inject_noise(const Signal& input, const NoiseSpec& spec, std::uint64_t seed,
                    const SynthConfig& config = {});

// Ideal (spectral truncation) anti-aliased decimation by an integer factor.
// Ground truth is carried along; clean samples are decimated the same way.
Signal downsample(const Signal& input, int factor);

// Population variance; the power measure used for every SNR in this module.
double signal_power(std::span<const double> x);

// Default noise scenarios. The first modality is the "weak" one: it carries
// Noisy-level wander in S2 and the artifact in S3/S4; the second modality
// carries the second artifact in S4.
NoiseScenario default_scenario(ScenarioId id, const std::vector<ModalityId>& modalities);

}  // namespace ehsim::signal
