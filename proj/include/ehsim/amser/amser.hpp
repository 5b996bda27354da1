#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ehsim/common/csv.hpp"
#include "ehsim/pool/pool.hpp"
#include "ehsim/signal/types.hpp"

namespace ehsim::amser {

using signal::ModalityId;

struct SensorSetting {
  bool enabled = true;
  double sampling_rate_hz = 0.0;
};

struct SensingConfig {
  std::map<ModalityId, SensorSetting> sensors;

  // At least one enabled sensor; each rate is nominal, nominal/2 or nominal/4.
  void validate(const signal::SynthConfig& synth = {}) const;
};

struct ComputePlan {
  features::FeaturePlan features;
  pool::ModelKey model_key;
  double tier_threshold = 0.0;
};

struct Decision {
  SensingConfig sensing;
  ComputePlan compute;
};

// Unreliable: sensor off and modality dropped. Noisy: half rate and the
// reduced noise-aware plan. Reliable: full rate, full template.
Decision select_plan(const signal::QualityReport& report, const pool::Pool& pool,
                     const signal::SynthConfig& synth = {});

// Full sensing, full model, quality-blind.
Decision baseline_plan(const std::vector<ModalityId>& mods, const pool::Pool& pool,
                       const signal::SynthConfig& synth = {});

// Sum over enabled sensors of floor(rate * window) * bytes_per_sample.
std::uint64_t data_volume(const SensingConfig& config, double window_s, int bytes_per_sample);

// Modeled compute: per sample `pre_ops`, plus `feature_ops` per sample and
// extracted feature, plus the model's inference cost. In Mops.
struct CostModel {
  double pre_ops_per_sample = 4.0;
  double feature_ops_per_sample = 1.0;
  double edge_speed_mops = 1000.0;  // Mops per second of the edge node

  double compute_mops(const Decision& d, double window_s, double inference_mops) const;
};

enum class Mode { kAmser, kBaseline };
std::string to_string(Mode m);

struct RunConfig {
  std::vector<ModalityId> modalities = {ModalityId::ecg(), ModalityId::eda(), ModalityId::ppg()};
  std::size_t seeds = 30;
  std::size_t windows_per_seed = 200;
  double window_s = 60.0;
  int bytes_per_sample = 2;
  signal::QualityThresholds thresholds;
  signal::SynthConfig synth;
  CostModel cost;
  int jobs = 1;
};

struct WindowRecord {
  std::size_t seed_index = 0;
  std::size_t window = 0;
  int truth = 0;
  pool::Prediction prediction;
  double latency_s = 0.0;
  std::uint64_t data_bytes = 0;
  std::string labels;  // quality labels, e.g. "ECG=Noisy;EDA=Reliable;PPG=Reliable"
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double latency_s = 0.0;
  double data_bytes = 0.0;
};

struct ScenarioOutcome {
  signal::ScenarioId scenario = signal::ScenarioId::kS1;
  Mode mode = Mode::kAmser;
  double accuracy = 0.0;
  double latency_s = 0.0;
  double speedup_vs_baseline = 1.0;
  double data_bytes = 0.0;
  double data_reduction_vs_baseline = 1.0;
  std::vector<SeedOutcome> per_seed;
  std::vector<WindowRecord> windows;
};

struct ScenarioComparison {
  ScenarioOutcome amser;
  ScenarioOutcome baseline;
  // Mean per-seed accuracy gain and its 95% percentile-bootstrap interval.
  double gain = 0.0;
  double gain_lo = 0.0;
  double gain_hi = 0.0;
};

// Runs both modes on the same seeded windows so they see identical signals.
ScenarioComparison run_scenario(const signal::NoiseScenario& scenario, const pool::Pool& pool,
                                const RunConfig& config, std::uint64_t seed);

// Percentile bootstrap of the mean.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};
Interval bootstrap_mean(const std::vector<double>& values, std::size_t resamples, double level,
                        std::uint64_t seed);

// Per-seed rows: scenario,mode,seed,accuracy,latency_proxy,speedup,data_bytes,reduction.
void write_outcomes_csv(const std::filesystem::path& path, const std::vector<ScenarioComparison>& runs,
                        const FileHeader* header = nullptr);

}  // namespace ehsim::amser
