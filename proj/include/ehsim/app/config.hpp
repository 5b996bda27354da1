#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ehsim/amser/amser.hpp"
#include "ehsim/common/toml.hpp"
#include "ehsim/edgesim/calibrate.hpp"
#include "ehsim/edgesim/sim.hpp"
#include "ehsim/pool/pool.hpp"
#include "ehsim/rl/orchestrate.hpp"
#include "ehsim/signal/types.hpp"

namespace ehsim::app {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunSection {
  std::uint64_t seed = 1;
  std::string out;  // empty: $EHSIM_OUT, else "out"
  int jobs = 1;
};

struct SignalsSection {
  std::vector<signal::ModalityId> modalities = {signal::ModalityId::ecg(), signal::ModalityId::eda(),
                                                signal::ModalityId::ppg()};
  double window_s = 60.0;
  std::size_t windows = 200;  // per scenario dataset
  signal::SynthConfig synth;
  std::map<signal::ScenarioId, signal::NoiseScenario> scenarios;
};

struct PoolSection {
  std::size_t windows = 600;
  pool::Family family = pool::Family::kNearestCentroid;
  std::vector<pool::Family> compare = {pool::Family::kNearestCentroid, pool::Family::kKnn,
                                       pool::Family::kTreeEnsemble};
  pool::FamilyParams params;
  double noisy_snr_lo_db = 6.0;
  double noisy_snr_hi_db = 14.0;
  std::map<signal::ModalityId, std::size_t> reduced_k;
  std::size_t eval_windows = 200;  // fresh clean windows for the modality comparison
};

struct AmserSection {
  std::size_t seeds = 30;
  std::size_t windows_per_seed = 200;
  int bytes_per_sample = 2;
  amser::CostModel cost;
};

struct EdgesimSection {
  edgesim::SimConfig sim;
  std::string policy = "edge-only";
};

struct CalibrateSection {
  std::vector<std::string> free;  // empty: default free set
  int max_sweeps = 400;
  int restarts = 3;
};

struct RlSection {
  rl::TrainConfig train;
  std::size_t eval_seeds = 8;
  double eval_s = 120.0;
  std::size_t frozen_steps = 30000;
  std::size_t frozen_rollouts = 100;
  std::size_t frozen_min_visits = 30;
  double frozen_alpha = 0.01;
};

struct ScenarioConfig {
  RunSection run;
  SignalsSection signals;
  signal::QualityThresholds quality;
  PoolSection pool;
  AmserSection amser;
  EdgesimSection edgesim;
  CalibrateSection calibrate;
  RlSection rl;
  // Hex digest of the canonical serialization of the resolved file.
  std::string hash;

  pool::DatasetSpec dataset_spec() const;
  amser::RunConfig amser_run(int jobs) const;
  rl::Hyper frozen_hyper() const;
};

// Throws InvalidArgument listing the valid names (static policies and "rl").
void check_policy_name(const std::string& name);

// Every key is validated; unknown keys raise ConfigError with key and line.
ScenarioConfig load_config(const toml::Table& table);
ScenarioConfig load_config_file(const std::filesystem::path& path);
ScenarioConfig default_config();

}  // namespace ehsim::app
