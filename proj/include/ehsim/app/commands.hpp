#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ehsim/app/config.hpp"
#include "ehsim/common/csv.hpp"

namespace ehsim::app {

struct Context {
  ScenarioConfig config;
  std::filesystem::path out;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string policy;  // simulate: overrides edgesim.policy when set

  FileHeader header() const { return {kToolVersion, config.hash, seed}; }
  // Root seed of one command: derive_seed(seed, command).
  std::uint64_t command_seed(const std::string& command) const;
  // <out>/<command>, created on demand.
  std::filesystem::path dir(const std::string& command) const;
};

// Resolves --out, then run.out from the config, then $EHSIM_OUT, then "out".
std::filesystem::path resolve_out(const std::string& flag, const ScenarioConfig& config);

// Commands in pipeline order: generate, train-pool, amser, simulate,
// train-rl, calibrate, report.
const std::vector<std::string>& command_names();
void run_command(const std::string& name, const Context& ctx);

void cmd_generate(const Context& ctx);
void cmd_train_pool(const Context& ctx);
void cmd_amser(const Context& ctx);
void cmd_simulate(const Context& ctx);
void cmd_train_rl(const Context& ctx);
void cmd_calibrate(const Context& ctx);
void cmd_report(const Context& ctx);

// Q-table written by train-rl; checks the shape against the state space and
// the action names.
rl::QTable read_qtable(const std::filesystem::path& path, const rl::StateSpace& space,
                       const std::vector<std::string>& actions, const rl::Hyper& hyper);

}  // namespace ehsim::app
