#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ehsim/edgesim/sim.hpp"
#include "ehsim/rl/qlearn.hpp"

namespace ehsim::rl {

// Device-edge-cloud image classification workload used for the multi-user
// experiments: per-user devices, a shared edge and a shared cloud.
edgesim::SimConfig default_orchestration_config();

struct TrainConfig {
  Hyper hyper;
  StateSpace space;
  std::size_t episodes = 1500;
  double episode_s = 60.0;
  double energy_weight = 0.0;
};

struct TrainResult {
  QTable table;
  std::vector<edgesim::Placement> actions;
  std::vector<double> curve;  // mean response time per episode
  std::vector<int> curve_users;
};

// Episode e simulates 1 + e % max_users users with epsilon from the decay
// schedule; the agent learns from every completed request.
TrainResult train(const edgesim::SimConfig& base, const TrainConfig& config, std::uint64_t seed);

std::vector<std::string> action_names(const std::vector<edgesim::Placement>& actions,
                                      const edgesim::Topology& topo);

struct SweepRow {
  int users = 0;
  std::string policy;
  double mean_response_s = 0.0;
};

// Mean response time per user count for the static strategies and the
// greedy (frozen) agent, averaged over `eval_seeds` runs of `eval_s` seconds.
std::vector<SweepRow> user_sweep(const edgesim::SimConfig& base, const TrainResult& trained,
                                 const StateSpace& space, std::size_t eval_seeds, double eval_s,
                                 std::uint64_t seed, int jobs = 1);

inline const std::vector<std::string>& sweep_static_policies() {
  static const std::vector<std::string> p = {"device-only", "edge-only", "cloud-only"};
  return p;
}

// Stationary environment for checking the learner: a state fixes the
// bandwidth tier and the edge and cloud utilization bins; a rollout preloads
// backlog drawn uniformly inside those bins and runs one request.
class FrozenEnvironment {
 public:
  explicit FrozenEnvironment(edgesim::SimConfig base);

  std::size_t states() const { return 27; }
  std::size_t actions() const { return actions_.size(); }
  const StateSpace& space() const { return space_; }
  const std::vector<edgesim::Placement>& placements() const { return actions_; }
  // Reward (negative response time) of one seeded rollout.
  double rollout(std::size_t state, std::size_t action, std::uint64_t seed) const;

 private:
  edgesim::SimConfig base_;
  StateSpace space_;
  std::vector<edgesim::Placement> actions_;
};

struct FrozenCheck {
  QTable table;
  std::vector<std::vector<double>> oracle;  // mean reward per state and action
  std::vector<std::size_t> oracle_best;
  std::size_t well_visited = 0;
  std::size_t matched = 0;
  double match_rate() const { return well_visited ? static_cast<double>(matched) / well_visited : 0.0; }
};

// Trains on `steps` one-request episodes (uniform states), then compares the
// greedy action with the brute-force best action (mean of `rollouts` seeded
// rollouts per action, the same seeds for every action) on states visited at
// least `min_visits` times.
FrozenCheck check_frozen(const FrozenEnvironment& env, const Hyper& hyper, std::size_t steps,
                         std::size_t rollouts, std::size_t min_visits, std::uint64_t seed);

}  // namespace ehsim::rl
