#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ehsim/common/csv.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/edgesim/sim.hpp"

namespace ehsim::rl {

using edgesim::BandwidthTier;

enum class UtilBin { kLow = 0, kMed = 1, kHigh = 2 };
std::string to_string(UtilBin b);

struct QState {
  int users = 1;  // 1..max_users
  UtilBin edge = UtilBin::kLow;
  UtilBin cloud = UtilBin::kLow;
  BandwidthTier tier = BandwidthTier::kMedium;
  int app = 0;  // index into StateSpace::apps

  friend bool operator==(const QState&, const QState&) = default;
};

// Discretization of simulator snapshots. A value equal to a boundary goes
// to the lower bin.
struct StateSpace {
  int max_users = 5;
  std::vector<std::string> apps = {"imgclass"};
  double low_boundary = 0.33;
  double high_boundary = 0.66;

  void validate() const;
  std::size_t size() const;
  std::size_t index(const QState& s) const;
  QState at(std::size_t index) const;
  UtilBin bin(double utilization) const;
  // Throws if a utilization is outside [0, 1] or the app is unknown.
  QState observe(const edgesim::Snapshot& snap) const;
};

struct Hyper {
  double alpha = 0.1;
  double gamma = 0.3;
  // Use max(alpha, 1 / visits) as the step, i.e. a running mean until the
  // constant rate takes over.
  bool visit_alpha = false;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;

  void validate() const;
  // Exponential decay from epsilon_start to epsilon_end over the episodes.
  double epsilon(std::size_t episode, std::size_t episodes) const;
};

class QTable {
 public:
  QTable(std::size_t states, std::size_t actions, Hyper hyper);

  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }
  const Hyper& hyper() const { return hyper_; }

  double value(std::size_t s, std::size_t a) const { return q_[s * actions_ + a]; }
  std::uint64_t visits(std::size_t s, std::size_t a) const { return n_[s * actions_ + a]; }
  std::uint64_t visits(std::size_t s) const;
  void set(std::size_t s, std::size_t a, double v) { q_[s * actions_ + a] = v; }

  // Highest value; ties go to the lowest action index.
  std::size_t greedy(std::size_t s) const;
  double max_value(std::size_t s) const;

  // Q(s,a) += step * (reward + gamma * max_a' Q(s',a') - Q(s,a)).
  void update(std::size_t s, std::size_t a, double reward, std::size_t next);
  // Same, for a transition with no successor.
  void update_terminal(std::size_t s, std::size_t a, double reward);

  // Rows: state fields, action, value, visits.
  void write_csv(const std::filesystem::path& path, const StateSpace& space,
                 const std::vector<std::string>& action_names, const FileHeader* header = nullptr) const;
  std::string serialize() const;

 private:
  double step(std::size_t s, std::size_t a) const;

  std::size_t states_;
  std::size_t actions_;
  Hyper hyper_;
  std::vector<double> q_;
  std::vector<std::uint64_t> n_;
};

// Epsilon-greedy: with probability epsilon a uniform action, otherwise greedy.
std::size_t choose_action(const QTable& table, std::size_t s, double epsilon, Rng& rng);

// Simulator policy backed by a Q-table. Learns from every completed request
// when `learning` is set; reward = -(response time + energy_weight * energy).
class QAgent : public edgesim::Policy {
 public:
  QAgent(QTable& table, const StateSpace& space, std::vector<edgesim::Placement> actions, Rng& rng);

  void set_epsilon(double e) { epsilon_ = e; }
  void set_learning(bool on) { learning_ = on; }
  void set_energy_weight(double w) { energy_weight_ = w; }

  edgesim::Placement choose(const edgesim::Snapshot& state, const edgesim::PipelineSpec& pipe) override;
  void completed(const edgesim::RequestRecord& rec, const edgesim::Snapshot& after) override;

  // Starts a new simulation run (request ids restart at 0).
  void reset_episode() { pending_.clear(); }

 private:
  QTable& table_;
  const StateSpace& space_;
  std::vector<edgesim::Placement> actions_;
  Rng& rng_;
  double epsilon_ = 0.0;
  bool learning_ = true;
  double energy_weight_ = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> pending_;  // by request id
};

}  // namespace ehsim::rl
