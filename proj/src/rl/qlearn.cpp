#include "ehsim/rl/qlearn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ehsim/common/error.hpp"

namespace ehsim::rl {

std::string to_string(UtilBin b) {
  switch (b) {
    case UtilBin::kLow:
      return "low";
    case UtilBin::kMed:
      return "med";
    case UtilBin::kHigh:
      return "high";
  }
  return "?";
}

void StateSpace::validate() const {
  if (max_users < 1) throw InvalidArgument("state space needs max_users >= 1");
  if (apps.empty()) throw InvalidArgument("state space needs at least one app");
  if (!(0.0 < low_boundary && low_boundary < high_boundary && high_boundary < 1.0))
    throw InvalidArgument("utilization boundaries must satisfy 0 < low < high < 1");
}

std::size_t StateSpace::size() const { return static_cast<std::size_t>(max_users) * 27 * apps.size(); }

std::size_t StateSpace::index(const QState& s) const {
  if (s.users < 1 || s.users > max_users || s.app < 0 || static_cast<std::size_t>(s.app) >= apps.size())
    throw InvalidArgument("state outside the table domain");
  std::size_t i = static_cast<std::size_t>(s.app);
  i = i * static_cast<std::size_t>(max_users) + static_cast<std::size_t>(s.users - 1);
  i = i * 3 + static_cast<std::size_t>(s.edge);
  i = i * 3 + static_cast<std::size_t>(s.cloud);
  i = i * 3 + static_cast<std::size_t>(s.tier);
  return i;
}

QState StateSpace::at(std::size_t i) const {
  if (i >= size()) throw InvalidArgument("state index out of range");
  QState s;
  s.tier = static_cast<BandwidthTier>(i % 3);
  i /= 3;
  s.cloud = static_cast<UtilBin>(i % 3);
  i /= 3;
  s.edge = static_cast<UtilBin>(i % 3);
  i /= 3;
  s.users = static_cast<int>(i % static_cast<std::size_t>(max_users)) + 1;
  s.app = static_cast<int>(i / static_cast<std::size_t>(max_users));
  return s;
}

UtilBin StateSpace::bin(double u) const {
  if (u <= low_boundary) return UtilBin::kLow;
  if (u <= high_boundary) return UtilBin::kMed;
  return UtilBin::kHigh;
}

QState StateSpace::observe(const edgesim::Snapshot& snap) const {
  for (double u : {snap.edge_utilization, snap.cloud_utilization})
    if (!(u >= 0.0 && u <= 1.0)) throw InvalidArgument("utilization outside [0, 1]");
  QState s;
  s.users = std::clamp(snap.active_users, 1, max_users);
  s.edge = bin(snap.edge_utilization);
  s.cloud = bin(snap.cloud_utilization);
  s.tier = snap.tier;
  const auto it = std::find(apps.begin(), apps.end(), snap.app);
  if (it == apps.end()) throw InvalidArgument("app '" + snap.app + "' is not in the state space");
  s.app = static_cast<int>(it - apps.begin());
  return s;
}

void Hyper::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must be in (0, 1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must be in [0, 1)");
  for (double e : {epsilon_start, epsilon_end})
    if (!(e >= 0.0 && e <= 1.0)) throw InvalidArgument("epsilon must be in [0, 1]");
}

double Hyper::epsilon(std::size_t episode, std::size_t episodes) const {
  if (episodes <= 1 || epsilon_start == epsilon_end) return epsilon_start;
  const double f = static_cast<double>(std::min(episode, episodes - 1)) / static_cast<double>(episodes - 1);
  if (epsilon_end <= 0.0 || epsilon_start <= 0.0) return epsilon_start + (epsilon_end - epsilon_start) * f;
  return epsilon_start * std::pow(epsilon_end / epsilon_start, f);
}

QTable::QTable(std::size_t states, std::size_t actions, Hyper hyper)
    : states_(states), actions_(actions), hyper_(hyper), q_(states * actions, 0.0), n_(states * actions, 0) {
  if (states == 0 || actions == 0) throw InvalidArgument("Q-table needs states and actions");
  // alpha = 0 is allowed here (a frozen table); training entry points
  // validate the full hyperparameter set.
  if (!(hyper.alpha >= 0.0 && hyper.alpha <= 1.0) || !(hyper.gamma >= 0.0 && hyper.gamma < 1.0))
    throw InvalidArgument("alpha must be in [0, 1] and gamma in [0, 1)");
}

std::uint64_t QTable::visits(std::size_t s) const {
  std::uint64_t n = 0;
  for (std::size_t a = 0; a < actions_; ++a) n += visits(s, a);
  return n;
}

std::size_t QTable::greedy(std::size_t s) const {
  std::size_t best = 0;
  for (std::size_t a = 1; a < actions_; ++a)
    if (value(s, a) > value(s, best)) best = a;
  return best;
}

double QTable::max_value(std::size_t s) const { return value(s, greedy(s)); }

double QTable::step(std::size_t s, std::size_t a) const {
  if (!hyper_.visit_alpha) return hyper_.alpha;
  return std::max(hyper_.alpha, 1.0 / static_cast<double>(n_[s * actions_ + a]));
}

void QTable::update(std::size_t s, std::size_t a, double reward, std::size_t next) {
  const double target = reward + hyper_.gamma * max_value(next);
  auto& q = q_[s * actions_ + a];
  ++n_[s * actions_ + a];
  q += step(s, a) * (target - q);
}

void QTable::update_terminal(std::size_t s, std::size_t a, double reward) {
  auto& q = q_[s * actions_ + a];
  ++n_[s * actions_ + a];
  q += step(s, a) * (reward - q);
}

void QTable::write_csv(const std::filesystem::path& path, const StateSpace& space,
                       const std::vector<std::string>& action_names, const FileHeader* header) const {
  CsvWriter w(path, {"users", "edge_util", "cloud_util", "bandwidth", "app", "action", "value", "visits"}, header);
  for (std::size_t s = 0; s < states_; ++s) {
    const auto st = space.at(s);
    for (std::size_t a = 0; a < actions_; ++a) {
      w.cell(st.users).cell(to_string(st.edge)).cell(to_string(st.cloud)).cell(edgesim::to_string(st.tier));
      w.cell(space.apps[static_cast<std::size_t>(st.app)]);
      w.cell(a < action_names.size() ? action_names[a] : std::to_string(a));
      w.cell(value(s, a)).cell(static_cast<std::int64_t>(visits(s, a)));
      w.end_row();
    }
  }
}

std::string QTable::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < q_.size(); ++i) out += format_number(q_[i]) + ' ' + std::to_string(n_[i]) + '\n';
  return out;
}

std::size_t choose_action(const QTable& table, std::size_t s, double epsilon, Rng& rng) {
  // The exploration draw is always consumed so the stream position does not
  // depend on table contents.
  const double u = rng.uniform();
  const auto pick = rng.below(table.actions());
  return u < epsilon ? static_cast<std::size_t>(pick) : table.greedy(s);
}

QAgent::QAgent(QTable& table, const StateSpace& space, std::vector<edgesim::Placement> actions, Rng& rng)
    : table_(table), space_(space), actions_(std::move(actions)), rng_(rng) {
  if (actions_.size() != table_.actions()) throw InvalidArgument("agent actions do not match the Q-table");
  if (space_.size() != table_.states()) throw InvalidArgument("state space does not match the Q-table");
}

edgesim::Placement QAgent::choose(const edgesim::Snapshot& state, const edgesim::PipelineSpec&) {
  const auto s = space_.index(space_.observe(state));
  const auto a = choose_action(table_, s, epsilon_, rng_);
  pending_.emplace_back(s, a);
  return actions_[a];
}

void QAgent::completed(const edgesim::RequestRecord& rec, const edgesim::Snapshot& after) {
  if (!learning_) return;
  if (rec.id >= pending_.size()) throw RuntimeError("completion for an unknown request");
  const auto [s, a] = pending_[rec.id];
  const double reward = -(rec.response_time_s() + energy_weight_ * rec.energy_nj);
  table_.update(s, a, reward, space_.index(space_.observe(after)));
}

}  // namespace ehsim::rl
