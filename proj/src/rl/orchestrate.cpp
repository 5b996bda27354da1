#include "ehsim/rl/orchestrate.hpp"

#include "ehsim/common/error.hpp"
#include "ehsim/common/parallel.hpp"

namespace ehsim::rl {

using edgesim::LayerKind;

edgesim::SimConfig default_orchestration_config() {
  edgesim::SimConfig c;
  c.topology.nodes = {{LayerKind::kDevice, 1000.0, 2.0, true},
                      {LayerKind::kEdge, 4000.0, 1.0, false},
                      {LayerKind::kCloud, 16000.0, 0.5, false}};
  c.topology.links = {{{20.0, 100.0, 200.0}, 2.0, 0.5}, {{10.0, 80.0, 200.0}, 20.0, 1.0}};
  edgesim::PipelineSpec p;
  p.app = "imgclass";
  p.input_bytes = {600000.0, 150000.0};
  p.stages = {{"preprocess", {60.0, 15.0}, {60000.0, 15000.0}}, {"inference", {400.0, 100.0}, {1000.0, 1000.0}}};
  c.pipelines = {p};
  c.arrival.period_s = 0.5;
  c.arrival.jitter = 0.1;
  c.tier = edgesim::BandwidthTier::kMedium;
  c.duration_s = 60.0;
  c.utilization_window_s = 0.05;
  return c;
}

std::vector<std::string> action_names(const std::vector<edgesim::Placement>& actions,
                                      const edgesim::Topology& topo) {
  std::vector<std::string> out;
  for (const auto& a : actions) out.push_back(edgesim::to_string(a, topo));
  return out;
}

TrainResult train(const edgesim::SimConfig& base, const TrainConfig& config, std::uint64_t seed) {
  config.hyper.validate();
  config.space.validate();
  base.validate();
  if (config.episodes < 1) throw InvalidArgument("training needs at least one episode");
  if (!(config.episode_s > 0.0)) throw InvalidArgument("episode length must be positive");
  for (const auto& p : base.pipelines)
    if (std::find(config.space.apps.begin(), config.space.apps.end(), p.app) == config.space.apps.end())
      throw InvalidArgument("app '" + p.app + "' is missing from the RL state space");
  if (base.pipelines.size() != 1) throw InvalidArgument("RL training expects a single pipeline");

  const auto actions = edgesim::enumerate_placements(base.pipelines[0].stages.size(), base.topology.layers());
  TrainResult out{QTable(config.space.size(), actions.size(), config.hyper), actions, {}, {}};
  Rng rng(derive_seed(seed, "agent"));
  QAgent agent(out.table, config.space, actions, rng);
  agent.set_energy_weight(config.energy_weight);
  for (std::size_t e = 0; e < config.episodes; ++e) {
    auto sim = base;
    sim.users = 1 + static_cast<int>(e % static_cast<std::size_t>(config.space.max_users));
    sim.duration_s = config.episode_s;
    agent.reset_episode();
    agent.set_epsilon(config.hyper.epsilon(e, config.episodes));
    const auto trace = edgesim::simulate(sim, agent, derive_seed(derive_seed(seed, "episode"), e));
    out.curve.push_back(trace.mean_response_s());
    out.curve_users.push_back(sim.users);
  }
  return out;
}

std::vector<SweepRow> user_sweep(const edgesim::SimConfig& base, const TrainResult& trained,
                                 const StateSpace& space, std::size_t eval_seeds, double eval_s,
                                 std::uint64_t seed, int jobs) {
  if (eval_seeds < 1) throw InvalidArgument("sweep needs at least one evaluation seed");
  std::vector<std::string> policies = sweep_static_policies();
  policies.push_back("rl");
  const auto users = static_cast<std::size_t>(space.max_users);
  const std::size_t cells = users * policies.size() * eval_seeds;
  std::vector<double> means(cells, 0.0);
  parallel_for(cells, jobs, [&](std::size_t i) {
    const std::size_t k = i % eval_seeds;
    const std::size_t p = (i / eval_seeds) % policies.size();
    const std::size_t u = i / (eval_seeds * policies.size());
    auto sim = base;
    sim.users = static_cast<int>(u + 1);
    sim.duration_s = eval_s;
    // Every policy sees the same arrivals for a given (users, k).
    const auto run_seed = derive_seed(derive_seed(seed, "sweep"), u * 1000003 + k);
    if (policies[p] == "rl") {
      QTable table = trained.table;
      Rng rng(run_seed);
      QAgent agent(table, space, trained.actions, rng);
      agent.set_learning(false);
      agent.set_epsilon(0.0);
      means[i] = edgesim::simulate(sim, agent, run_seed).mean_response_s();
    } else {
      edgesim::StaticPolicy pol(policies[p], sim.topology);
      means[i] = edgesim::simulate(sim, pol, run_seed).mean_response_s();
    }
  });
  std::vector<SweepRow> rows;
  for (std::size_t u = 0; u < users; ++u)
    for (std::size_t p = 0; p < policies.size(); ++p) {
      double sum = 0.0;
      for (std::size_t k = 0; k < eval_seeds; ++k) sum += means[(u * policies.size() + p) * eval_seeds + k];
      rows.push_back({static_cast<int>(u + 1), policies[p], sum / static_cast<double>(eval_seeds)});
    }
  return rows;
}

// ---------------------------------------------------------------- frozen environment

FrozenEnvironment::FrozenEnvironment(edgesim::SimConfig base) : base_(std::move(base)) {
  base_.users = 1;
  base_.validate();
  if (base_.pipelines.size() != 1) throw InvalidArgument("frozen environment expects a single pipeline");
  space_.max_users = 1;
  space_.apps = {base_.pipelines[0].app};
  actions_ = edgesim::enumerate_placements(base_.pipelines[0].stages.size(), base_.topology.layers());
  if (actions_.size() > 10) throw InvalidArgument("frozen environment is limited to 10 actions");
}

double FrozenEnvironment::rollout(std::size_t state, std::size_t action, std::uint64_t seed) const {
  const auto s = space_.at(state);
  Rng rng(seed);
  const auto draw = [&](UtilBin b) {
    const double lo = b == UtilBin::kLow ? 0.0 : b == UtilBin::kMed ? space_.low_boundary : space_.high_boundary;
    const double hi = b == UtilBin::kLow ? space_.low_boundary : b == UtilBin::kMed ? space_.high_boundary : 1.0;
    return rng.uniform(lo, hi);
  };
  auto sim = base_;
  sim.tier = s.tier;
  sim.preload_s[LayerKind::kEdge] = draw(s.edge) * sim.utilization_window_s;
  sim.preload_s[LayerKind::kCloud] = draw(s.cloud) * sim.utilization_window_s;
  // A single request right at the start.
  sim.arrival.kind = edgesim::ArrivalKind::kPeriodic;
  sim.arrival.period_s = 1e-6;
  sim.arrival.jitter = 0.0;
  sim.duration_s = 1e-6;

  class Fixed : public edgesim::Policy {
   public:
    explicit Fixed(const edgesim::Placement& p) : p_(p) {}
    edgesim::Placement choose(const edgesim::Snapshot&, const edgesim::PipelineSpec&) override { return p_; }

   private:
    const edgesim::Placement& p_;
  } policy(actions_[action]);
  const auto trace = edgesim::simulate(sim, policy, seed);
  return -trace.mean_response_s();
}

FrozenCheck check_frozen(const FrozenEnvironment& env, const Hyper& hyper, std::size_t steps,
                         std::size_t rollouts, std::size_t min_visits, std::uint64_t seed) {
  hyper.validate();
  FrozenCheck out{QTable(env.states(), env.actions(), hyper), {}, {}, 0, 0};
  Rng rng(derive_seed(seed, "frozen/train"));
  const auto train_seed = derive_seed(seed, "frozen/rollout");
  for (std::size_t t = 0; t < steps; ++t) {
    const auto s = static_cast<std::size_t>(rng.below(env.states()));
    const auto a = choose_action(out.table, s, hyper.epsilon(t, steps), rng);
    // One-request episodes: there is no successor state.
    out.table.update_terminal(s, a, env.rollout(s, a, derive_seed(train_seed, t)));
  }
  const auto oracle_seed = derive_seed(seed, "frozen/oracle");
  for (std::size_t s = 0; s < env.states(); ++s) {
    std::vector<double> mean(env.actions(), 0.0);
    for (std::size_t a = 0; a < env.actions(); ++a) {
      for (std::size_t k = 0; k < rollouts; ++k)
        mean[a] += env.rollout(s, a, derive_seed(derive_seed(oracle_seed, s), k));
      mean[a] /= static_cast<double>(rollouts);
    }
    std::size_t best = 0;
    for (std::size_t a = 1; a < mean.size(); ++a)
      if (mean[a] > mean[best]) best = a;
    out.oracle.push_back(mean);
    out.oracle_best.push_back(best);
    if (out.table.visits(s) >= min_visits) {
      ++out.well_visited;
      if (out.table.greedy(s) == best) ++out.matched;
    }
  }
  return out;
}

}  // namespace ehsim::rl
