#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "ehsim/common/error.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/rl/orchestrate.hpp"
#include "ehsim/rl/qlearn.hpp"

using namespace ehsim;
using namespace ehsim::rl;

namespace {

edgesim::Snapshot snap(int users, double edge, double cloud, BandwidthTier tier = BandwidthTier::kMedium) {
  edgesim::Snapshot s;
  s.active_users = users;
  s.total_users = 5;
  s.edge_utilization = edge;
  s.cloud_utilization = cloud;
  s.tier = tier;
  s.app = "imgclass";
  return s;
}

}  // namespace

TEST_CASE("observe bins utilization and clamps users") {
  StateSpace sp;
  auto s = sp.observe(snap(2, 0.1, 0.5, BandwidthTier::kHigh));
  CHECK(s.users == 2);
  CHECK(s.edge == UtilBin::kLow);
  CHECK(s.cloud == UtilBin::kMed);
  CHECK(s.tier == BandwidthTier::kHigh);
  CHECK(sp.observe(snap(1, 0.9, 0.0)).edge == UtilBin::kHigh);
  CHECK(sp.observe(snap(1, 0.33, 0.66)).edge == UtilBin::kLow);
  CHECK(sp.observe(snap(1, 0.33, 0.66)).cloud == UtilBin::kMed);
  CHECK(sp.observe(snap(1, 0.330001, 0.660001)).edge == UtilBin::kMed);
  CHECK(sp.observe(snap(1, 0.330001, 0.660001)).cloud == UtilBin::kHigh);
  CHECK(sp.observe(snap(9, 0, 0)).users == 5);
  CHECK(sp.observe(snap(0, 0, 0)).users == 1);
  CHECK_THROWS_AS(sp.observe(snap(1, 1.2, 0)), InvalidArgument);
  CHECK_THROWS_AS(sp.observe(snap(1, 0, -0.1)), InvalidArgument);
  auto bad = snap(1, 0, 0);
  bad.app = "other";
  CHECK_THROWS_AS(sp.observe(bad), InvalidArgument);
}

TEST_CASE("state index is a bijection") {
  StateSpace sp;
  sp.apps = {"a", "b"};
  CHECK(sp.size() == 5 * 27 * 2);
  for (std::size_t i = 0; i < sp.size(); ++i) CHECK(sp.index(sp.at(i)) == i);
}

TEST_CASE("epsilon-greedy") {
  QTable t(1, 6, Hyper{});
  t.set(0, 3, 1.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(choose_action(t, 0, 0.0, rng) == 3);

  SUBCASE("ties go to the lowest index") {
    QTable z(1, 4, Hyper{});
    CHECK(z.greedy(0) == 0);
    z.set(0, 2, 0.5);
    z.set(0, 3, 0.5);
    CHECK(z.greedy(0) == 2);
  }

  SUBCASE("epsilon 1 is uniform") {
    std::vector<int> counts(6, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[choose_action(t, 0, 1.0, rng)];
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
    CHECK(chi2 < 20.52);  // 5 degrees of freedom, p = 0.001
  }
}

TEST_CASE("q update examples") {
  SUBCASE("alpha 0 leaves the table unchanged") {
    Hyper h;
    h.alpha = 0.0;
    QTable t(3, 2, h);
    t.set(0, 1, -0.7);
    const auto before = t.value(0, 1);
    t.update(0, 1, -5.0, 2);
    CHECK(t.value(0, 1) == before);
  }
  SUBCASE("one step by hand") {
    Hyper h;
    h.alpha = 0.5;
    h.gamma = 0.9;
    QTable t(2, 2, h);
    t.update(0, 0, -2.0, 1);
    CHECK(t.value(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
    t.set(1, 1, -4.0);
    t.set(1, 0, -3.0);
    t.update(0, 0, -2.0, 1);
    // -1 + 0.5 * (-2 + 0.9 * -3 - -1)
    CHECK(t.value(0, 0) == doctest::Approx(-2.85).epsilon(1e-12));
  }
  SUBCASE("self loop converges to r / (1 - gamma)") {
    Hyper h;
    h.alpha = 0.2;
    h.gamma = 0.3;
    QTable t(1, 1, h);
    for (int i = 0; i < 2000; ++i) t.update(0, 0, -1.0, 0);
    CHECK(t.value(0, 0) == doctest::Approx(-1.0 / 0.7).epsilon(1e-9));
  }
  SUBCASE("gamma 0 with alpha 1 keeps the last reward") {
    Hyper h;
    h.alpha = 1.0;
    h.gamma = 0.0;
    QTable t(2, 2, h);
    t.set(1, 0, 100.0);
    for (double r : {-3.0, -1.5, -7.25}) {
      t.update(0, 1, r, 1);
      CHECK(t.value(0, 1) == r);
    }
  }
  SUBCASE("visit step is a running mean") {
    Hyper h;
    h.alpha = 0.01;
    h.gamma = 0.0;
    h.visit_alpha = true;
    QTable t(1, 1, h);
    const std::vector<double> r = {-1.0, -2.0, -6.0, -3.0};
    for (double x : r) t.update_terminal(0, 0, x);
    CHECK(t.value(0, 0) == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(t.visits(0, 0) == 4);
  }
  SUBCASE("update touches only its own cell") {
    Hyper h;
    QTable t(4, 3, h);
    Rng rng(3);
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < 3; ++a) t.set(s, a, rng.uniform(-2, 0));
    const QTable before = t;
    t.update(2, 1, -1.0, 3);
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < 3; ++a)
        if (s != 2 || a != 1) CHECK(t.value(s, a) == before.value(s, a));
    CHECK(t.value(2, 1) != before.value(2, 1));
  }
}

TEST_CASE("hyperparameter validation and epsilon schedule") {
  Hyper h;
  CHECK_NOTHROW(h.validate());
  h.alpha = 0.0;
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
  h = Hyper{};
  h.gamma = 1.0;
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
  h = Hyper{};
  CHECK(h.epsilon(0, 100) == 1.0);
  CHECK(h.epsilon(99, 100) == doctest::Approx(0.05).epsilon(1e-12));
  for (std::size_t e = 1; e < 100; ++e) CHECK(h.epsilon(e, 100) < h.epsilon(e - 1, 100));
  CHECK_THROWS_AS(QTable(0, 3, Hyper{}), InvalidArgument);
}

TEST_CASE("single-state bandit picks the best arm") {
  Hyper h;
  h.gamma = 0.0;
  h.visit_alpha = true;
  QTable t(1, 4, h);
  Rng rng(9);
  const std::vector<double> mean = {-0.5, -0.2, -0.3, -0.9};
  for (int i = 0; i < 4000; ++i) {
    const auto a = choose_action(t, 0, h.epsilon(static_cast<std::size_t>(i), 4000), rng);
    t.update_terminal(0, a, mean[a] + rng.normal(0.0, 0.05));
  }
  CHECK(t.greedy(0) == 1);
}

TEST_CASE("agent rewards are non-positive and training is reproducible") {
  const auto base = default_orchestration_config();
  TrainConfig tc;
  tc.episodes = 40;
  tc.episode_s = 20;
  const auto a = train(base, tc, 17);
  const auto b = train(base, tc, 17);
  CHECK(a.table.serialize() == b.table.serialize());
  CHECK(a.curve == b.curve);
  const auto c = train(base, tc, 18);
  CHECK(a.table.serialize() != c.table.serialize());
  for (std::size_t s = 0; s < a.table.states(); ++s)
    for (std::size_t act = 0; act < a.table.actions(); ++act) CHECK(a.table.value(s, act) <= 0.0);
  CHECK(a.curve.size() == 40);
  CHECK(a.curve_users[0] == 1);
  CHECK(a.curve_users[6] == 2);
  CHECK(action_names(a.actions, base.topology).size() == a.actions.size());

  TrainConfig bad = tc;
  bad.episodes = 0;
  CHECK_THROWS_AS(train(base, bad, 1), InvalidArgument);
  bad = tc;
  bad.space.apps = {"other"};
  CHECK_THROWS_AS(train(base, bad, 1), InvalidArgument);
}

TEST_CASE("greedy policy matches the rollout oracle on a frozen environment") {
  const FrozenEnvironment env(default_orchestration_config());
  CHECK(env.states() <= 50);
  Hyper h;
  h.alpha = 0.01;
  h.gamma = 0.0;
  h.visit_alpha = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto fc = check_frozen(env, h, 30000, 100, 30, seed);
    CAPTURE(seed);
    CHECK(fc.well_visited >= 20);
    CHECK(fc.match_rate() >= 0.95);
  }
}

TEST_CASE("rollouts are seeded") {
  const FrozenEnvironment env(default_orchestration_config());
  CHECK(env.rollout(5, 2, 11) == env.rollout(5, 2, 11));
  CHECK(env.rollout(5, 2, 11) < 0.0);
}

TEST_CASE("user sweep: RL against static strategies") {
  const auto base = default_orchestration_config();
  TrainConfig tc;
  const auto trained = train(base, tc, 3);
  const auto rows = user_sweep(base, trained, tc.space, 8, 120, 5, 1);
  std::map<int, std::map<std::string, double>> r;
  for (const auto& row : rows) r[row.users][row.policy] = row.mean_response_s;
  REQUIRE(r.size() == 5);
  for (const auto& [users, byp] : r) {
    double best = 1e300;
    for (const auto& p : sweep_static_policies()) best = std::min(best, byp.at(p));
    CAPTURE(users);
    CHECK(byp.at("rl") <= best * 1.05);
  }
  CHECK(std::abs(r[2]["rl"] / r[1]["rl"] - 1.0) <= 0.02);
  const auto again = user_sweep(base, trained, tc.space, 8, 120, 5, 2);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].mean_response_s == rows[i].mean_response_s);
}
