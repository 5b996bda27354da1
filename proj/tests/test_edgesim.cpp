#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ehsim/common/error.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/edgesim/calibrate.hpp"
#include "ehsim/edgesim/sim.hpp"

using namespace ehsim;
using namespace ehsim::edgesim;

namespace {

Topology three_layers(Rng& rng) {
  Topology t;
  t.nodes = {{LayerKind::kDevice, rng.uniform(50, 500), rng.uniform(0, 5), true},
             {LayerKind::kEdge, rng.uniform(500, 5000), rng.uniform(0, 5), false},
             {LayerKind::kCloud, rng.uniform(5000, 50000), rng.uniform(0, 5), false}};
  for (int i = 0; i < 2; ++i) {
    const double lo = rng.uniform(0.5, 10);
    t.links.push_back({{lo, lo * rng.uniform(2, 20), lo * rng.uniform(40, 200)}, rng.uniform(0, 30),
                       rng.uniform(0, 2)});
  }
  return t;
}

PipelineSpec random_pipeline(Rng& rng, std::size_t stages) {
  PipelineSpec p;
  p.app = "custom";
  const double in_hi = std::floor(rng.uniform(1e3, 2e6));
  p.input_bytes = {in_hi, std::floor(in_hi * rng.uniform(0.1, 0.9))};
  for (std::size_t k = 0; k < stages; ++k) {
    const double m = rng.uniform(1, 500);
    const double o = std::floor(rng.uniform(0, 5e5));
    p.stages.push_back({"s" + std::to_string(k), {m, m * rng.uniform(0.3, 1.0)}, {o, std::floor(o * 0.5)}});
  }
  return p;
}

// Brute force: every tuple of layer indices, kept when non-decreasing.
std::size_t monotone_count(std::size_t stages, std::size_t layers) {
  std::size_t total = 1, count = 0;
  for (std::size_t i = 0; i < stages; ++i) total *= layers;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    int prev = -1;
    bool ok = true;
    for (std::size_t i = 0; i < stages; ++i) {
      const int v = static_cast<int>(c % layers);
      c /= layers;
      if (v < prev) ok = false;
      prev = v;
    }
    if (ok) ++count;
  }
  return count;
}

class FixedPolicy : public Policy {
 public:
  explicit FixedPolicy(Placement p) : p_(std::move(p)) {}
  Placement choose(const Snapshot&, const PipelineSpec&) override { return p_; }

 private:
  Placement p_;
};

SimConfig small_config(int users, const std::string& policy_layer_app = "img") {
  SimConfig c;
  c.topology.nodes = {{LayerKind::kDevice, 500, 2, true}, {LayerKind::kEdge, 4000, 1, false},
                      {LayerKind::kCloud, 16000, 1, false}};
  c.topology.links = {{{20, 100, 200}, 2, 0.5}, {{5, 50, 100}, 20, 1}};
  PipelineSpec p;
  p.app = policy_layer_app;
  p.input_bytes = {600000, 150000};
  p.stages = {{"pre", {20, 5}, {150000, 40000}}, {"infer", {400, 100}, {1000, 1000}}};
  c.pipelines = {p};
  c.users = users;
  c.duration_s = 30;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("analytic latency hand example") {
  Topology t;
  t.nodes = {{LayerKind::kDevice, 1, 0, false}, {LayerKind::kEdge, 10, 0, false}};
  t.links = {{{4, 8, 16}, 0, 0}};
  PipelineSpec p;
  p.app = "x";
  p.input_bytes = {1000000, 500000};
  p.stages = {{"only", {10, 10}, {0, 0}}};
  CHECK(analytic_latency(p, {1}, BandwidthTier::kMedium, SamplingLevel::kHigh, t) == doctest::Approx(2.0));
  CHECK(analytic_latency(p, {0}, BandwidthTier::kMedium, SamplingLevel::kHigh, t) == doctest::Approx(10.0));
  CHECK_THROWS_AS(analytic_latency(p, {2}, BandwidthTier::kMedium, SamplingLevel::kHigh, t), InvalidArgument);
  p.stages.push_back({"two", {1, 1}, {0, 0}});
  CHECK_THROWS_AS(analytic_latency(p, {1, 0}, BandwidthTier::kLow, SamplingLevel::kHigh, t), InvalidArgument);
}

TEST_CASE("placement enumeration matches brute force") {
  CHECK(enumerate_placements(3, 2).size() == 4);
  CHECK(enumerate_placements(3, 3).size() == 10);
  CHECK(enumerate_placements(1, 3).size() == 3);
  for (std::size_t s = 1; s <= 5; ++s)
    for (std::size_t l = 1; l <= 4; ++l) {
      const auto all = enumerate_placements(s, l);
      CHECK(all.size() == monotone_count(s, l));
      for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1] < all[i]);
    }
}

TEST_CASE("latency monotonicity properties") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto topo = three_layers(rng);
    const auto pipe = random_pipeline(rng, 1 + rng.below(4));
    for (const auto& pl : enumerate_placements(pipe.stages.size(), 3)) {
      double by_tier[3];
      for (int b = 0; b < 3; ++b)
        by_tier[b] = analytic_latency(pipe, pl, static_cast<BandwidthTier>(b), SamplingLevel::kHigh, topo);
      const auto bytes = crossing_bytes(pipe, pl, SamplingLevel::kHigh, 3);
      if (pl.back() == 0) {
        CHECK(by_tier[0] == by_tier[1]);
        CHECK(by_tier[1] == by_tier[2]);
      } else if (bytes[0] + bytes[1] > 0) {
        CHECK(by_tier[0] > by_tier[1]);
        CHECK(by_tier[1] > by_tier[2]);
      }
      for (auto tier : kAllTiers)
        CHECK(analytic_latency(pipe, pl, tier, SamplingLevel::kHigh, topo) >=
              analytic_latency(pipe, pl, tier, SamplingLevel::kLow, topo));
    }
  }
}

TEST_CASE("contention-free simulation equals the analytic latency") {
  Rng rng(11);
  std::size_t checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    SimConfig c;
    c.topology = three_layers(rng);
    c.pipelines = {random_pipeline(rng, 1 + rng.below(4))};
    c.sampling = rng.below(2) ? SamplingLevel::kHigh : SamplingLevel::kLow;
    c.tier = static_cast<BandwidthTier>(rng.below(3));
    const auto all = enumerate_placements(c.pipelines[0].stages.size(), 3);
    const auto pl = all[rng.below(all.size())];
    const double expected = analytic_latency(c.pipelines[0], pl, c.tier, c.sampling, c.topology);
    c.arrival.period_s = expected * 3 + 1;
    c.arrival.jitter = 0.2;
    c.duration_s = c.arrival.period_s * 3;
    FixedPolicy pol(pl);
    const auto trace = simulate(c, pol, static_cast<std::uint64_t>(trial));
    REQUIRE(trace.requests.size() >= 2);
    for (const auto& r : trace.requests) {
      REQUIRE(r.completed());
      CHECK(std::abs(r.response_time_s() - expected) <= 1e-9);
      CHECK(r.queue_wait == 0);
      ++checked;
    }
  }
  CHECK(checked >= 1000);
}

TEST_CASE("contention raises cloud-only response time") {
  auto one = small_config(1);
  one.tier = BandwidthTier::kLow;
  one.arrival.period_s = 3.0;
  one.duration_s = 60;
  auto five = one;
  five.users = 5;
  StaticPolicy p1("cloud-only", one.topology), p5("cloud-only", five.topology);
  const auto t1 = simulate(one, p1, 4);
  const auto t5 = simulate(five, p5, 4);
  CHECK(t5.mean_response_s() > t1.mean_response_s());
  // One user never waits and matches the no-contention bound.
  const auto bound = analytic_latency(one.pipelines[0], {2, 2}, one.tier, one.sampling, one.topology);
  for (const auto& r : t1.requests) CHECK(std::abs(r.response_time_s() - bound) <= 1e-9);
  for (const auto& r : t5.requests) CHECK(r.response_time_s() >= bound - 1e-9);
}

TEST_CASE("device-only is unaffected by other users") {
  auto c = small_config(5);
  StaticPolicy p("device-only", c.topology);
  const auto t = simulate(c, p, 9);
  const auto bound = analytic_latency(c.pipelines[0], {0, 0}, c.tier, c.sampling, c.topology);
  for (const auto& r : t.requests) CHECK(std::abs(r.response_time_s() - bound) <= 1e-9);
}

TEST_CASE("trace invariants") {
  auto c = small_config(4);
  c.arrival.kind = ArrivalKind::kPoisson;
  c.arrival.period_s = 0.3;
  StaticPolicy p("edge-only", c.topology);
  const auto t = simulate(c, p, 21);
  REQUIRE(!t.requests.empty());
  CHECK(t.completed() == t.requests.size());
  double bytes = 0.0;
  for (const auto& r : t.requests) {
    const auto& pipe = c.pipelines[0];
    CHECK(r.completion - r.arrival >= r.transfer + r.compute);
    CHECK(r.completion - r.arrival == r.transfer + r.compute + r.queue_wait +
                                          to_ticks(c.topology.links[0].propagation_ms * 1e-3));
    for (std::size_t k = 0; k < pipe.stages.size(); ++k) {
      CHECK(r.stage_start[k] >= r.arrival);
      CHECK(r.stage_end[k] > r.stage_start[k]);
      if (k > 0) CHECK(r.stage_start[k] >= r.stage_end[k - 1]);
    }
    const auto cb = crossing_bytes(pipe, r.placement, c.sampling, 3);
    CHECK(r.bytes_moved == cb[0] + cb[1]);
    bytes += r.bytes_moved;
  }
  CHECK(bytes == doctest::Approx(static_cast<double>(t.requests.size()) * 600000.0));
  CHECK(t.last_event >= t.requests.back().completion);

  // The horizon cut leaves late requests in flight rather than dropping them.
  auto cut = c;
  cut.stop_at_horizon = true;
  cut.arrival.period_s = 0.05;
  StaticPolicy pc("edge-only", cut.topology);
  const auto tc = simulate(cut, pc, 21);
  CHECK(tc.completed() < tc.requests.size());
}

TEST_CASE("identical seed gives a byte-identical trace") {
  auto c = small_config(3);
  StaticPolicy p("partial", c.topology);
  const auto dir = std::filesystem::temp_directory_path();
  write_trace_csv(dir / "ehsim_trace_a.csv", simulate(c, p, 5), c.topology);
  write_trace_csv(dir / "ehsim_trace_b.csv", simulate(c, p, 5), c.topology);
  write_trace_csv(dir / "ehsim_trace_c.csv", simulate(c, p, 6), c.topology);
  CHECK(slurp(dir / "ehsim_trace_a.csv") == slurp(dir / "ehsim_trace_b.csv"));
  CHECK(slurp(dir / "ehsim_trace_a.csv") != slurp(dir / "ehsim_trace_c.csv"));
}

TEST_CASE("energy accounting") {
  auto c = small_config(2);
  SUBCASE("zero coefficients") {
    for (auto& n : c.topology.nodes) n.energy_nj_per_mop = 0;
    for (auto& l : c.topology.links) l.tx_energy_nj_per_byte = 0;
    StaticPolicy p("cloud-only", c.topology);
    CHECK(energy_of(simulate(c, p, 1), c).total_nj() == 0.0);
  }
  SUBCASE("fully local has no transmit energy") {
    StaticPolicy p("device-only", c.topology);
    const auto e = energy_of(simulate(c, p, 1), c);
    CHECK(e.tx_total_nj == 0.0);
    CHECK(e.compute_total_nj > 0.0);
  }
  SUBCASE("doubling bytes doubles transmit energy") {
    StaticPolicy p("cloud-only", c.topology);
    const auto t = simulate(c, p, 1);
    auto c2 = c;
    c2.pipelines[0].input_bytes[0] *= 2;
    const auto e1 = energy_of(t, c), e2 = energy_of(t, c2);
    CHECK(e2.tx_total_nj == 2.0 * e1.tx_total_nj);
    CHECK(e2.compute_total_nj == e1.compute_total_nj);
    double sum = 0.0;
    for (const auto& r : t.requests) sum += r.energy_nj;
    CHECK(sum == doctest::Approx(e1.total_nj()).epsilon(1e-12));
  }
}

TEST_CASE("preloaded work delays the next request") {
  auto c = small_config(1);
  c.preload_s[LayerKind::kEdge] = 100.0;
  StaticPolicy p("edge-only", c.topology);
  const auto t = simulate(c, p, 2);
  CHECK(t.requests.front().queue_wait > 0);
  auto bad = c;
  bad.preload_s[LayerKind::kDevice] = 1.0;
  CHECK_THROWS_AS(simulate(bad, p, 2), InvalidArgument);
}

TEST_CASE("policy and config validation") {
  auto c = small_config(1);
  try {
    StaticPolicy p("random", c.topology);
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("device-only, edge-only, cloud-only, partial") != std::string::npos);
  }
  c.duration_s = 0;
  StaticPolicy p("edge-only", c.topology);
  CHECK_THROWS_AS(simulate(c, p, 1), InvalidArgument);
  c = small_config(0);
  CHECK_THROWS_AS(simulate(c, p, 1), InvalidArgument);
  c = small_config(1);
  c.topology.links[0].bandwidth_mbps = {5, 5, 6};
  CHECK_THROWS_AS(simulate(c, p, 1), InvalidArgument);
}

TEST_CASE("calibration recovers a known configuration") {
  auto truth = default_placement_setup();
  set_parameter(truth, "node.1.speed", 7000);
  set_parameter(truth, "link.0.bw.low", 3);
  set_parameter(truth, "link.0.bw.medium", 60);
  set_parameter(truth, "link.0.prop", 4);
  set_parameter(truth, "fall.input.high", 3000000);
  set_parameter(truth, "pain.classify.mops.low", 900);
  set_parameter(truth, "stress.features.out.high", 4000);
  auto targets = reference_latency_targets();
  for (auto& t : targets) {
    const auto& pipe = truth.pipeline(t.app);
    t.latency_s = analytic_latency(pipe, StaticPolicy::placement_for(t.policy, pipe.stages.size(), truth.topology),
                                   t.tier, t.level, truth.topology);
  }
  auto start = truth;
  const auto free = default_free_parameters(targets, start);
  Rng rng(8);
  for (const auto& n : free) {
    double v = get_parameter(start, n) * std::exp(rng.uniform(-0.3, 0.3));
    if (n.find(".input.") != std::string::npos || n.find(".out.") != std::string::npos) v = std::round(v);
    set_parameter(start, n, v);
  }
  CalibrationOptions opt;
  opt.free = free;
  opt.max_sweeps = 3000;
  const auto r = calibrate(targets, start, opt);
  CHECK(r.max_rel_error <= 1e-6);
  CHECK(r.orderings_matched == r.orderings_total);
}

TEST_CASE("calibration with nothing free is plain evaluation") {
  const auto setup = default_placement_setup();
  const auto targets = reference_latency_targets();
  const auto direct = evaluate_fit(targets, setup);
  const auto fit = calibrate(targets, setup, CalibrationOptions{});
  CHECK(fit.loss == direct.loss);
  CHECK(fit.median_rel_error == direct.median_rel_error);
  REQUIRE(fit.points.size() == 54);
  for (std::size_t i = 0; i < 54; ++i) CHECK(fit.points[i].fitted_s == direct.points[i].fitted_s);
  CHECK(fit.sweeps == 0);
}

TEST_CASE("calibration reports infeasible targets") {
  auto targets = reference_latency_targets();
  targets[3].latency_s = -1;
  CalibrationOptions opt;
  opt.free = {"node.1.speed"};
  const auto r = calibrate(targets, default_placement_setup(), opt);
  CHECK_FALSE(r.feasible);
  CHECK_FALSE(r.note.empty());
  CHECK_THROWS_AS(set_parameter(*const_cast<PlacementSetup*>(&r.fitted), "node.9.speed", 1), InvalidArgument);
}

TEST_CASE("reference placement latencies") {
  const auto targets = reference_latency_targets();
  REQUIRE(targets.size() == 54);
  const auto setup = default_placement_setup();
  CalibrationOptions opt;
  opt.free = default_free_parameters(targets, setup);
  const auto a = calibrate(targets, setup, opt);
  CHECK(a.orderings_total == 18);
  CHECK(a.orderings_matched == 18);
  CHECK(a.median_rel_error <= 0.15);
  const auto b = calibrate(targets, setup, opt);
  CHECK(a.loss == b.loss);
  for (const auto& p : a.fitted.pipelines) CHECK_NOTHROW(p.validate());
}
