#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ehsim/amser/amser.hpp"
#include "ehsim/common/error.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/signal/synth.hpp"

using namespace ehsim;
using namespace ehsim::amser;
using signal::QualityLabel;

namespace {

const std::vector<ModalityId> kMods = {ModalityId::ecg(), ModalityId::eda(), ModalityId::ppg()};

const pool::Pool& default_pool() {
  static const pool::Pool p = [] {
    pool::DatasetSpec spec;
    spec.windows = 300;
    const auto d = pool::make_dataset(spec, 21);
    return pool::train_pool(d, pool::default_keys(kMods), pool::Family::kNearestCentroid, 21);
  }();
  return p;
}

signal::QualityReport report(QualityLabel ecg, QualityLabel eda, QualityLabel ppg) {
  signal::QualityReport r;
  r.entries[ModalityId::ecg()].label = ecg;
  r.entries[ModalityId::eda()].label = eda;
  r.entries[ModalityId::ppg()].label = ppg;
  return r;
}

}  // namespace

TEST_CASE("plan selection examples") {
  const auto& pool = default_pool();
  const auto rel = QualityLabel::kReliable, noisy = QualityLabel::kNoisy, bad = QualityLabel::kUnreliable;

  const auto all = select_plan(report(rel, rel, rel), pool);
  CHECK(all.compute.model_key.str() == "ECG:52+EDA:42+PPG:42");
  CHECK(all.compute.features.modalities.size() == 3);
  CHECK(all.sensing.sensors.at(ModalityId::ecg()).sampling_rate_hz == 100.0);
  std::size_t total = 0;
  for (const auto& [m, plan] : all.compute.features.modalities) total += plan.k;
  CHECK(total == 136);

  const auto n = select_plan(report(noisy, rel, rel), pool);
  CHECK(n.sensing.sensors.at(ModalityId::ecg()).sampling_rate_hz == 50.0);
  CHECK(n.compute.features.modalities.at(ModalityId::ecg()).k == 12);
  CHECK(n.compute.model_key.str() == "ECG_half:12+EDA:42+PPG:42");

  const auto u = select_plan(report(bad, rel, rel), pool);
  CHECK_FALSE(u.sensing.sensors.at(ModalityId::ecg()).enabled);
  CHECK(u.compute.model_key.str() == "EDA:42+PPG:42");

  CHECK_THROWS_AS(select_plan(report(bad, bad, bad), pool), InvalidArgument);
  CHECK_THROWS_AS(select_plan(report(rel, rel, rel), pool::Pool{}), InvalidArgument);

  pool::Pool partial = pool;
  partial.models.erase(u.compute.model_key.str());
  CHECK_THROWS_AS(select_plan(report(bad, rel, rel), partial), InvalidArgument);
}

TEST_CASE("every reachable label combination has a pool entry") {
  const auto& pool = default_pool();
  const QualityLabel labels[] = {QualityLabel::kUnreliable, QualityLabel::kNoisy, QualityLabel::kReliable};
  int checked = 0;
  for (auto a : labels)
    for (auto b : labels)
      for (auto c : labels) {
        const auto r = report(a, b, c);
        if (a == QualityLabel::kUnreliable && b == a && c == a) continue;
        const auto d = select_plan(r, pool);
        CHECK(pool.find(d.compute.model_key) != nullptr);
        CHECK_NOTHROW(d.sensing.validate());
        ++checked;
      }
  CHECK(checked == 26);
}

TEST_CASE("data volume examples") {
  const auto& pool = default_pool();
  const auto base = baseline_plan(kMods, pool);
  CHECK(data_volume(base.sensing, 60.0, 2) == 20160);
  const auto drop = select_plan(report(QualityLabel::kUnreliable, QualityLabel::kReliable, QualityLabel::kReliable), pool);
  CHECK(data_volume(drop.sensing, 60.0, 2) == 8160);
  CHECK(20160.0 / 8160.0 == doctest::Approx(2.4706).epsilon(1e-4));
  CHECK_THROWS_AS(data_volume(base.sensing, 0.0, 2), InvalidArgument);
}

TEST_CASE("data volume matches the formula on random configurations") {
  Rng rng(77);
  const double nominal[] = {100.0, 4.0, 64.0};
  const double divisors[] = {1.0, 2.0, 4.0};
  for (int trial = 0; trial < 1000; ++trial) {
    SensingConfig c;
    std::uint64_t expected = 0;
    const double window = 1.0 + static_cast<double>(rng.below(120));
    const int bytes = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < 3; ++i) {
      const bool on = rng.below(3) != 0;
      const double rate = nominal[i] / divisors[rng.below(3)];
      c.sensors[kMods[i]] = {on, rate};
      // Every allowed rate times an integer window is an exact multiple of 1/4.
      if (on) expected += static_cast<std::uint64_t>(std::llround(std::floor(rate * window))) * bytes;
    }
    CHECK(data_volume(c, window, bytes) == expected);
  }
}

TEST_CASE("disabling a modality strictly increases data reduction") {
  const auto& pool = default_pool();
  const auto base = baseline_plan(kMods, pool);
  const double base_bytes = static_cast<double>(data_volume(base.sensing, 60.0, 2));
  const QualityLabel labels[] = {QualityLabel::kNoisy, QualityLabel::kReliable};
  for (auto a : labels)
    for (auto b : labels)
      for (auto c : labels) {
        const QualityLabel in[] = {a, b, c};
        const auto keep = select_plan(report(a, b, c), pool);
        const double r_keep = base_bytes / static_cast<double>(data_volume(keep.sensing, 60.0, 2));
        for (int drop = 0; drop < 3; ++drop) {
          QualityLabel x[] = {in[0], in[1], in[2]};
          x[drop] = QualityLabel::kUnreliable;
          const auto d = select_plan(report(x[0], x[1], x[2]), pool);
          CHECK(base_bytes / static_cast<double>(data_volume(d.sensing, 60.0, 2)) > r_keep);
        }
      }
}

TEST_CASE("sensing config validation") {
  SensingConfig c;
  c.sensors[ModalityId::ecg()] = {true, 30.0};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.sensors[ModalityId::ecg()] = {false, 100.0};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.sensors[ModalityId::eda()] = {true, 1.0};
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("S1 runs are identical to the baseline window by window") {
  RunConfig cfg;
  cfg.seeds = 3;
  cfg.windows_per_seed = 8;
  const auto s1 = signal::default_scenario(signal::ScenarioId::kS1, kMods);
  const auto r = run_scenario(s1, default_pool(), cfg, 5);
  REQUIRE(r.amser.windows.size() == 24);
  REQUIRE(r.baseline.windows.size() == 24);
  for (std::size_t i = 0; i < 24; ++i) {
    const auto& a = r.amser.windows[i].prediction;
    const auto& b = r.baseline.windows[i].prediction;
    CHECK(a.label == b.label);
    CHECK(a.confidence == b.confidence);
    CHECK(a.model_key == b.model_key);
  }
  CHECK(r.amser.accuracy == r.baseline.accuracy);
  CHECK(r.amser.speedup_vs_baseline == 1.0);
  CHECK(r.amser.data_reduction_vs_baseline == 1.0);
  CHECK(r.baseline.speedup_vs_baseline == 1.0);
  CHECK(r.gain == 0.0);
}

TEST_CASE("artifact scenario drops the weak modality") {
  RunConfig cfg;
  cfg.seeds = 2;
  cfg.windows_per_seed = 6;
  const auto s3 = signal::default_scenario(signal::ScenarioId::kS3, kMods);
  const auto r = run_scenario(s3, default_pool(), cfg, 6);
  for (const auto& w : r.amser.windows) {
    CHECK(w.labels.find("ECG=Unreliable") != std::string::npos);
    CHECK(w.data_bytes == 8160);
  }
  CHECK(r.amser.data_reduction_vs_baseline == doctest::Approx(20160.0 / 8160.0));
  CHECK(r.amser.speedup_vs_baseline > 1.0);
  // Same seed, same outcome.
  const auto again = run_scenario(s3, default_pool(), cfg, 6);
  CHECK(again.amser.accuracy == r.amser.accuracy);
  CHECK(again.baseline.latency_s == r.baseline.latency_s);
}

TEST_CASE("bootstrap interval") {
  const std::vector<double> flat(20, 0.3);
  const auto i = bootstrap_mean(flat, 500, 0.95, 1);
  CHECK(i.lo == doctest::Approx(0.3));
  CHECK(i.hi == doctest::Approx(0.3));
  std::vector<double> v;
  for (int k = 0; k < 40; ++k) v.push_back(k % 2 ? 1.0 : 0.0);
  const auto j = bootstrap_mean(v, 2000, 0.95, 2);
  CHECK(j.lo < 0.5);
  CHECK(j.hi > 0.5);
  CHECK(j.lo > 0.3);
  CHECK_THROWS_AS(bootstrap_mean({}, 10, 0.95, 1), InvalidArgument);
}
