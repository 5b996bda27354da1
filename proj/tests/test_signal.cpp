#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "ehsim/common/error.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/signal/hrv.hpp"
#include "ehsim/signal/io.hpp"
#include "ehsim/signal/quality.hpp"
#include "ehsim/signal/synth.hpp"

using namespace ehsim;
using namespace ehsim::signal;

namespace {

// Independent power-ratio oracle on the emitted arrays.
double realized_snr(const Signal& s) {
  const auto& c = s.truth.clean_samples;
  double mc = 0.0, mn = 0.0;
  const double n = static_cast<double>(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    mc += c[i];
    mn += s.samples[i] - c[i];
  }
  mc /= n;
  mn /= n;
  double pc = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    pc += (c[i] - mc) * (c[i] - mc);
    const double e = s.samples[i] - c[i] - mn;
    pn += e * e;
  }
  return 10.0 * std::log10(pc / pn);
}

NoiseSpec wander(double snr) { return {NoiseKind::kWander, snr, 0.0, 0.0}; }

std::vector<double> within(const std::vector<double>& t, double lo, double hi) {
  std::vector<double> out;
  for (double v : t)
    if (v >= lo && v <= hi) out.push_back(v);
  return out;
}

const std::vector<ModalityId> kAll = {ModalityId::ecg(), ModalityId::eda(), ModalityId::ppg(),
                                      ModalityId::acc(), ModalityId::rr()};

}  // namespace

TEST_CASE("window length follows rate times duration") {
  const auto s = generate_window(ModalityId::ppg(), 0, 60.0, 7);
  CHECK(s.samples.size() == 3840);
  CHECK(s.sampling_rate_hz == 64.0);
  CHECK(s.duration_s() == 60.0);
  CHECK(s.truth.true_snr_db == kSnrCeilingDb);
  CHECK_FALSE(s.truth.true_peak_times_s.empty());
  CHECK(std::is_sorted(s.truth.true_peak_times_s.begin(), s.truth.true_peak_times_s.end()));
}

TEST_CASE("generator preconditions") {
  CHECK_THROWS_AS(generate_window(ModalityId::eda(), 0, 0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(generate_window(ModalityId::eda(), 0, -1.0, 1), InvalidArgument);
  CHECK_THROWS_AS(generate_window(ModalityId::eda(), 2, 60.0, 1), InvalidArgument);
  CHECK_THROWS_AS(generate_window(ModalityId("sEMG"), 0, 60.0, 1), InvalidArgument);
  CHECK_THROWS_AS(generate_window(ModalityId::ecg(), 0, 0.001, 1), InvalidArgument);
}

TEST_CASE("generation is bit-identical for identical inputs") {
  for (const auto& m : kAll) {
    const auto a = generate_window(m, 1, 30.0, 99);
    const auto b = generate_window(m, 1, 30.0, 99);
    CHECK(a.samples == b.samples);
    const auto c = generate_window(m, 1, 30.0, 100);
    CHECK(a.samples != c.samples);
    const auto na = inject_noise(a, wander(10.0), 5);
    const auto nb = inject_noise(b, wander(10.0), 5);
    CHECK(na.samples == nb.samples);
  }
}

TEST_CASE("kind none is the identity") {
  const auto s = generate_window(ModalityId::ecg(), 0, 60.0, 3);
  const auto n = inject_noise(s, NoiseSpec{}, 11);
  CHECK(n.samples == s.samples);
  CHECK(n.truth.true_snr_db == kSnrCeilingDb);
  CHECK(n.truth.injected_noise_power == 0.0);
}

TEST_CASE("SNR closure holds for wander on every modality") {
  Rng r(2024);
  for (int i = 0; i < 200; ++i) {
    const auto& m = kAll[static_cast<std::size_t>(i) % kAll.size()];
    const double target = r.uniform(-5.0, 40.0);
    const auto s = generate_window(m, i % 2, 60.0, 1000 + static_cast<std::uint64_t>(i));
    const auto n = inject_noise(s, wander(target), 77 + static_cast<std::uint64_t>(i));
    CHECK(n.truth.clean_samples == s.samples);
    CHECK(std::abs(realized_snr(n) - target) <= 0.01);
    CHECK(std::abs(n.truth.true_snr_db - target) <= 0.01);
  }
}

TEST_CASE("artifact truth matches the stored arrays") {
  const auto s = generate_window(ModalityId::ppg(), 0, 60.0, 8);
  const auto n = inject_noise(s, {NoiseKind::kWanderArtifact, 20.0, 5.0, 5.0}, 9);
  REQUIRE(n.truth.artifact_s.has_value());
  CHECK(n.truth.artifact_s->second - n.truth.artifact_s->first == doctest::Approx(5.0));
  const double oracle = realized_snr(n);
  CHECK(std::abs(n.truth.true_snr_db - oracle) <= 1e-9 * std::abs(oracle));
  CHECK(n.truth.true_snr_db < 20.0);
  CHECK_THROWS_AS(inject_noise(s, {NoiseKind::kWanderArtifact, 20.0, 61.0, 5.0}, 9),
                  InvalidArgument);
  CHECK_THROWS_AS(inject_noise(s, {NoiseKind::kWander, INFINITY, 0.0, 0.0}, 9), InvalidArgument);
}

TEST_CASE("estimator examples") {
  const auto s = generate_window(ModalityId::ecg(), 0, 60.0, 21);
  CHECK(estimate_snr(s) >= 30.0);
  CHECK(std::abs(estimate_snr(inject_noise(s, wander(0.0), 1))) <= 1.0);
  CHECK(std::abs(estimate_snr(inject_noise(s, wander(20.0), 1)) - 20.0) <= 1.0);
  auto shortw = generate_window(ModalityId::ecg(), 0, 0.5, 21);
  CHECK_THROWS_AS(estimate_snr(shortw), InvalidArgument);
}

TEST_CASE("estimator within 1 dB over 500 windows, all modalities") {
  Rng r(555);
  int worst_index = -1;
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const auto& m = kAll[static_cast<std::size_t>(i) % kAll.size()];
    const double target = r.uniform(-5.0, 30.0);
    const auto s = generate_window(m, i % 2, 60.0, 5000 + static_cast<std::uint64_t>(i));
    const auto n = inject_noise(s, wander(target), 9000 + static_cast<std::uint64_t>(i));
    const double err = std::abs(estimate_snr(n) - n.truth.true_snr_db);
    if (err > worst) {
      worst = err;
      worst_index = i;
    }
  }
  INFO("worst window " << worst_index);
  CHECK(worst <= 1.0);
}

TEST_CASE("label thresholds and hysteresis") {
  QualityThresholds th;
  CHECK(label_for(16.0, th) == QualityLabel::kReliable);
  CHECK(label_for(10.0, th) == QualityLabel::kNoisy);
  CHECK(label_for(3.0, th) == QualityLabel::kUnreliable);
  CHECK(label_for(14.5, th) == QualityLabel::kNoisy);
  CHECK(label_for(14.5, th, QualityLabel::kReliable) == QualityLabel::kReliable);
  CHECK(label_for(15.5, th, QualityLabel::kNoisy) == QualityLabel::kNoisy);
  CHECK(label_for(15.5, th, QualityLabel::kUnreliable) == QualityLabel::kNoisy);
  CHECK(label_for(4.5, th, QualityLabel::kNoisy) == QualityLabel::kNoisy);
  CHECK(label_for(5.5, th, QualityLabel::kUnreliable) == QualityLabel::kUnreliable);
  CHECK(label_for(16.0, th, QualityLabel::kUnreliable) == QualityLabel::kReliable);
  CHECK_THROWS_AS(label_for(10.0, {5.0, 15.0, 1.0}), InvalidArgument);
}

TEST_CASE("labels are monotone in SNR without hysteresis") {
  QualityThresholds th{15.0, 5.0, 0.0};
  int prev = -1;
  for (double snr = -60.0; snr <= 60.0; snr += 0.01) {
    const int cur = static_cast<int>(label_for(snr, th));
    CHECK(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("assess_modalities on scenarios") {
  const std::vector<ModalityId> mods = {ModalityId::ecg(), ModalityId::eda(), ModalityId::ppg()};
  auto build = [&](ScenarioId id, std::uint64_t seed) {
    const auto sc = default_scenario(id, mods);
    sc.validate();
    std::map<ModalityId, Signal> sig;
    for (const auto& m : mods)
      sig[m] = inject_noise(generate_window(m, 0, 60.0, seed), sc.per_modality.at(m), seed + 1);
    return sig;
  };
  QualityThresholds th;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s1 = assess_modalities(build(ScenarioId::kS1, seed), th);
    for (const auto& m : mods) CHECK(s1.label(m) == QualityLabel::kReliable);
    const auto s3 = assess_modalities(build(ScenarioId::kS3, seed), th);
    CHECK(s3.entries.at(ModalityId::ecg()).estimated_snr_db < th.noisy_db);
    CHECK(s3.label(ModalityId::ecg()) != QualityLabel::kReliable);
    CHECK(s3.label(ModalityId::eda()) == QualityLabel::kReliable);
    CHECK(s3.label(ModalityId::ppg()) == QualityLabel::kReliable);
  }
  std::map<ModalityId, Signal> flat;
  auto z = generate_window(ModalityId::ecg(), 0, 60.0, 1);
  std::fill(z.samples.begin(), z.samples.end(), 0.0);
  flat[ModalityId::ecg()] = z;
  const auto rep = assess_modalities(flat, th);
  CHECK(rep.entries.at(ModalityId::ecg()).detached);
  CHECK(rep.label(ModalityId::ecg()) == QualityLabel::kUnreliable);
  CHECK_THROWS_AS(assess_modalities({}, th), InvalidArgument);
}

TEST_CASE("scenario validation") {
  const std::vector<ModalityId> mods = {ModalityId::ecg(), ModalityId::eda(), ModalityId::ppg()};
  for (auto id : kAllScenarios) CHECK_NOTHROW(default_scenario(id, mods).validate());
  auto bad = default_scenario(ScenarioId::kS3, mods);
  bad.per_modality[ModalityId::eda()] = bad.per_modality[ModalityId::ecg()];
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  auto s2 = default_scenario(ScenarioId::kS2, mods);
  s2.id = ScenarioId::kS1;
  CHECK_THROWS_AS(s2.validate(), InvalidArgument);
}

TEST_CASE("peak detector F1 on clean windows") {
  for (const auto& m : {ModalityId::ecg(), ModalityId::ppg()}) {
    PeakMatch total;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto s = generate_window(m, static_cast<int>(seed % 2), 60.0, 300 + seed);
      const double margin = 2.0 / s.sampling_rate_hz;
      const auto det = within(detect_peaks(s), margin, s.duration_s() - margin);
      const auto pm = match_peaks(det, s.truth.true_peak_times_s, 1.0 / s.sampling_rate_hz);
      total.true_positive += pm.true_positive;
      total.false_positive += pm.false_positive;
      total.false_negative += pm.false_negative;
    }
    INFO(m.key() << " tp=" << total.true_positive << " fp=" << total.false_positive
                 << " fn=" << total.false_negative);
    CHECK(total.f1() >= 0.99);
  }
}

TEST_CASE("clean 60 s PPG at 75 bpm gives 75 +- 1 peaks") {
  SynthConfig cfg;
  cfg.variability = 0.0;
  const auto s = generate_window(ModalityId::ppg(), 0, 60.0, 4, cfg);
  const auto n = detect_peaks(s).size();
  CHECK(n >= 74);
  CHECK(n <= 76);
}

TEST_CASE("refractory period merges close peaks") {
  const double fs = 100.0;
  std::vector<double> x(300, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / fs;
    x[i] = std::exp(-0.5 * std::pow((t - 1.0) / 0.02, 2)) +
           0.9 * std::exp(-0.5 * std::pow((t - 1.2) / 0.02, 2));
  }
  const auto p = detect_peaks(x, fs);
  REQUIRE(p.size() == 1);
  CHECK(p[0] == doctest::Approx(1.0).epsilon(0.01));
  CHECK_THROWS_AS(detect_peaks(generate_window(ModalityId::eda(), 0, 10.0, 1)), InvalidArgument);
}

TEST_CASE("artifact corrupts peaks inside its segment only") {
  int differing = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = generate_window(ModalityId::ppg(), 0, 60.0, 40 + seed);
    const auto n = inject_noise(s, {NoiseKind::kWanderArtifact, 30.0, 5.0, 5.0}, 80 + seed);
    const auto [a, b] = *n.truth.artifact_s;
    const auto det = detect_peaks(n);
    const auto& truth = s.truth.true_peak_times_s;
    if (det.size() != truth.size()) ++differing;
    // Outside the segment plus the detector's local window, peaks match.
    const double guard = PeakDetectorConfig{}.window_s + 0.5;
    auto outside = [&](const std::vector<double>& t) {
      std::vector<double> o;
      for (double v : t)
        if ((v < a - guard || v > b + guard) && v >= 2.0 / 64 && v <= 60.0 - 2.0 / 64) o.push_back(v);
      return o;
    };
    const auto pm = match_peaks(outside(det), outside(truth), 1.0 / 64.0);
    CHECK(pm.false_positive == 0);
    CHECK(pm.false_negative == 0);
  }
  CHECK(differing == 20);
}

TEST_CASE("RMSSD oracles") {
  const std::vector<double> hand = {0.0, 0.8, 1.7, 2.5};
  CHECK(std::abs(compute_rmssd(hand) - 100.0) <= 1e-9);
  const std::vector<double> regular = {0.0, 0.75, 1.5, 2.25, 3.0};
  CHECK(compute_rmssd(regular) == doctest::Approx(0.0).epsilon(1e-12));
  const std::vector<double> two = {0.0, 1.0};
  CHECK_THROWS_AS(compute_rmssd(two), InvalidArgument);
}

TEST_CASE("RMSSD from an artifact window is flagged unreliable") {
  const std::vector<ModalityId> mods = {ModalityId::ppg()};
  const auto s = generate_window(ModalityId::ppg(), 0, 60.0, 12);
  const auto n = inject_noise(s, {NoiseKind::kWanderArtifact, 20.0, 5.0, 5.0}, 13);
  std::map<ModalityId, Signal> in{{ModalityId::ppg(), n}};
  const auto rep = assess_modalities(in, QualityThresholds{});
  const auto res = assess_rmssd(detect_peaks(n), rep.label(ModalityId::ppg()));
  CHECK_FALSE(res.reliable);
  std::map<ModalityId, Signal> clean{{ModalityId::ppg(), s}};
  const auto ok = assess_rmssd(detect_peaks(s), assess_modalities(clean, {}).label(ModalityId::ppg()));
  CHECK(ok.reliable);
}

TEST_CASE("downsampling halves length and keeps wander SNR") {
  const auto s = generate_window(ModalityId::ecg(), 0, 60.0, 5);
  const auto n = inject_noise(s, wander(12.0), 6);
  const auto h = downsample(n, 2);
  CHECK(h.samples.size() == 3000);
  CHECK(h.sampling_rate_hz == 50.0);
  CHECK(std::abs(h.truth.true_snr_db - 12.0) < 0.2);
  CHECK(std::abs(estimate_snr(h) - h.truth.true_snr_db) < 1.0);
  CHECK_THROWS_AS(downsample(n, 0), InvalidArgument);
}

TEST_CASE("signal io round trips") {
  const auto dir = std::filesystem::temp_directory_path() / "ehsim_test_signal";
  std::filesystem::create_directories(dir);
  const auto s = generate_window(ModalityId::eda(), 1, 30.0, 5);
  write_signal_csv(dir / "eda.csv", s);
  const auto back = read_signal_csv(dir / "eda.csv", ModalityId::eda());
  CHECK(back.samples == s.samples);
  CHECK(back.sampling_rate_hz == doctest::Approx(4.0));
  const auto p = generate_window(ModalityId::ppg(), 0, 10.0, 5);
  write_signal_bin(dir / "all.bin", {s, p});
  const auto bin = read_signal_bin(dir / "all.bin");
  REQUIRE(bin.size() == 2);
  CHECK(bin[1].modality == ModalityId::ppg());
  CHECK(bin[1].samples == p.samples);
}
