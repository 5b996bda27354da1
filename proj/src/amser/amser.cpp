#include "ehsim/amser/amser.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "ehsim/common/error.hpp"
#include "ehsim/common/parallel.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/signal/quality.hpp"
#include "ehsim/signal/synth.hpp"

namespace ehsim::amser {

using signal::QualityLabel;

void SensingConfig::validate(const signal::SynthConfig& synth) const {
  bool any = false;
  for (const auto& [m, s] : sensors) {
    if (!s.enabled) continue;
    any = true;
    const double nominal = synth.profile(m).nominal_rate_hz;
    const bool allowed = s.sampling_rate_hz == nominal || s.sampling_rate_hz == nominal / 2.0 ||
                         s.sampling_rate_hz == nominal / 4.0;
    if (!allowed)
      throw InvalidArgument("sampling rate for " + m.key() + " must be nominal, nominal/2 or nominal/4");
  }
  if (!any) throw InvalidArgument("no usable modality: every sensor is disabled");
}

Decision select_plan(const signal::QualityReport& report, const pool::Pool& pool,
                     const signal::SynthConfig& synth) {
  if (pool.models.empty()) throw InvalidArgument("model pool is empty");
  Decision d;
  for (const auto& [m, entry] : report.entries) {
    const double nominal = synth.profile(m).nominal_rate_hz;
    switch (entry.label) {
      case QualityLabel::kUnreliable:
        d.sensing.sensors[m] = {false, nominal};
        break;
      case QualityLabel::kNoisy: {
        d.sensing.sensors[m] = {true, nominal / 2.0};
        const auto& plan = pool.policy.noisy_plan(m);
        d.compute.features.modalities[m] = plan;
        d.compute.model_key.entries.push_back({m, true, plan.k});
        break;
      }
      case QualityLabel::kReliable: {
        d.sensing.sensors[m] = {true, nominal};
        auto plan = features::full_plan(m);
        d.compute.model_key.entries.push_back({m, false, plan.k});
        d.compute.features.modalities[m] = std::move(plan);
        break;
      }
    }
  }
  if (d.compute.model_key.entries.empty())
    throw InvalidArgument("no usable modality: every modality is Unreliable");
  if (pool.find(d.compute.model_key) == nullptr)
    throw InvalidArgument("model pool has no entry for key " + d.compute.model_key.str() +
                          " (pool does not cover this quality combination)");
  return d;
}

Decision baseline_plan(const std::vector<ModalityId>& mods, const pool::Pool& pool,
                       const signal::SynthConfig& synth) {
  signal::QualityReport all_reliable;
  for (const auto& m : mods) all_reliable.entries[m].label = QualityLabel::kReliable;
  return select_plan(all_reliable, pool, synth);
}

std::uint64_t data_volume(const SensingConfig& config, double window_s, int bytes_per_sample) {
  if (!(window_s > 0.0)) throw InvalidArgument("window must be positive");
  if (bytes_per_sample <= 0) throw InvalidArgument("bytes per sample must be positive");
  std::uint64_t total = 0;
  for (const auto& [m, s] : config.sensors) {
    if (!s.enabled) continue;
    const auto samples = static_cast<std::uint64_t>(std::floor(s.sampling_rate_hz * window_s + 1e-9));
    total += samples * static_cast<std::uint64_t>(bytes_per_sample);
  }
  return total;
}

double CostModel::compute_mops(const Decision& d, double window_s, double inference_mops) const {
  double ops = 0.0;
  for (const auto& [m, s] : d.sensing.sensors) {
    if (!s.enabled) continue;
    const double samples = std::floor(s.sampling_rate_hz * window_s + 1e-9);
    const double k = static_cast<double>(d.compute.features.at(m).k);
    ops += samples * (pre_ops_per_sample + feature_ops_per_sample * k);
  }
  return ops * 1e-6 + inference_mops;
}

std::string to_string(Mode m) { return m == Mode::kAmser ? "amser" : "baseline"; }

Interval bootstrap_mean(const std::vector<double>& values, std::size_t resamples, double level,
                        std::uint64_t seed) {
  if (values.empty()) throw InvalidArgument("bootstrap needs at least one value");
  Rng rng(seed);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[rng.below(values.size())];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  auto pick = [&](double q) {
    const auto i = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1) + 0.5));
    return means[std::min(i, resamples - 1)];
  };
  return {pick(tail), pick(1.0 - tail)};
}

namespace {

std::string label_text(const signal::QualityReport& r) {
  std::string out;
  for (const auto& [m, e] : r.entries) {
    if (!out.empty()) out += ';';
    out += m.key() + "=" + signal::to_string(e.label);
  }
  return out;
}

struct SeedResult {
  std::vector<WindowRecord> amser;
  std::vector<WindowRecord> baseline;
};

SeedResult run_seed(const signal::NoiseScenario& scenario, const pool::Pool& pool,
                    const RunConfig& cfg, std::uint64_t seed, std::size_t seed_index) {
  const Decision base = baseline_plan(cfg.modalities, pool, cfg.synth);
  const auto& base_model = pool.at(base.compute.model_key);
  const auto base_bytes = data_volume(base.sensing, cfg.window_s, cfg.bytes_per_sample);
  const double base_latency =
      cfg.cost.compute_mops(base, cfg.window_s, base_model.inference_cost_mops()) / cfg.cost.edge_speed_mops;
  const std::string noise_label = "scenario/" + signal::to_string(scenario.id);

  SeedResult out;
  std::optional<signal::QualityReport> previous;
  for (std::size_t w = 0; w < cfg.windows_per_seed; ++w) {
    const std::uint64_t ws = derive_seed(seed, static_cast<std::uint64_t>(w));
    Rng rng(derive_seed(ws, "label"));
    const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.synth.class_count)));
    std::map<ModalityId, signal::Signal> sensed;
    for (const auto& m : cfg.modalities) {
      const auto clean = signal::generate_window(m, label, cfg.window_s, ws, cfg.synth);
      sensed[m] = signal::inject_noise(clean, scenario.per_modality.at(m), derive_seed(ws, noise_label),
                                       cfg.synth);
    }

    // Baseline: quality-blind full pipeline.
    features::FeatureVector fv_base;
    fv_base.window_id = w;
    fv_base.label = label;
    for (const auto& [m, s] : sensed) fv_base.blocks.push_back(features::extract_features(s, cfg.synth));
    WindowRecord rb;
    rb.seed_index = seed_index;
    rb.window = w;
    rb.truth = label;
    rb.prediction = base_model.predict(fv_base);
    rb.latency_s = base_latency;
    rb.data_bytes = base_bytes;

    // AMSER: assess at the sensor, actuate the knobs, aggregate, select.
    const auto report = signal::assess_modalities(sensed, cfg.thresholds, previous ? &*previous : nullptr,
                                                  cfg.synth);
    previous = report;
    const Decision d = select_plan(report, pool, cfg.synth);
    std::vector<features::FeatureBlock> blocks;
    for (const auto& [m, setting] : d.sensing.sensors) {
      if (!setting.enabled) continue;
      const auto& s = sensed.at(m);
      const int factor = static_cast<int>(std::lround(s.sampling_rate_hz / setting.sampling_rate_hz));
      if (factor == 1)
        blocks.push_back(features::extract_features(s, cfg.synth));
      else
        blocks.push_back(features::extract_features(signal::downsample(s, factor), cfg.synth));
    }
    auto fv = features::aggregate(blocks, report, pool.policy);
    fv.window_id = w;
    fv.label = label;
    const auto& model = pool.at(d.compute.model_key);
    WindowRecord ra;
    ra.seed_index = seed_index;
    ra.window = w;
    ra.truth = label;
    ra.prediction = pool::tiered_predict({&model}, fv, d.compute.tier_threshold);
    ra.latency_s = cfg.cost.compute_mops(d, cfg.window_s, ra.prediction.cost_mops) / cfg.cost.edge_speed_mops;
    ra.data_bytes = data_volume(d.sensing, cfg.window_s, cfg.bytes_per_sample);
    ra.labels = rb.labels = label_text(report);

    out.amser.push_back(std::move(ra));
    out.baseline.push_back(std::move(rb));
  }
  return out;
}

SeedOutcome summarize(const std::vector<WindowRecord>& recs, std::uint64_t seed) {
  SeedOutcome o;
  o.seed = seed;
  for (const auto& r : recs) {
    o.accuracy += r.prediction.label == r.truth ? 1.0 : 0.0;
    o.latency_s += r.latency_s;
    o.data_bytes += static_cast<double>(r.data_bytes);
  }
  const double n = static_cast<double>(recs.size());
  o.accuracy /= n;
  o.latency_s /= n;
  o.data_bytes /= n;
  return o;
}

void finish(ScenarioOutcome& o) {
  const double n = static_cast<double>(o.per_seed.size());
  o.accuracy = o.latency_s = o.data_bytes = 0.0;
  for (const auto& s : o.per_seed) {
    o.accuracy += s.accuracy / n;
    o.latency_s += s.latency_s / n;
    o.data_bytes += s.data_bytes / n;
  }
}

}  // namespace

ScenarioComparison run_scenario(const signal::NoiseScenario& scenario, const pool::Pool& pool,
                                const RunConfig& cfg, std::uint64_t seed) {
  scenario.validate();
  if (cfg.seeds == 0 || cfg.windows_per_seed == 0) throw InvalidArgument("need at least one seed and window");
  for (const auto& m : cfg.modalities)
    if (!scenario.per_modality.count(m)) throw InvalidArgument("scenario has no noise spec for " + m.key());
  std::vector<SeedResult> results(cfg.seeds);
  std::vector<std::uint64_t> seeds(cfg.seeds);
  for (std::size_t i = 0; i < cfg.seeds; ++i) seeds[i] = derive_seed(derive_seed(seed, "amser"), i);
  parallel_for(cfg.seeds, cfg.jobs,
               [&](std::size_t i) { results[i] = run_seed(scenario, pool, cfg, seeds[i], i); });

  ScenarioComparison c;
  c.amser.scenario = c.baseline.scenario = scenario.id;
  c.amser.mode = Mode::kAmser;
  c.baseline.mode = Mode::kBaseline;
  std::vector<double> gains;
  for (std::size_t i = 0; i < cfg.seeds; ++i) {
    c.amser.per_seed.push_back(summarize(results[i].amser, seeds[i]));
    c.baseline.per_seed.push_back(summarize(results[i].baseline, seeds[i]));
    gains.push_back(c.amser.per_seed.back().accuracy - c.baseline.per_seed.back().accuracy);
    for (auto& r : results[i].amser) c.amser.windows.push_back(std::move(r));
    for (auto& r : results[i].baseline) c.baseline.windows.push_back(std::move(r));
  }
  finish(c.amser);
  finish(c.baseline);
  c.baseline.speedup_vs_baseline = 1.0;
  c.baseline.data_reduction_vs_baseline = 1.0;
  c.amser.speedup_vs_baseline = c.baseline.latency_s / c.amser.latency_s;
  c.amser.data_reduction_vs_baseline = c.baseline.data_bytes / c.amser.data_bytes;
  c.gain = std::accumulate(gains.begin(), gains.end(), 0.0) / static_cast<double>(gains.size());
  const auto ci = bootstrap_mean(gains, 2000, 0.95, derive_seed(seed, "bootstrap/" + signal::to_string(scenario.id)));
  c.gain_lo = ci.lo;
  c.gain_hi = ci.hi;
  return c;
}

void write_outcomes_csv(const std::filesystem::path& path, const std::vector<ScenarioComparison>& runs,
                        const FileHeader* header) {
  CsvWriter w(path, {"scenario", "mode", "seed", "accuracy", "latency_proxy", "speedup", "data_bytes", "reduction"},
              header);
  for (const auto& c : runs) {
    for (const auto* o : {&c.baseline, &c.amser}) {
      for (std::size_t i = 0; i < o->per_seed.size(); ++i) {
        const auto& s = o->per_seed[i];
        const auto& b = c.baseline.per_seed[i];
        w.cell(signal::to_string(o->scenario))
            .cell(to_string(o->mode))
            .cell(static_cast<std::int64_t>(i))
            .cell(s.accuracy)
            .cell(s.latency_s)
            .cell(b.latency_s / s.latency_s)
            .cell(s.data_bytes)
            .cell(b.data_bytes / s.data_bytes);
        w.end_row();
      }
    }
  }
}

}  // namespace ehsim::amser
