#include "ehsim/app/config.hpp"

#include <cstdio>

#include "ehsim/common/error.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/signal/synth.hpp"

namespace ehsim::app {

namespace {

using toml::Reader;

// Runs `fn`, re-raising plain validation failures against `key`.
template <typename Fn>
auto at_key(Reader& r, const std::string& key, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(r.qualified(key), r.line_of(key), e.what());
  }
}

std::size_t count(Reader& r, const std::string& key, std::size_t fallback, std::size_t min = 1) {
  const auto v = r.integer(key, static_cast<std::int64_t>(fallback));
  if (v < static_cast<std::int64_t>(min))
    throw ConfigError(r.qualified(key), r.line_of(key), "must be at least " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

double positive(Reader& r, const std::string& key, double fallback) {
  const double v = r.number(key, fallback);
  if (!(v > 0.0)) throw ConfigError(r.qualified(key), r.line_of(key), "must be positive");
  return v;
}

double non_negative(Reader& r, const std::string& key, double fallback) {
  const double v = r.number(key, fallback);
  if (!(v >= 0.0)) throw ConfigError(r.qualified(key), r.line_of(key), "must be non-negative");
  return v;
}

std::array<double, 2> pair_of(Reader& r, const std::string& key, std::array<double, 2> fallback) {
  const auto v = r.numbers(key, {fallback[0], fallback[1]});
  if (v.size() != 2) throw ConfigError(r.qualified(key), r.line_of(key), "expected two numbers");
  return {v[0], v[1]};
}

signal::ModalityId generatable_modality(Reader& r, const std::string& key, const std::string& name) {
  if (name != "ECG" && name != "EDA" && name != "PPG")
    throw ConfigError(r.qualified(key), r.line_of(key),
                      "unknown or unsupported modality '" + name + "' (expected ECG, EDA, PPG)");
  return signal::ModalityId(name);
}

void read_run(Reader& r, RunSection& run) {
  const auto seed = r.integer("seed", static_cast<std::int64_t>(run.seed));
  if (seed < 0) throw ConfigError(r.qualified("seed"), r.line_of("seed"), "must be non-negative");
  run.seed = static_cast<std::uint64_t>(seed);
  run.out = r.string("out", run.out);
  run.jobs = static_cast<int>(count(r, "jobs", static_cast<std::size_t>(run.jobs)));
}

void read_signals(Reader& r, SignalsSection& s) {
  if (r.has("modalities")) {
    s.modalities.clear();
    for (const auto& name : r.strings("modalities", {})) {
      auto m = generatable_modality(r, "modalities", name);
      if (std::find(s.modalities.begin(), s.modalities.end(), m) != s.modalities.end())
        throw ConfigError(r.qualified("modalities"), r.line_of("modalities"), "duplicate modality " + name);
      s.modalities.push_back(m);
    }
    if (s.modalities.empty())
      throw ConfigError(r.qualified("modalities"), r.line_of("modalities"), "needs at least one modality");
    std::sort(s.modalities.begin(), s.modalities.end());
  }
  s.window_s = positive(r, "window_s", s.window_s);
  s.windows = count(r, "windows", s.windows, 2);
  s.synth.class_count = static_cast<int>(count(r, "class_count", 2, 2));
  s.synth.separability = non_negative(r, "separability", s.synth.separability);
  s.synth.variability = non_negative(r, "variability", s.synth.variability);

  auto& prof = r.sub("profile");
  for (const auto& key : prof.keys()) {
    auto& p = prof.sub(key);
    const signal::ModalityId m(key);
    signal::ModalityProfile mp = m.builtin() ? signal::default_profile(m) : signal::ModalityProfile{};
    mp.nominal_rate_hz = positive(p, "nominal_rate_hz", mp.nominal_rate_hz);
    mp.full_scale = positive(p, "full_scale", mp.full_scale);
    mp.signal_low_hz = positive(p, "signal_low_hz", mp.signal_low_hz);
    const auto w = pair_of(p, "wander", {mp.wander.lo_hz, mp.wander.hi_hz});
    const auto a = pair_of(p, "artifact", {mp.artifact.lo_hz, mp.artifact.hi_hz});
    mp.wander = {w[0], w[1]};
    mp.artifact = {a[0], a[1]};
    if (!(0.0 < mp.wander.lo_hz && mp.wander.lo_hz < mp.wander.hi_hz && mp.wander.hi_hz < mp.signal_low_hz))
      throw ConfigError(p.qualified("wander"), p.line_of("wander"), "wander band must lie below signal_low_hz");
    if (!(0.0 < mp.artifact.lo_hz && mp.artifact.lo_hz < mp.artifact.hi_hz))
      throw ConfigError(p.qualified("artifact"), p.line_of("artifact"), "artifact band must be increasing");
    if (mp.signal_low_hz >= mp.nominal_rate_hz / 2.0)
      throw ConfigError(p.qualified("signal_low_hz"), p.line_of("signal_low_hz"), "must be below Nyquist");
    s.synth.profiles[m] = mp;
  }

  for (auto id : signal::kAllScenarios) s.scenarios[id] = signal::default_scenario(id, s.modalities);
  auto& sc = r.sub("scenario");
  for (const auto& name : sc.keys()) {
    const auto id = at_key(sc, name, [&] { return signal::parse_scenario(name); });
    auto& t = sc.sub(name);
    auto& scenario = s.scenarios[id];
    for (const auto& mkey : t.keys()) {
      const auto m = generatable_modality(t, mkey, mkey);
      if (!scenario.per_modality.count(m))
        throw ConfigError(t.qualified(mkey), t.line_of(mkey), "modality is not in signals.modalities");
      auto& e = t.sub(mkey);
      auto& spec = scenario.per_modality[m];
      spec.kind = at_key(e, "kind", [&] { return signal::parse_noise_kind(e.string("kind", to_string(spec.kind))); });
      spec.target_snr_db = e.number("snr_db", spec.target_snr_db);
      spec.artifact_duration_s = non_negative(e, "artifact_s", spec.artifact_duration_s);
      spec.artifact_amplitude_scale = non_negative(e, "artifact_scale", spec.artifact_amplitude_scale);
    }
    at_key(sc, name, [&] {
      scenario.validate();
      return 0;
    });
  }
}

void read_quality(Reader& r, signal::QualityThresholds& q) {
  q.noisy_db = r.number("noisy_db", q.noisy_db);
  q.drop_db = r.number("drop_db", q.drop_db);
  q.hysteresis_db = non_negative(r, "hysteresis_db", q.hysteresis_db);
  if (!(q.drop_db < q.noisy_db)) {
    const std::string key = r.has("drop_db") ? "drop_db" : "noisy_db";
    throw ConfigError(r.qualified(key), r.line_of(key), "drop_db must be below noisy_db");
  }
}

void read_pool(Reader& r, PoolSection& p) {
  p.windows = count(r, "windows", p.windows, 10);
  p.eval_windows = count(r, "eval_windows", p.eval_windows, 2);
  p.family = at_key(r, "family", [&] { return pool::parse_family(r.string("family", to_string(p.family))); });
  if (r.has("compare")) {
    p.compare.clear();
    for (const auto& f : r.strings("compare", {}))
      p.compare.push_back(at_key(r, "compare", [&] { return pool::parse_family(f); }));
  }
  p.params.knn_k = static_cast<int>(count(r, "knn_k", static_cast<std::size_t>(p.params.knn_k)));
  p.params.trees = static_cast<int>(count(r, "trees", static_cast<std::size_t>(p.params.trees)));
  p.params.max_depth = static_cast<int>(count(r, "max_depth", static_cast<std::size_t>(p.params.max_depth)));
  const auto snr = pair_of(r, "noisy_snr_db", {p.noisy_snr_lo_db, p.noisy_snr_hi_db});
  if (!(snr[0] <= snr[1]))
    throw ConfigError(r.qualified("noisy_snr_db"), r.line_of("noisy_snr_db"), "expected [low, high]");
  p.noisy_snr_lo_db = snr[0];
  p.noisy_snr_hi_db = snr[1];
  auto& k = r.sub("reduced_k");
  for (const auto& key : k.keys()) {
    const auto m = generatable_modality(k, key, key);
    p.reduced_k[m] = count(k, key, 1);
  }
}

void read_amser(Reader& r, AmserSection& a) {
  a.seeds = count(r, "seeds", a.seeds, 2);
  a.windows_per_seed = count(r, "windows_per_seed", a.windows_per_seed);
  a.bytes_per_sample = static_cast<int>(count(r, "bytes_per_sample", static_cast<std::size_t>(a.bytes_per_sample)));
  a.cost.pre_ops_per_sample = non_negative(r, "pre_ops_per_sample", a.cost.pre_ops_per_sample);
  a.cost.feature_ops_per_sample = non_negative(r, "feature_ops_per_sample", a.cost.feature_ops_per_sample);
  a.cost.edge_speed_mops = positive(r, "edge_speed_mops", a.cost.edge_speed_mops);
}

void read_edgesim(Reader& r, EdgesimSection& e) {
  auto& sim = e.sim;
  sim.users = static_cast<int>(count(r, "users", static_cast<std::size_t>(sim.users)));
  sim.duration_s = positive(r, "duration_s", sim.duration_s);
  sim.stop_at_horizon = r.boolean("stop_at_horizon", sim.stop_at_horizon);
  sim.utilization_window_s = positive(r, "utilization_window_s", sim.utilization_window_s);
  sim.tier = at_key(r, "tier", [&] { return edgesim::parse_tier(r.string("tier", to_string(sim.tier))); });
  sim.sampling =
      at_key(r, "sampling", [&] { return edgesim::parse_sampling(r.string("sampling", to_string(sim.sampling))); });
  e.policy = r.string("policy", e.policy);
  at_key(r, "policy", [&] {
    check_policy_name(e.policy);
    return 0;
  });

  auto& arr = r.sub("arrival");
  sim.arrival.kind =
      at_key(arr, "kind", [&] { return edgesim::parse_arrival(arr.string("kind", to_string(sim.arrival.kind))); });
  sim.arrival.period_s = positive(arr, "period_s", sim.arrival.period_s);
  sim.arrival.jitter = non_negative(arr, "jitter", sim.arrival.jitter);

  if (r.has("nodes")) {
    sim.topology.nodes.clear();
    for (auto* n : r.tables("nodes")) {
      edgesim::NodeSpec spec;
      spec.layer = at_key(*n, "layer", [&] { return edgesim::parse_layer(n->string("layer", "")); });
      spec.speed_mops_per_s = positive(*n, "speed_mops", 1.0);
      spec.energy_nj_per_mop = non_negative(*n, "energy_nj_per_mop", 0.0);
      spec.per_user = n->boolean("per_user", spec.layer == edgesim::LayerKind::kDevice);
      sim.topology.nodes.push_back(spec);
    }
  }
  if (r.has("links")) {
    sim.topology.links.clear();
    for (auto* l : r.tables("links")) {
      edgesim::LinkSpec spec;
      const auto bw = l->numbers("bandwidth_mbps", {});
      if (bw.size() != 3)
        throw ConfigError(l->qualified("bandwidth_mbps"), l->line_of("bandwidth_mbps"),
                          "expected three numbers (low, medium, high)");
      for (std::size_t i = 0; i < 3; ++i) spec.bandwidth_mbps[i] = bw[i];
      spec.propagation_ms = non_negative(*l, "propagation_ms", 0.0);
      spec.tx_energy_nj_per_byte = non_negative(*l, "tx_energy_nj_per_byte", 0.0);
      sim.topology.links.push_back(spec);
    }
  }
  if (r.has("pipelines")) {
    sim.pipelines.clear();
    for (auto* p : r.tables("pipelines")) {
      edgesim::PipelineSpec spec;
      spec.app = p->string("app", "");
      spec.input_bytes = pair_of(*p, "input_bytes", {0.0, 0.0});
      const auto names = p->strings("stages", {});
      const auto mh = p->numbers("mops_high", {});
      const auto ml = p->numbers("mops_low", mh);
      const auto oh = p->numbers("out_bytes_high", {});
      const auto ol = p->numbers("out_bytes_low", oh);
      if (names.empty() || mh.size() != names.size() || ml.size() != names.size() || oh.size() != names.size() ||
          ol.size() != names.size())
        throw ConfigError(p->qualified("stages"), p->line_of("stages"),
                          "stages, mops_high/low and out_bytes_high/low need one entry per stage");
      for (std::size_t i = 0; i < names.size(); ++i) spec.stages.push_back({names[i], {mh[i], ml[i]}, {oh[i], ol[i]}});
      sim.pipelines.push_back(spec);
    }
  }
  at_key(r, "pipelines", [&] {
    sim.validate();
    return 0;
  });
}

void read_calibrate(Reader& r, CalibrateSection& c) {
  c.free = r.strings("free", c.free);
  const auto names = edgesim::parameter_names(edgesim::default_placement_setup());
  for (const auto& f : c.free)
    if (std::find(names.begin(), names.end(), f) == names.end())
      throw ConfigError(r.qualified("free"), r.line_of("free"), "unknown parameter '" + f + "'");
  c.max_sweeps = static_cast<int>(count(r, "max_sweeps", static_cast<std::size_t>(c.max_sweeps)));
  c.restarts = static_cast<int>(count(r, "restarts", static_cast<std::size_t>(c.restarts), 0));
}

void read_rl(Reader& r, RlSection& s) {
  auto& h = s.train.hyper;
  h.alpha = r.number("alpha", h.alpha);
  h.gamma = r.number("gamma", h.gamma);
  h.visit_alpha = r.boolean("visit_alpha", h.visit_alpha);
  h.epsilon_start = r.number("epsilon_start", h.epsilon_start);
  h.epsilon_end = r.number("epsilon_end", h.epsilon_end);
  at_key(r, "alpha", [&] {
    h.validate();
    return 0;
  });
  auto& sp = s.train.space;
  sp.max_users = static_cast<int>(count(r, "max_users", static_cast<std::size_t>(sp.max_users)));
  sp.low_boundary = r.number("low_boundary", sp.low_boundary);
  sp.high_boundary = r.number("high_boundary", sp.high_boundary);
  at_key(r, "low_boundary", [&] {
    sp.validate();
    return 0;
  });
  s.train.episodes = count(r, "episodes", s.train.episodes);
  s.train.episode_s = positive(r, "episode_s", s.train.episode_s);
  s.train.energy_weight = non_negative(r, "energy_weight", s.train.energy_weight);
  s.eval_seeds = count(r, "eval_seeds", s.eval_seeds);
  s.eval_s = positive(r, "eval_s", s.eval_s);
  s.frozen_steps = count(r, "frozen_steps", s.frozen_steps);
  s.frozen_rollouts = count(r, "frozen_rollouts", s.frozen_rollouts);
  s.frozen_min_visits = count(r, "frozen_min_visits", s.frozen_min_visits);
  s.frozen_alpha = r.number("frozen_alpha", s.frozen_alpha);
  if (!(s.frozen_alpha > 0.0 && s.frozen_alpha <= 1.0))
    throw ConfigError(r.qualified("frozen_alpha"), r.line_of("frozen_alpha"), "must be in (0, 1]");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void check_policy_name(const std::string& name) {
  const auto& names = edgesim::StaticPolicy::names();
  if (name == "rl" || std::find(names.begin(), names.end(), name) != names.end()) return;
  std::string list;
  for (const auto& n : names) list += n + ", ";
  throw InvalidArgument("unknown policy '" + name + "' (valid: " + list + "rl)");
}

pool::DatasetSpec ScenarioConfig::dataset_spec() const {
  pool::DatasetSpec d;
  d.modalities = signals.modalities;
  d.windows = pool.windows;
  d.window_s = signals.window_s;
  d.noisy_snr_lo_db = pool.noisy_snr_lo_db;
  d.noisy_snr_hi_db = pool.noisy_snr_hi_db;
  d.synth = signals.synth;
  d.reduced_k = pool.reduced_k;
  d.jobs = run.jobs;
  return d;
}

amser::RunConfig ScenarioConfig::amser_run(int jobs) const {
  amser::RunConfig c;
  c.modalities = signals.modalities;
  c.seeds = amser.seeds;
  c.windows_per_seed = amser.windows_per_seed;
  c.window_s = signals.window_s;
  c.bytes_per_sample = amser.bytes_per_sample;
  c.thresholds = quality;
  c.synth = signals.synth;
  c.cost = amser.cost;
  c.jobs = jobs;
  return c;
}

rl::Hyper ScenarioConfig::frozen_hyper() const {
  rl::Hyper h = rl.train.hyper;
  h.alpha = rl.frozen_alpha;
  h.gamma = 0.0;
  h.visit_alpha = true;
  return h;
}

ScenarioConfig load_config(const toml::Table& table) {
  ScenarioConfig c;
  c.edgesim.sim = rl::default_orchestration_config();
  Reader root(&table, "");
  read_run(root.sub("run"), c.run);
  read_signals(root.sub("signals"), c.signals);
  read_quality(root.sub("quality"), c.quality);
  read_pool(root.sub("pool"), c.pool);
  read_amser(root.sub("amser"), c.amser);
  read_edgesim(root.sub("edgesim"), c.edgesim);
  read_calibrate(root.sub("calibrate"), c.calibrate);
  read_rl(root.sub("rl"), c.rl);
  root.finish();

  for (const auto& p : c.edgesim.sim.pipelines)
    if (std::find(c.rl.train.space.apps.begin(), c.rl.train.space.apps.end(), p.app) == c.rl.train.space.apps.end())
      c.rl.train.space.apps.push_back(p.app);
  c.hash = hex64(fnv1a64(toml::write(table)));
  return c;
}

ScenarioConfig load_config_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InvalidArgument("config file '" + path.string() + "' not found");
  return load_config(toml::parse_file(path));
}

ScenarioConfig default_config() { return load_config(toml::Table{}); }

}  // namespace ehsim::app
