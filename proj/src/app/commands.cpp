#include "ehsim/app/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <map>

#include "ehsim/common/error.hpp"
#include "ehsim/common/parallel.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/features/features.hpp"
#include "ehsim/signal/io.hpp"
#include "ehsim/signal/quality.hpp"
#include "ehsim/signal/synth.hpp"
#include "json.hpp"

namespace ehsim::app {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw RuntimeError("write failed for '" + path.string() + "'");
}

void write_summary(const Context& ctx, const std::string& command, json metrics) {
  json j;
  j["tool"] = "ehsim";
  j["version"] = kToolVersion;
  j["config_hash"] = ctx.config.hash;
  j["seed"] = ctx.seed;
  j["command"] = command;
  j["metrics"] = std::move(metrics);
  write_text(ctx.dir(command) / "summary.json", j.dump(1) + "\n");
}

// Upstream CSV produced by `producer`; rejects files from another config.
CsvTable read_upstream(const Context& ctx, const std::string& producer, const std::string& file) {
  const auto path = ctx.out / producer / file;
  if (!fs::exists(path)) throw MissingArtifact(path.string(), producer);
  auto t = read_csv(path);
  for (const auto& want : {" config_hash=" + ctx.config.hash, " seed=" + format_number(static_cast<std::int64_t>(ctx.seed))})
    if (std::find(t.comments.begin(), t.comments.end(), want) == t.comments.end())
      throw RuntimeError("'" + path.string() + "' was produced with a different config or seed; rerun `ehsim " +
                         producer + "`");
  return t;
}

std::string join_labels(const signal::QualityReport& rep) {
  std::string out;
  for (const auto& [m, e] : rep.entries) {
    if (!out.empty()) out += ';';
    out += m.key() + "=" + to_string(e.label);
  }
  return out;
}

toml::Table placement_table(const edgesim::PlacementSetup& s) {
  toml::Array nodes;
  for (const auto& n : s.topology.nodes) {
    toml::Table t;
    t["layer"] = edgesim::to_string(n.layer);
    t["speed_mops"] = n.speed_mops_per_s;
    t["energy_nj_per_mop"] = n.energy_nj_per_mop;
    t["per_user"] = n.per_user;
    nodes.emplace_back(std::move(t));
  }
  toml::Array links;
  for (const auto& l : s.topology.links) {
    toml::Table t;
    t["bandwidth_mbps"] = toml::Array{l.bandwidth_mbps[0], l.bandwidth_mbps[1], l.bandwidth_mbps[2]};
    t["propagation_ms"] = l.propagation_ms;
    t["tx_energy_nj_per_byte"] = l.tx_energy_nj_per_byte;
    links.emplace_back(std::move(t));
  }
  toml::Array pipes;
  for (const auto& p : s.pipelines) {
    toml::Table t;
    toml::Array names, mh, ml, oh, ol;
    for (const auto& st : p.stages) {
      names.emplace_back(st.name);
      mh.emplace_back(st.compute_mops[0]);
      ml.emplace_back(st.compute_mops[1]);
      oh.emplace_back(st.output_bytes[0]);
      ol.emplace_back(st.output_bytes[1]);
    }
    t["app"] = p.app;
    t["input_bytes"] = toml::Array{p.input_bytes[0], p.input_bytes[1]};
    t["stages"] = std::move(names);
    t["mops_high"] = std::move(mh);
    t["mops_low"] = std::move(ml);
    t["out_bytes_high"] = std::move(oh);
    t["out_bytes_low"] = std::move(ol);
    pipes.emplace_back(std::move(t));
  }
  toml::Table edgesim;
  edgesim["nodes"] = std::move(nodes);
  edgesim["links"] = std::move(links);
  edgesim["pipelines"] = std::move(pipes);
  toml::Table root;
  root["edgesim"] = std::move(edgesim);
  return root;
}

}  // namespace

std::uint64_t Context::command_seed(const std::string& command) const { return derive_seed(seed, command); }

fs::path Context::dir(const std::string& command) const {
  const auto d = out / command;
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw RuntimeError("cannot create '" + d.string() + "': " + ec.message());
  return d;
}

fs::path resolve_out(const std::string& flag, const ScenarioConfig& config) {
  if (!flag.empty()) return flag;
  if (!config.run.out.empty()) return config.run.out;
  if (const char* env = std::getenv("EHSIM_OUT"); env != nullptr && *env != '\0') return env;
  return "out";
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"generate", "train-pool", "amser", "simulate",
                                                 "train-rl", "calibrate",  "report"};
  return names;
}

void run_command(const std::string& name, const Context& ctx) {
  if (name == "generate") return cmd_generate(ctx);
  if (name == "train-pool") return cmd_train_pool(ctx);
  if (name == "amser") return cmd_amser(ctx);
  if (name == "simulate") return cmd_simulate(ctx);
  if (name == "train-rl") return cmd_train_rl(ctx);
  if (name == "calibrate") return cmd_calibrate(ctx);
  if (name == "report") return cmd_report(ctx);
  throw InvalidArgument("unknown command '" + name + "'");
}

// ---------------------------------------------------------------- generate

void cmd_generate(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto& sig = cfg.signals;
  const auto header = ctx.header();
  const auto root = ctx.command_seed("generate");
  json metrics = json::object();
  for (auto id : signal::kAllScenarios) {
    const auto& scenario = sig.scenarios.at(id);
    const auto sseed = derive_seed(root, signal::to_string(id));
    struct Window {
      int label = 0;
      std::vector<signal::Signal> signals;
      signal::QualityReport report;
      features::FeatureVector features;
    };
    std::vector<Window> windows(sig.windows);
    parallel_for(sig.windows, ctx.jobs, [&](std::size_t w) {
      const auto wseed = derive_seed(sseed, w);
      Rng rng(derive_seed(wseed, "label"));
      auto& out = windows[w];
      out.label = static_cast<int>(rng.below(static_cast<std::uint64_t>(sig.synth.class_count)));
      std::map<signal::ModalityId, signal::Signal> by_mod;
      out.features.window_id = w;
      out.features.label = out.label;
      for (const auto& m : sig.modalities) {
        const auto clean = signal::generate_window(m, out.label, sig.window_s, derive_seed(wseed, m.key()), sig.synth);
        auto noisy = signal::inject_noise(clean, scenario.per_modality.at(m), derive_seed(wseed, "noise/" + m.key()),
                                          sig.synth);
        out.features.blocks.push_back(features::extract_features(noisy, sig.synth));
        by_mod[m] = noisy;
        out.signals.push_back(std::move(noisy));
      }
      out.report = signal::assess_modalities(by_mod, cfg.quality, nullptr, sig.synth);
    });

    const auto dir = ctx.dir("generate") / signal::to_string(id);
    fs::create_directories(dir);
    std::vector<features::FeatureVector> fv;
    std::vector<signal::Signal> all;
    std::vector<std::string> cols = {"window_id", "label"};
    for (const auto& m : sig.modalities) {
      cols.push_back(m.key() + "_true_snr_db");
      cols.push_back(m.key() + "_est_snr_db");
      cols.push_back(m.key() + "_quality");
    }
    CsvWriter wcsv(dir / "windows.csv", cols, &header);
    std::map<std::string, std::size_t> label_counts;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      auto& win = windows[w];
      wcsv.cell(w).cell(win.label);
      for (std::size_t k = 0; k < sig.modalities.size(); ++k) {
        const auto& e = win.report.entries.at(sig.modalities[k]);
        wcsv.cell(win.signals[k].truth.true_snr_db).cell(e.estimated_snr_db).cell(to_string(e.label));
      }
      wcsv.end_row();
      ++label_counts[join_labels(win.report)];
      fv.push_back(std::move(win.features));
      for (auto& s : win.signals) all.push_back(std::move(s));
    }
    features::write_feature_csv(dir / "features.csv", fv, &header);
    signal::write_signal_bin(dir / "signals.bin", all);
    json q = json::object();
    for (const auto& [k, v] : label_counts) q[k] = v;
    metrics[signal::to_string(id)] = {{"windows", sig.windows}, {"quality_labels", q}};
  }
  write_summary(ctx, "generate", metrics);
}

// ---------------------------------------------------------------- train-pool

void cmd_train_pool(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto header = ctx.header();
  const auto root = ctx.command_seed("train-pool");
  auto spec = cfg.dataset_spec();
  spec.jobs = ctx.jobs;
  const auto data = pool::make_dataset(spec, derive_seed(root, "dataset"));
  const auto keys = pool::default_keys(cfg.signals.modalities);
  const auto trained = pool::train_pool(data, keys, cfg.pool.family, derive_seed(root, "train"), cfg.pool.params, ctx.jobs);
  const auto dir = ctx.dir("train-pool");
  pool::save_pool(trained, dir / "pool", &header);

  // Modality comparison on fresh clean windows.
  auto eval_spec = spec;
  eval_spec.windows = cfg.pool.eval_windows;
  const auto eval = pool::make_dataset(eval_spec, derive_seed(root, "eval"));
  std::vector<pool::ModelKey> compare;
  pool::ModelKey fused;
  for (const auto& m : cfg.signals.modalities) {
    const auto n = features::default_template(m).size();
    compare.push_back(pool::ModelKey{{{m, false, n}}});
    fused.entries.push_back({m, false, n});
  }
  if (cfg.signals.modalities.size() > 1) compare.push_back(fused);

  CsvWriter w(dir / "families.csv", {"family", "key", "features", "heldout_accuracy", "clean_accuracy"}, &header);
  json fam = json::object();
  for (auto f : cfg.pool.compare) {
    std::vector<double> acc(compare.size());
    std::vector<double> held(compare.size());
    parallel_for(compare.size(), ctx.jobs, [&](std::size_t i) {
      const auto model = pool::train_model(data, compare[i], f, derive_seed(root, "compare/" + to_string(f)),
                                           cfg.pool.params);
      std::vector<features::FeatureVector> rows;
      for (const auto& r : eval.rows) rows.push_back(pool::view(r, compare[i], data.policy));
      acc[i] = pool::evaluate(model, rows).accuracy;
      held[i] = model.meta().heldout_accuracy;
    });
    json entry = json::object();
    bool dominates = true;
    for (std::size_t i = 0; i < compare.size(); ++i) {
      w.cell(to_string(f)).cell(compare[i].str()).cell(compare[i].feature_count()).cell(held[i]).cell(acc[i]);
      w.end_row();
      entry[compare[i].str()] = acc[i];
      if (acc[i] > acc.back()) dominates = false;
    }
    entry["fused_dominates"] = dominates;
    fam[to_string(f)] = entry;
  }
  write_summary(ctx, "train-pool",
                {{"family", to_string(cfg.pool.family)},
                 {"models", trained.models.size()},
                 {"dataset_hash", data.hash()},
                 {"clean_accuracy", fam}});
}

// ---------------------------------------------------------------- amser

void cmd_amser(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto header = ctx.header();
  const auto root = ctx.command_seed("amser");
  const auto pdir = ctx.out / "train-pool" / "pool";
  if (!fs::exists(pdir / "manifest.csv")) throw MissingArtifact((pdir / "manifest.csv").string(), "train-pool");
  const auto p = pool::load_pool(pdir);
  const auto run = cfg.amser_run(ctx.jobs);
  std::vector<amser::ScenarioComparison> runs;
  for (auto id : signal::kAllScenarios)
    runs.push_back(amser::run_scenario(cfg.signals.scenarios.at(id), p, run, derive_seed(root, signal::to_string(id))));

  const auto dir = ctx.dir("amser");
  amser::write_outcomes_csv(dir / "outcomes.csv", runs, &header);
  CsvWriter s(dir / "scenarios.csv",
              {"scenario", "mode", "accuracy", "accuracy_lo", "accuracy_hi", "gain", "gain_lo", "gain_hi",
               "latency_s", "speedup", "data_bytes", "data_reduction"},
              &header);
  CsvWriter wcsv(dir / "windows.csv",
                 {"scenario", "mode", "seed_index", "window", "truth", "predicted", "confidence", "model_key",
                  "cost_mops", "latency_s", "data_bytes", "quality"},
                 &header);
  json metrics = json::object();
  for (const auto& c : runs) {
    const auto sname = signal::to_string(c.amser.scenario);
    for (const auto* o : {&c.baseline, &c.amser}) {
      std::vector<double> acc;
      for (const auto& ps : o->per_seed) acc.push_back(ps.accuracy);
      const auto ci = amser::bootstrap_mean(acc, 2000, 0.95, derive_seed(root, "ci/" + sname + "/" + to_string(o->mode)));
      s.cell(sname).cell(to_string(o->mode)).cell(o->accuracy).cell(ci.lo).cell(ci.hi);
      s.cell(c.gain).cell(c.gain_lo).cell(c.gain_hi);
      s.cell(o->latency_s).cell(o->speedup_vs_baseline).cell(o->data_bytes).cell(o->data_reduction_vs_baseline);
      s.end_row();
      for (const auto& w : o->windows) {
        wcsv.cell(sname).cell(to_string(o->mode)).cell(w.seed_index).cell(w.window).cell(w.truth);
        wcsv.cell(w.prediction.label).cell(w.prediction.confidence).cell(w.prediction.model_key);
        wcsv.cell(w.prediction.cost_mops).cell(w.latency_s).cell(static_cast<std::int64_t>(w.data_bytes)).cell(w.labels);
        wcsv.end_row();
      }
    }
    metrics[sname] = {{"amser_accuracy", c.amser.accuracy},
                      {"baseline_accuracy", c.baseline.accuracy},
                      {"gain", c.gain},
                      {"gain_ci", {c.gain_lo, c.gain_hi}},
                      {"speedup", c.amser.speedup_vs_baseline},
                      {"data_reduction", c.amser.data_reduction_vs_baseline}};
  }
  write_summary(ctx, "amser", metrics);
}

// ---------------------------------------------------------------- simulate

rl::QTable read_qtable(const fs::path& path, const rl::StateSpace& space, const std::vector<std::string>& actions,
                       const rl::Hyper& hyper) {
  const auto t = read_csv(path);
  rl::QTable q(space.size(), actions.size(), hyper);
  if (t.rows.size() != space.size() * actions.size())
    throw RuntimeError("'" + path.string() + "' does not match the configured state space; rerun `ehsim train-rl`");
  const auto ca = t.column("action");
  const auto cv = t.column("value");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto s = i / actions.size();
    const auto a = i % actions.size();
    if (t.rows[i][ca] != actions[a])
      throw RuntimeError("'" + path.string() + "' has action '" + t.rows[i][ca] + "' where '" + actions[a] +
                         "' was expected; rerun `ehsim train-rl`");
    q.set(s, a, parse_double(t.rows[i][cv]));
  }
  return q;
}

void cmd_simulate(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto header = ctx.header();
  const auto root = ctx.command_seed("simulate");
  const auto policy_name = ctx.policy.empty() ? cfg.edgesim.policy : ctx.policy;
  check_policy_name(policy_name);
  const auto& sim = cfg.edgesim.sim;
  edgesim::SimTrace trace;
  if (policy_name == "rl") {
    const auto path = ctx.out / "train-rl" / "qtable.csv";
    if (!fs::exists(path)) throw MissingArtifact(path.string(), "train-rl");
    read_upstream(ctx, "train-rl", "qtable.csv");
    if (sim.pipelines.size() != 1) throw InvalidArgument("the rl policy expects a single pipeline");
    const auto actions = edgesim::enumerate_placements(sim.pipelines[0].stages.size(), sim.topology.layers());
    auto table = read_qtable(path, cfg.rl.train.space, rl::action_names(actions, sim.topology), cfg.rl.train.hyper);
    Rng rng(derive_seed(root, "agent"));
    rl::QAgent agent(table, cfg.rl.train.space, actions, rng);
    agent.set_learning(false);
    agent.set_epsilon(0.0);
    trace = edgesim::simulate(sim, agent, derive_seed(root, "sim"));
  } else {
    edgesim::StaticPolicy pol(policy_name, sim.topology);
    trace = edgesim::simulate(sim, pol, derive_seed(root, "sim"));
  }
  const auto dir = ctx.dir("simulate");
  edgesim::write_trace_csv(dir / "trace.csv", trace, sim.topology, &header);
  const auto energy = edgesim::energy_of(trace, sim);
  write_summary(ctx, "simulate",
                {{"policy", policy_name},
                 {"users", sim.users},
                 {"requests", trace.requests.size()},
                 {"completed", trace.completed()},
                 {"mean_response_s", trace.mean_response_s()},
                 {"energy_nj", energy.total_nj()}});
}

// ---------------------------------------------------------------- train-rl

void cmd_train_rl(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto header = ctx.header();
  const auto root = ctx.command_seed("train-rl");
  const auto& sim = cfg.edgesim.sim;
  const auto trained = rl::train(sim, cfg.rl.train, derive_seed(root, "train"));
  const auto names = rl::action_names(trained.actions, sim.topology);
  const auto dir = ctx.dir("train-rl");
  trained.table.write_csv(dir / "qtable.csv", cfg.rl.train.space, names, &header);

  CsvWriter curve(dir / "curve.csv", {"episode", "users", "epsilon", "mean_response_s"}, &header);
  for (std::size_t e = 0; e < trained.curve.size(); ++e) {
    curve.cell(e).cell(trained.curve_users[e]).cell(cfg.rl.train.hyper.epsilon(e, cfg.rl.train.episodes));
    curve.cell(trained.curve[e]).end_row();
  }

  const auto rows = rl::user_sweep(sim, trained, cfg.rl.train.space, cfg.rl.eval_seeds, cfg.rl.eval_s,
                                   derive_seed(root, "sweep"), ctx.jobs);
  CsvWriter sw(dir / "sweep.csv", {"users", "policy", "mean_response_s"}, &header);
  std::map<int, double> rl_by_users, best_static;
  for (const auto& r : rows) {
    sw.cell(r.users).cell(r.policy).cell(r.mean_response_s).end_row();
    if (r.policy == "rl") {
      rl_by_users[r.users] = r.mean_response_s;
    } else {
      auto it = best_static.find(r.users);
      if (it == best_static.end() || r.mean_response_s < it->second) best_static[r.users] = r.mean_response_s;
    }
  }

  const rl::FrozenEnvironment env(sim);
  const auto fc = rl::check_frozen(env, cfg.frozen_hyper(), cfg.rl.frozen_steps, cfg.rl.frozen_rollouts,
                                   cfg.rl.frozen_min_visits, derive_seed(root, "frozen"));
  const auto fnames = rl::action_names(env.placements(), sim.topology);
  CsvWriter fz(dir / "frozen.csv", {"edge_util", "cloud_util", "bandwidth", "visits", "greedy", "oracle_best", "matched"},
               &header);
  for (std::size_t s = 0; s < env.states(); ++s) {
    const auto st = env.space().at(s);
    const auto g = fc.table.greedy(s);
    fz.cell(rl::to_string(st.edge)).cell(rl::to_string(st.cloud)).cell(edgesim::to_string(st.tier));
    fz.cell(static_cast<std::int64_t>(fc.table.visits(s))).cell(fnames[g]).cell(fnames[fc.oracle_best[s]]);
    fz.cell(g == fc.oracle_best[s] ? 1 : 0).end_row();
  }

  json sweep = json::object();
  for (const auto& [u, v] : rl_by_users)
    sweep[std::to_string(u)] = {{"rl", v}, {"best_static", best_static[u]}, {"ratio", v / best_static[u]}};
  write_summary(ctx, "train-rl",
                {{"episodes", cfg.rl.train.episodes},
                 {"sweep", sweep},
                 {"frozen", {{"well_visited", fc.well_visited}, {"matched", fc.matched}, {"match_rate", fc.match_rate()}}}});
}

// ---------------------------------------------------------------- calibrate

void cmd_calibrate(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto header = ctx.header();
  const auto root = ctx.command_seed("calibrate");
  const auto targets = edgesim::reference_latency_targets();
  const auto setup = edgesim::default_placement_setup();
  edgesim::CalibrationOptions opt;
  opt.free = cfg.calibrate.free.empty() ? edgesim::default_free_parameters(targets, setup) : cfg.calibrate.free;
  opt.max_sweeps = cfg.calibrate.max_sweeps;
  opt.restarts = cfg.calibrate.restarts;
  opt.seed = derive_seed(root, "fit");
  const auto rep = edgesim::calibrate(targets, setup, opt);

  const auto dir = ctx.dir("calibrate");
  write_text(dir / "fitted.toml", header.render() + toml::write(placement_table(rep.fitted)));
  CsvWriter w(dir / "points.csv", {"app", "sampling", "tier", "policy", "reference_latency_s", "fitted_latency_s", "rel_error"},
              &header);
  for (const auto& p : rep.points) {
    w.cell(p.target.app).cell(edgesim::to_string(p.target.level)).cell(edgesim::to_string(p.target.tier));
    w.cell(p.target.policy).cell(p.target.latency_s).cell(p.fitted_s).cell(p.rel_error).end_row();
  }
  json fitted = json::object();
  for (const auto& name : opt.free) fitted[name] = edgesim::get_parameter(rep.fitted, name);
  write_summary(ctx, "calibrate",
                {{"orderings_matched", rep.orderings_matched},
                 {"orderings_total", rep.orderings_total},
                 {"median_rel_error", rep.median_rel_error},
                 {"max_rel_error", rep.max_rel_error},
                 {"loss", rep.loss},
                 {"sweeps", rep.sweeps},
                 {"feasible", rep.feasible},
                 {"note", rep.note},
                 {"free", fitted}});
}

// ---------------------------------------------------------------- report

void cmd_report(const Context& ctx) {
  const auto header = ctx.header();
  const auto points = read_upstream(ctx, "calibrate", "points.csv");
  const auto sweep = read_upstream(ctx, "train-rl", "sweep.csv");
  const auto scen = read_upstream(ctx, "amser", "scenarios.csv");
  const auto dir = ctx.dir("report");

  const auto copy = [&](const CsvTable& in, const fs::path& path, const std::vector<std::string>& cols) {
    CsvWriter w(path, cols, &header);
    std::vector<std::size_t> idx;
    for (const auto& c : cols) idx.push_back(in.column(c));
    for (const auto& row : in.rows) {
      for (auto i : idx) w.cell(row.at(i));
      w.end_row();
    }
    return in.rows.size();
  };
  json rows = json::object();
  rows["fig8.csv"] = copy(points, dir / "fig8.csv",
                          {"app", "sampling", "tier", "policy", "reference_latency_s", "fitted_latency_s", "rel_error"});
  rows["fig10.csv"] = copy(sweep, dir / "fig10.csv", {"users", "policy", "mean_response_s"});
  rows["fig13.csv"] = copy(scen, dir / "fig13.csv", {"scenario", "mode", "accuracy", "accuracy_lo", "accuracy_hi"});

  CsvWriter f14(dir / "fig14.csv", {"scenario", "speedup", "amser_bytes", "baseline_bytes", "data_reduction"}, &header);
  const auto cs = scen.column("scenario"), cm = scen.column("mode"), cb = scen.column("data_bytes"),
             cp = scen.column("speedup"), cr = scen.column("data_reduction");
  std::map<std::string, std::string> base_bytes;
  for (const auto& r : scen.rows)
    if (r[cm] == "baseline") base_bytes[r[cs]] = r[cb];
  std::size_t n14 = 0;
  for (const auto& r : scen.rows) {
    if (r[cm] != "amser") continue;
    f14.cell(r[cs]).cell(r[cp]).cell(r[cb]).cell(base_bytes.at(r[cs])).cell(r[cr]).end_row();
    ++n14;
  }
  rows["fig14.csv"] = n14;
  write_summary(ctx, "report", {{"rows", rows}});
}

}  // namespace ehsim::app
