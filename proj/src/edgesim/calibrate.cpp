#include "ehsim/edgesim/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ehsim/common/error.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/edgesim/sim.hpp"

namespace ehsim::edgesim {

std::vector<LatencyTarget> reference_latency_targets() {
  // Rows: app, level, then low/medium/high values for Local, Cloud, Partial.
  struct Row {
    const char* app;
    SamplingLevel level;
    double local[3], cloud[3], partial[3];
  };
  const Row rows[] = {
      {"stress", SamplingLevel::kHigh, {0.189038, 0.189038, 0.189038}, {0.410974, 0.039724, 0.037849},
       {0.137094, 0.133134, 0.133114}},
      {"stress", SamplingLevel::kLow, {0.121628, 0.121628, 0.121628}, {0.20681, 0.021185, 0.0202475},
       {0.069862, 0.067585, 0.0675735}},
      {"fall", SamplingLevel::kHigh, {7.25, 7.25, 7.25}, {13.327, 1.15, 1.0885}, {16.023, 3.846, 3.7845}},
      {"fall", SamplingLevel::kLow, {5.7, 5.7, 5.7}, {6.895, 0.856, 0.8255}, {8.28, 2.241, 2.2105}},
      {"pain", SamplingLevel::kHigh, {11.394, 11.394, 11.394}, {25.58, 2.414, 2.297},
       {10.222, 10.1131, 10.11255}},
      {"pain", SamplingLevel::kLow, {6.564, 6.564, 6.564}, {24.598, 1.432, 1.315}, {5.265, 5.1561, 5.15555}},
  };
  std::vector<LatencyTarget> out;
  for (const auto& r : rows)
    for (int t = 0; t < 3; ++t) {
      const auto tier = static_cast<BandwidthTier>(t);
      out.push_back({r.app, r.level, tier, "edge-only", r.local[t]});
      out.push_back({r.app, r.level, tier, "cloud-only", r.cloud[t]});
      out.push_back({r.app, r.level, tier, "partial", r.partial[t]});
    }
  return out;
}

const PipelineSpec& PlacementSetup::pipeline(const std::string& app) const {
  for (const auto& p : pipelines)
    if (p.app == app) return p;
  throw InvalidArgument("no pipeline for app '" + app + "'");
}

PipelineSpec& PlacementSetup::pipeline(const std::string& app) {
  return const_cast<PipelineSpec&>(std::as_const(*this).pipeline(app));
}

PlacementSetup default_placement_setup() {
  PlacementSetup s;
  s.topology.nodes = {{LayerKind::kEdge, 1000.0, 1.0, false}, {LayerKind::kCloud, 5000.0, 1.0, false}};
  s.topology.links = {{{1.0, 20.0, 100.0}, 10.0, 10.0}};
  for (const char* app : {"stress", "fall", "pain"}) {
    PipelineSpec p;
    p.app = app;
    p.input_bytes = {1000000.0, 500000.0};
    p.stages = {{"preprocess", {10.0, 5.0}, {500000.0, 250000.0}},
                {"features", {100.0, 50.0}, {10000.0, 5000.0}},
                {"classify", {100.0, 50.0}, {100.0, 100.0}}};
    s.pipelines.push_back(p);
  }
  return s;
}

// ---------------------------------------------------------------- parameters

namespace {

int level_index(const std::string& s) { return static_cast<int>(parse_sampling(s)); }

std::size_t parse_index(const std::string& s, std::size_t limit, const std::string& name) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || v >= limit) throw InvalidArgument("bad parameter name '" + name + "'");
  return v;
}

double* locate(PlacementSetup& setup, const std::string& name) {
  const auto parts = split(name, '.');
  const auto bad = [&]() -> double* { throw InvalidArgument("unknown calibration parameter '" + name + "'"); };
  if (parts.size() < 2) return bad();
  if (parts[0] == "node" && parts.size() == 3 && parts[2] == "speed")
    return &setup.topology.nodes[parse_index(parts[1], setup.topology.nodes.size(), name)].speed_mops_per_s;
  if (parts[0] == "link") {
    auto& link = setup.topology.links[parse_index(parts[1], setup.topology.links.size(), name)];
    if (parts.size() == 4 && parts[2] == "bw") return &link.bandwidth_mbps[static_cast<std::size_t>(parse_tier(parts[3]))];
    if (parts.size() == 3 && parts[2] == "prop") return &link.propagation_ms;
    return bad();
  }
  PipelineSpec* pipe = nullptr;
  for (auto& p : setup.pipelines)
    if (p.app == parts[0]) pipe = &p;
  if (pipe == nullptr) return bad();
  if (parts.size() == 3 && parts[1] == "input")
    return &pipe->input_bytes[static_cast<std::size_t>(level_index(parts[2]))];
  if (parts.size() == 4) {
    for (auto& st : pipe->stages) {
      if (st.name != parts[1]) continue;
      const auto lv = static_cast<std::size_t>(level_index(parts[3]));
      if (parts[2] == "mops") return &st.compute_mops[lv];
      if (parts[2] == "out") return &st.output_bytes[lv];
    }
  }
  return bad();
}

bool is_byte_parameter(const std::string& name) {
  return name.find(".input.") != std::string::npos || name.find(".out.") != std::string::npos;
}

bool is_bandwidth_parameter(const std::string& name) { return name.find(".bw.") != std::string::npos; }

bool admissible(const PlacementSetup& s) {
  for (const auto& l : s.topology.links)
    if (!(l.bandwidth_mbps[0] < l.bandwidth_mbps[1] && l.bandwidth_mbps[1] < l.bandwidth_mbps[2])) return false;
  for (const auto& p : s.pipelines)
    if (!(p.input_bytes[0] > p.input_bytes[1])) return false;
  return true;
}

}  // namespace

std::vector<std::string> parameter_names(const PlacementSetup& setup) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < setup.topology.nodes.size(); ++i) out.push_back("node." + std::to_string(i) + ".speed");
  for (std::size_t i = 0; i < setup.topology.links.size(); ++i) {
    for (auto t : kAllTiers) out.push_back("link." + std::to_string(i) + ".bw." + to_string(t));
    out.push_back("link." + std::to_string(i) + ".prop");
  }
  for (const auto& p : setup.pipelines) {
    for (auto lv : kAllSampling) out.push_back(p.app + ".input." + to_string(lv));
    for (const auto& st : p.stages)
      for (auto lv : kAllSampling) {
        out.push_back(p.app + "." + st.name + ".mops." + to_string(lv));
        out.push_back(p.app + "." + st.name + ".out." + to_string(lv));
      }
  }
  return out;
}

double get_parameter(const PlacementSetup& setup, const std::string& name) {
  return *locate(const_cast<PlacementSetup&>(setup), name);
}

void set_parameter(PlacementSetup& setup, const std::string& name, double value) { *locate(setup, name) = value; }

std::vector<std::string> default_free_parameters(const std::vector<LatencyTarget>& targets,
                                                 const PlacementSetup& setup) {
  const auto base = evaluate_fit(targets, setup);
  std::vector<std::string> out;
  for (const auto& n : parameter_names(setup)) {
    if (n == "node.0.speed" || n.ends_with(".bw.high")) continue;
    bool first_stage = false;
    for (const auto& p : setup.pipelines)
      if (n.starts_with(p.app + "." + p.stages.front().name + ".mops.") && p.stages.size() > 1) first_stage = true;
    if (first_stage) continue;
    PlacementSetup probe = setup;
    *locate(probe, n) *= 1.25;
    if (!admissible(probe)) *locate(probe, n) = get_parameter(setup, n) * 0.8;
    const auto moved = evaluate_fit(targets, probe);
    bool effect = false;
    for (std::size_t i = 0; i < moved.points.size(); ++i)
      if (moved.points[i].fitted_s != base.points[i].fitted_s) effect = true;
    if (effect) out.push_back(n);
  }
  return out;
}

// ---------------------------------------------------------------- evaluation

namespace {

struct Prepared {
  std::size_t pipe = 0;
  Placement placement;
  BandwidthTier tier;
  SamplingLevel level;
  double log_target = 0.0;
};

std::vector<Prepared> prepare(const std::vector<LatencyTarget>& targets, const PlacementSetup& setup) {
  std::vector<Prepared> out;
  for (const auto& t : targets) {
    Prepared p;
    p.pipe = static_cast<std::size_t>(&setup.pipeline(t.app) - setup.pipelines.data());
    p.placement =
        StaticPolicy::placement_for(t.policy, setup.pipelines[p.pipe].stages.size(), setup.topology);
    p.tier = t.tier;
    p.level = t.level;
    p.log_target = std::log(t.latency_s);
    out.push_back(std::move(p));
  }
  return out;
}

double loss_of(const std::vector<Prepared>& prep, const PlacementSetup& s) {
  if (!admissible(s)) return std::numeric_limits<double>::infinity();
  double loss = 0.0;
  for (const auto& p : prep) {
    const double r = std::log(analytic_latency(s.pipelines[p.pipe], p.placement, p.tier, p.level, s.topology)) -
                     p.log_target;
    loss += r * r;
  }
  return loss;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

CalibrationReport evaluate_fit(const std::vector<LatencyTarget>& targets, const PlacementSetup& setup) {
  CalibrationReport r;
  r.fitted = setup;
  std::vector<double> errs;
  for (const auto& t : targets) {
    if (!(t.latency_s > 0.0) || !std::isfinite(t.latency_s)) {
      r.feasible = false;
      r.note = "target latencies must be positive and finite";
      continue;
    }
    const auto& pipe = setup.pipeline(t.app);
    const auto placement = StaticPolicy::placement_for(t.policy, pipe.stages.size(), setup.topology);
    PointFit pf;
    pf.target = t;
    pf.fitted_s = analytic_latency(pipe, placement, t.tier, t.level, setup.topology);
    pf.rel_error = std::abs(pf.fitted_s - t.latency_s) / t.latency_s;
    const double lr = std::log(pf.fitted_s / t.latency_s);
    r.loss += lr * lr;
    errs.push_back(pf.rel_error);
    r.points.push_back(pf);
  }
  if (!errs.empty()) {
    r.median_rel_error = median(errs);
    r.max_rel_error = *std::max_element(errs.begin(), errs.end());
  }
  // Within each (app, level, tier) cell the policies must rank the same way.
  std::map<std::tuple<std::string, int, int>, std::vector<const PointFit*>> cells;
  for (const auto& p : r.points)
    cells[{p.target.app, static_cast<int>(p.target.level), static_cast<int>(p.target.tier)}].push_back(&p);
  for (const auto& [key, pts] : cells) {
    if (pts.size() < 2) continue;
    ++r.orderings_total;
    bool same = true;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        const bool t_less = pts[i]->target.latency_s < pts[j]->target.latency_s;
        const bool f_less = pts[i]->fitted_s < pts[j]->fitted_s;
        if (t_less != f_less) same = false;
      }
    if (same) ++r.orderings_matched;
  }
  return r;
}

namespace {

class Fitter {
 public:
  Fitter(const std::vector<Prepared>& prep, PlacementSetup& setup, const std::vector<std::string>& names)
      : prep_(prep), setup_(setup) {
    for (const auto& n : names) ptr_.push_back(locate(setup_, n));
    step_.assign(ptr_.size(), 0.5);
  }

  double loss() const { return loss_of(prep_, setup_); }

  // One pass of exact line searches along every coordinate (log scale).
  double sweep(double current) {
    for (std::size_t i = 0; i < ptr_.size(); ++i) current = line_search(i, current);
    return current;
  }

 private:
  double at(std::size_t i, double x) {
    *ptr_[i] = std::exp(x);
    return loss();
  }

  double line_search(std::size_t i, double f0) {
    const double x0 = std::log(*ptr_[i]);
    double h = step_[i];
    double a = x0, fa = f0;
    double b = x0 + h, fb = at(i, b);
    if (!(fb < fa)) {
      double c = x0 - h, fc = at(i, c);
      if (!(fc < fa)) {
        // Minimum inside [x0 - h, x0 + h].
        const auto [x, f] = golden(i, c, x0 + h, x0, f0);
        step_[i] = std::max(std::abs(x - x0) * 2.0, 1e-6);
        *ptr_[i] = std::exp(x);
        if (f < f0) return f;
        *ptr_[i] = std::exp(x0);
        return f0;
      }
      b = c;
      fb = fc;
      h = -h;
    }
    // Expand downhill until the loss rises again.
    double c = b + 1.618 * (b - a), fc = at(i, c);
    int guard = 0;
    while (fc < fb && guard++ < 60) {
      a = b;
      fa = fb;
      b = c;
      fb = fc;
      c = b + 1.618 * (b - a);
      fc = at(i, c);
    }
    const auto [x, f] = golden(i, std::min(a, c), std::max(a, c), b, fb);
    step_[i] = std::max(std::abs(x - x0), 1e-6);
    *ptr_[i] = std::exp(x);
    (void)fa;
    return f;
  }

  // Golden-section search on [lo, hi] given an interior point with its loss.
  std::pair<double, double> golden(std::size_t i, double lo, double hi, double best_x, double best_f) {
    constexpr double g = 0.3819660112501051;
    double x1 = lo + g * (hi - lo), x2 = hi - g * (hi - lo);
    double f1 = at(i, x1), f2 = at(i, x2);
    for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = lo + g * (hi - lo);
        f1 = at(i, x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = hi - g * (hi - lo);
        f2 = at(i, x2);
      }
    }
    if (f1 < best_f) best_x = x1, best_f = f1;
    if (f2 < best_f) best_x = x2, best_f = f2;
    return {best_x, best_f};
  }

  const std::vector<Prepared>& prep_;
  PlacementSetup& setup_;
  std::vector<double*> ptr_;
  std::vector<double> step_;
};

int descend(const std::vector<Prepared>& prep, PlacementSetup& setup, const std::vector<std::string>& names,
            const CalibrationOptions& opt) {
  if (names.empty()) return 0;
  Fitter f(prep, setup, names);
  double cur = f.loss();
  int sweeps = 0;
  while (sweeps < opt.max_sweeps) {
    const double next = f.sweep(cur);
    ++sweeps;
    const bool done = !(cur - next > opt.tolerance);
    cur = next;
    if (done) break;
  }
  return sweeps;
}

}  // namespace

CalibrationReport calibrate(const std::vector<LatencyTarget>& targets, const PlacementSetup& initial,
                            const CalibrationOptions& options) {
  initial.topology.validate();
  for (const auto& p : initial.pipelines) p.validate();
  auto base = evaluate_fit(targets, initial);
  if (!base.feasible || targets.empty()) {
    if (targets.empty()) {
      base.feasible = false;
      base.note = "no targets";
    }
    return base;
  }
  std::vector<std::string> names = options.free;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  {
    PlacementSetup probe = initial;
    for (const auto& n : names) {
      if (!(*locate(probe, n) > 0.0))
        throw InvalidArgument("free parameter '" + n + "' must start positive to be fitted in log space");
    }
  }
  // Keep the caller's order for the sweep; sorting was only for dedup.
  std::vector<std::string> order;
  for (const auto& n : options.free)
    if (std::find(order.begin(), order.end(), n) == order.end()) order.push_back(n);

  const auto prep = prepare(targets, initial);
  PlacementSetup best = initial;
  double best_loss = loss_of(prep, best);
  int sweeps = 0;
  for (int r = 0; r <= options.restarts && !order.empty(); ++r) {
    PlacementSetup s = initial;
    if (r > 0) {
      Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(r)));
      for (const auto& n : order) *locate(s, n) *= std::exp(rng.normal(0.0, 0.7));
      if (!admissible(s)) continue;
    }
    sweeps += descend(prep, s, order, options);
    const double l = loss_of(prep, s);
    if (l < best_loss) {
      best_loss = l;
      best = s;
    }
  }

  // Whole bytes. When every byte count and bandwidth is free, the model is
  // invariant under scaling all of them together, so scale up by a power of
  // two first to make rounding negligible.
  std::vector<std::string> bytes, rest;
  for (const auto& n : order) (is_byte_parameter(n) ? bytes : rest).push_back(n);
  if (!bytes.empty()) {
    const auto all = parameter_names(best);
    bool scalable = true;
    for (const auto& n : all)
      if ((is_byte_parameter(n) || is_bandwidth_parameter(n)) &&
          std::find(order.begin(), order.end(), n) == order.end())
        scalable = false;
    if (scalable) {
      double smallest = std::numeric_limits<double>::infinity();
      for (const auto& n : bytes) smallest = std::min(smallest, *locate(best, n));
      double k = 1.0;
      while (smallest * k < 1e6 && k < 0x1.0p40) k *= 2.0;
      for (const auto& n : all)
        if (is_byte_parameter(n) || is_bandwidth_parameter(n)) *locate(best, n) *= k;
    }
    for (const auto& n : bytes) {
      double* p = locate(best, n);
      *p = std::max(1.0, std::round(*p));
    }
    if (!rest.empty()) sweeps += descend(prep, best, rest, options);
  }

  auto report = evaluate_fit(targets, best);
  report.sweeps = sweeps;
  return report;
}

}  // namespace ehsim::edgesim
