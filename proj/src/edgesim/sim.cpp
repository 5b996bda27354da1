#include "ehsim/edgesim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

#include "ehsim/common/error.hpp"
#include "ehsim/common/rng.hpp"

namespace ehsim::edgesim {

Ticks to_ticks(double seconds) {
  if (!std::isfinite(seconds) || seconds < 0.0 || seconds > 9.0e6)
    throw InvalidArgument("duration outside the simulator's clock range");
  return static_cast<Ticks>(std::llround(seconds * kTicksPerSecond));
}

std::string to_string(ArrivalKind k) { return k == ArrivalKind::kPeriodic ? "periodic" : "poisson"; }

ArrivalKind parse_arrival(const std::string& text) {
  if (text == "periodic") return ArrivalKind::kPeriodic;
  if (text == "poisson") return ArrivalKind::kPoisson;
  throw InvalidArgument("unknown arrival process '" + text + "' (expected periodic or poisson)");
}

void SimConfig::validate() const {
  topology.validate();
  if (pipelines.empty()) throw InvalidArgument("simulation needs at least one pipeline");
  for (const auto& p : pipelines) p.validate();
  if (users < 1) throw InvalidArgument("simulation needs at least one user");
  if (!user_apps.empty() && user_apps.size() != static_cast<std::size_t>(users))
    throw InvalidArgument("user_apps must name one app per user");
  for (const auto& a : user_apps) pipeline(a);
  if (!(duration_s > 0.0)) throw InvalidArgument("simulation duration must be positive");
  to_ticks(duration_s);
  if (!(arrival.period_s > 0.0)) throw InvalidArgument("arrival period must be positive");
  if (arrival.jitter < 0.0 || arrival.jitter >= 1.0) throw InvalidArgument("arrival jitter must be in [0, 1)");
  if (!(utilization_window_s > 0.0)) throw InvalidArgument("utilization window must be positive");
  for (const auto& [layer, s] : preload_s) {
    if (s < 0.0) throw InvalidArgument("preload must be non-negative");
    const auto idx = topology.index_of(layer);
    if (topology.nodes[idx].per_user) throw InvalidArgument("preload applies to shared nodes only");
  }
}

const PipelineSpec& SimConfig::pipeline(const std::string& app) const {
  for (const auto& p : pipelines)
    if (p.app == app) return p;
  throw InvalidArgument("no pipeline for app '" + app + "'");
}

const PipelineSpec& SimConfig::pipeline_of_user(int user) const {
  return user_apps.empty() ? pipelines.front() : pipeline(user_apps[static_cast<std::size_t>(user)]);
}

std::size_t SimTrace::completed() const {
  return static_cast<std::size_t>(
      std::count_if(requests.begin(), requests.end(), [](const RequestRecord& r) { return r.completed(); }));
}

double SimTrace::mean_response_s() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : requests)
    if (r.completed()) {
      sum += r.response_time_s();
      ++n;
    }
  if (n == 0) throw RuntimeError("trace has no completed requests");
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------- policies

const std::vector<std::string>& StaticPolicy::names() {
  static const std::vector<std::string> n = {"device-only", "edge-only", "cloud-only", "partial"};
  return n;
}

Placement StaticPolicy::placement_for(const std::string& name, std::size_t stages, const Topology& topo) {
  if (name == "device-only") return uniform_placement(stages, static_cast<int>(topo.index_of(LayerKind::kDevice)));
  if (name == "edge-only") return uniform_placement(stages, static_cast<int>(topo.index_of(LayerKind::kEdge)));
  if (name == "cloud-only") return uniform_placement(stages, static_cast<int>(topo.index_of(LayerKind::kCloud)));
  if (name == "partial") {
    int low = 0;
    for (std::size_t i = 0; i < topo.nodes.size(); ++i)
      if (topo.nodes[i].layer == LayerKind::kEdge) low = static_cast<int>(i);
    Placement p(stages, low);
    p.back() = static_cast<int>(topo.index_of(LayerKind::kCloud));
    return p;
  }
  std::string valid;
  for (const auto& n : names()) valid += (valid.empty() ? "" : ", ") + n;
  throw InvalidArgument("unknown policy '" + name + "'; valid policies: " + valid + ", rl");
}

StaticPolicy::StaticPolicy(std::string name, const Topology& topo) : name_(std::move(name)), topo_(&topo) {
  placement_for(name_, 1, topo);
}

Placement StaticPolicy::choose(const Snapshot&, const PipelineSpec& pipe) {
  return placement_for(name_, pipe.stages.size(), *topo_);
}

// ---------------------------------------------------------------- energy

namespace {

struct RequestEnergy {
  double compute = 0.0;
  double tx = 0.0;
};

RequestEnergy request_energy(const PipelineSpec& pipe, const Placement& p, SamplingLevel level,
                             const Topology& topo) {
  RequestEnergy e;
  const auto s = static_cast<std::size_t>(level);
  for (std::size_t k = 0; k < pipe.stages.size(); ++k)
    e.compute += pipe.stages[k].compute_mops[s] * topo.nodes[static_cast<std::size_t>(p[k])].energy_nj_per_mop;
  const auto bytes = crossing_bytes(pipe, p, level, topo.layers());
  for (std::size_t l = 0; l < bytes.size(); ++l) e.tx += bytes[l] * topo.links[l].tx_energy_nj_per_byte;
  return e;
}

}  // namespace

EnergyReport energy_of(const SimTrace& trace, const SimConfig& config) {
  EnergyReport r;
  for (const auto& req : trace.requests) {
    if (!req.completed()) continue;
    const auto e = request_energy(config.pipeline(req.app), req.placement, config.sampling, config.topology);
    r.compute_nj.push_back(e.compute);
    r.tx_nj.push_back(e.tx);
    r.compute_total_nj += e.compute;
    r.tx_total_nj += e.tx;
  }
  return r;
}

// ---------------------------------------------------------------- simulator

namespace {

enum class TaskKind { kTransfer, kPropagation, kCompute };

struct Task {
  TaskKind kind;
  std::size_t resource = 0;  // unused for propagation
  Ticks duration = 0;
  std::size_t stage = 0;
};

struct Job {
  std::int64_t request = -1;  // -1: preloaded background work
  Ticks service = 0;
  Ticks enqueued = 0;
};

struct Resource {
  bool busy = false;
  Job current;
  Ticks busy_until = 0;
  Ticks queued = 0;
  std::deque<Job> queue;
};

enum class EventKind { kArrival = 0, kServiceDone = 1, kDelayDone = 2 };

struct Event {
  Ticks t;
  std::uint64_t seq;
  EventKind kind;
  std::int64_t a;  // user, resource or request

  bool operator>(const Event& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

class Engine {
 public:
  Engine(const SimConfig& cfg, Policy& policy, std::uint64_t seed) : cfg_(cfg), policy_(policy), seed_(seed) {
    const auto& topo = cfg_.topology;
    const auto users = static_cast<std::size_t>(cfg_.users);
    for (std::size_t l = 0; l < topo.layers(); ++l) {
      std::vector<std::size_t> ids;
      const std::size_t copies = topo.nodes[l].per_user ? users : 1;
      for (std::size_t u = 0; u < copies; ++u) ids.push_back(add_resource());
      node_res_.push_back(ids);
    }
    // A link is private to a user when its lower end is a per-user node.
    for (std::size_t l = 0; l + 1 < topo.layers(); ++l) {
      std::vector<std::size_t> ids;
      const std::size_t copies = topo.nodes[l].per_user ? users : 1;
      for (std::size_t u = 0; u < copies; ++u) ids.push_back(add_resource());
      link_res_.push_back(ids);
    }
    inflight_.assign(users, 0);
  }

  SimTrace run() {
    const auto horizon = to_ticks(cfg_.duration_s);
    for (const auto& [layer, s] : cfg_.preload_s) {
      const Ticks t = to_ticks(s);
      if (t > 0) enqueue(node_res_[cfg_.topology.index_of(layer)][0], Job{-1, t, 0});
    }
    for (int u = 0; u < cfg_.users; ++u) schedule_arrivals(u, horizon);

    while (!events_.empty()) {
      const Event e = events_.top();
      if (cfg_.stop_at_horizon && e.t > horizon) break;
      events_.pop();
      if (e.t < now_) throw RuntimeError("simulator clock moved backwards");
      now_ = e.t;
      trace_.last_event = now_;
      switch (e.kind) {
        case EventKind::kArrival:
          arrive(static_cast<int>(e.a));
          break;
        case EventKind::kServiceDone:
          service_done(static_cast<std::size_t>(e.a));
          break;
        case EventKind::kDelayDone:
          advance(static_cast<std::size_t>(e.a));
          break;
      }
    }
    return std::move(trace_);
  }

 private:
  std::size_t add_resource() {
    resources_.emplace_back();
    return resources_.size() - 1;
  }

  void push(Ticks t, EventKind kind, std::int64_t a) { events_.push(Event{t, seq_++, kind, a}); }

  void schedule_arrivals(int user, Ticks horizon) {
    Rng rng(derive_seed(derive_seed(seed_, "arrivals"), static_cast<std::uint64_t>(user)));
    const double period = cfg_.arrival.period_s;
    const double phase = rng.uniform(0.0, period);
    double t = phase;
    for (std::uint64_t k = 0;; ++k) {
      double at;
      if (cfg_.arrival.kind == ArrivalKind::kPeriodic) {
        at = phase + static_cast<double>(k) * period + period * cfg_.arrival.jitter * (rng.uniform() - 0.5);
        at = std::max(at, 0.0);
      } else {
        t += rng.exponential(1.0 / period);
        at = t - phase;
      }
      const Ticks tk = to_ticks(at);
      if (tk >= horizon) break;
      push(tk, EventKind::kArrival, user);
    }
  }

  Snapshot snapshot(const std::string& app, int arriving_user) const {
    Snapshot s;
    s.time_s = to_seconds(now_);
    s.total_users = cfg_.users;
    for (std::size_t u = 0; u < inflight_.size(); ++u)
      if (inflight_[u] > 0 || static_cast<int>(u) == arriving_user) ++s.active_users;
    s.edge_utilization = utilization(LayerKind::kEdge);
    s.cloud_utilization = utilization(LayerKind::kCloud);
    s.tier = cfg_.tier;
    s.app = app;
    return s;
  }

  double utilization(LayerKind kind) const {
    const auto& topo = cfg_.topology;
    const auto pending = [&](std::size_t res) {
      const auto& r = resources_[res];
      return (r.busy ? r.busy_until - now_ : 0) + r.queued;
    };
    for (std::size_t l = 0; l < topo.layers(); ++l) {
      if (topo.nodes[l].layer != kind || topo.nodes[l].per_user) continue;
      Ticks work = pending(node_res_[l][0]);
      if (l > 0 && link_res_[l - 1].size() == 1) work += pending(link_res_[l - 1][0]);
      return std::min(1.0, to_seconds(work) / cfg_.utilization_window_s);
    }
    return 0.0;
  }

  void arrive(int user) {
    const auto& pipe = cfg_.pipeline_of_user(user);
    const auto state = snapshot(pipe.app, user);
    Placement p = policy_.choose(state, pipe);
    validate_placement(p, pipe, cfg_.topology);

    RequestRecord rec;
    rec.id = trace_.requests.size();
    rec.user = user;
    rec.app = pipe.app;
    rec.placement = p;
    rec.arrival = now_;
    rec.stage_start.assign(pipe.stages.size(), -1);
    rec.stage_end.assign(pipe.stages.size(), -1);
    const auto bytes = crossing_bytes(pipe, p, cfg_.sampling, cfg_.topology.layers());
    for (double b : bytes) rec.bytes_moved += b;
    const auto e = request_energy(pipe, p, cfg_.sampling, cfg_.topology);
    rec.energy_nj = e.compute + e.tx;

    std::vector<Task> tasks;
    const auto s = static_cast<std::size_t>(cfg_.sampling);
    const auto b = static_cast<std::size_t>(cfg_.tier);
    const auto u = static_cast<std::size_t>(user);
    int cur = 0;
    double carried = pipe.input_bytes[s];
    for (std::size_t k = 0; k < pipe.stages.size(); ++k) {
      for (int l = cur; l < p[k]; ++l) {
        const auto li = static_cast<std::size_t>(l);
        const auto& link = cfg_.topology.links[li];
        const auto& ids = link_res_[li];
        tasks.push_back({TaskKind::kTransfer, ids[ids.size() == 1 ? 0 : u],
                         to_ticks(carried * 8.0 / (link.bandwidth_mbps[b] * 1e6)), k});
        tasks.push_back({TaskKind::kPropagation, 0, to_ticks(link.propagation_ms * 1e-3), k});
      }
      cur = p[k];
      const auto ni = static_cast<std::size_t>(cur);
      const auto& ids = node_res_[ni];
      tasks.push_back({TaskKind::kCompute, ids[ids.size() == 1 ? 0 : u],
                       to_ticks(pipe.stages[k].compute_mops[s] / cfg_.topology.nodes[ni].speed_mops_per_s), k});
      carried = pipe.stages[k].output_bytes[s];
    }

    trace_.requests.push_back(std::move(rec));
    tasks_.push_back(std::move(tasks));
    next_task_.push_back(0);
    ++inflight_[u];
    start_next(trace_.requests.size() - 1);
  }

  void start_next(std::size_t req) {
    auto& tasks = tasks_[req];
    auto& idx = next_task_[req];
    // Zero-length propagation is skipped without an event.
    while (idx < tasks.size() && tasks[idx].kind == TaskKind::kPropagation && tasks[idx].duration == 0) ++idx;
    if (idx == tasks.size()) {
      finish(req);
      return;
    }
    const auto& t = tasks[idx];
    if (t.kind == TaskKind::kPropagation) {
      push(now_ + t.duration, EventKind::kDelayDone, static_cast<std::int64_t>(req));
      return;
    }
    enqueue(t.resource, Job{static_cast<std::int64_t>(req), t.duration, now_});
  }

  void advance(std::size_t req) {
    ++next_task_[req];
    start_next(req);
  }

  void enqueue(std::size_t res, Job job) {
    auto& r = resources_[res];
    if (!r.busy) {
      begin_service(res, job);
    } else {
      r.queued += job.service;
      r.queue.push_back(job);
    }
  }

  void begin_service(std::size_t res, const Job& job) {
    auto& r = resources_[res];
    r.busy = true;
    r.current = job;
    r.busy_until = now_ + job.service;
    if (job.request >= 0) {
      const auto req = static_cast<std::size_t>(job.request);
      auto& rec = trace_.requests[req];
      rec.queue_wait += now_ - job.enqueued;
      const auto& task = tasks_[req][next_task_[req]];
      if (task.kind == TaskKind::kCompute) rec.stage_start[task.stage] = now_;
    }
    push(r.busy_until, EventKind::kServiceDone, static_cast<std::int64_t>(res));
  }

  void service_done(std::size_t res) {
    auto& r = resources_[res];
    const Job done = r.current;
    r.busy = false;
    if (!r.queue.empty()) {
      const Job next = r.queue.front();
      r.queue.pop_front();
      r.queued -= next.service;
      begin_service(res, next);
    }
    if (done.request < 0) return;
    const auto req = static_cast<std::size_t>(done.request);
    auto& rec = trace_.requests[req];
    const auto& task = tasks_[req][next_task_[req]];
    if (task.kind == TaskKind::kCompute) {
      rec.compute += done.service;
      rec.stage_end[task.stage] = now_;
    } else {
      rec.transfer += done.service;
    }
    advance(req);
  }

  void finish(std::size_t req) {
    auto& rec = trace_.requests[req];
    rec.completion = now_;
    --inflight_[static_cast<std::size_t>(rec.user)];
    tasks_[req].clear();
    tasks_[req].shrink_to_fit();
    policy_.completed(rec, snapshot(rec.app, -1));
  }

  const SimConfig& cfg_;
  Policy& policy_;
  std::uint64_t seed_;
  std::vector<Resource> resources_;
  std::vector<std::vector<std::size_t>> node_res_;
  std::vector<std::vector<std::size_t>> link_res_;
  std::vector<int> inflight_;
  std::vector<std::vector<Task>> tasks_;
  std::vector<std::size_t> next_task_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  Ticks now_ = 0;
  SimTrace trace_;
};

}  // namespace

SimTrace simulate(const SimConfig& config, Policy& policy, std::uint64_t seed) {
  config.validate();
  Engine engine(config, policy, seed);
  return engine.run();
}

void write_trace_csv(const std::filesystem::path& path, const SimTrace& trace, const Topology& topo,
                     const FileHeader* header) {
  CsvWriter w(path,
              {"request_id", "user_id", "app", "placement", "arrival_us", "completion_us", "response_us",
               "queue_wait_us", "transfer_us", "compute_us", "stage_start_us", "stage_end_us", "bytes_moved",
               "energy_nj", "completed"},
              header);
  const auto us = [](Ticks t) { return format_number(static_cast<std::int64_t>(t / 1000000)); };
  const auto join = [&](const std::vector<Ticks>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ';';
      if (v[i] >= 0) out += us(v[i]);
    }
    return out;
  };
  for (const auto& r : trace.requests) {
    w.cell(static_cast<std::int64_t>(r.id)).cell(r.user).cell(r.app).cell(to_string(r.placement, topo));
    w.cell(us(r.arrival));
    if (r.completed()) {
      w.cell(us(r.completion)).cell(us(r.completion - r.arrival));
    } else {
      w.cell("").cell("");
    }
    w.cell(us(r.queue_wait)).cell(us(r.transfer)).cell(us(r.compute));
    w.cell(join(r.stage_start)).cell(join(r.stage_end));
    w.cell(r.bytes_moved).cell(r.energy_nj).cell(r.completed() ? 1 : 0);
    w.end_row();
  }
}

}  // namespace ehsim::edgesim
