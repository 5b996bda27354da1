#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ehsim/common/csv.hpp"
#include "ehsim/edgesim/model.hpp"

namespace ehsim::edgesim {

// Internal clock unit. One tick is a picosecond.
using Ticks = std::int64_t;
inline constexpr double kTicksPerSecond = 1e12;
Ticks to_ticks(double seconds);
inline double to_seconds(Ticks t) { return static_cast<double>(t) / kTicksPerSecond; }

enum class ArrivalKind { kPeriodic, kPoisson };
std::string to_string(ArrivalKind k);
ArrivalKind parse_arrival(const std::string& text);

struct ArrivalSpec {
  ArrivalKind kind = ArrivalKind::kPeriodic;
  double period_s = 1.0;
  // Periodic only: each arrival moves by period * jitter * U(-0.5, 0.5).
  double jitter = 0.1;
};

struct SimConfig {
  Topology topology;
  std::vector<PipelineSpec> pipelines;
  int users = 1;
  // App per user; empty means every user runs pipelines[0].
  std::vector<std::string> user_apps;
  ArrivalSpec arrival;
  BandwidthTier tier = BandwidthTier::kMedium;
  SamplingLevel sampling = SamplingLevel::kHigh;
  double duration_s = 60.0;
  // false: run until every request completes. true: stop at duration_s and
  // report the rest as in flight.
  bool stop_at_horizon = false;
  // Observed utilization of a shared layer: work already committed to its
  // node and to the shared link feeding it, divided by this window, capped at 1.
  double utilization_window_s = 0.2;
  // Work already queued on shared nodes at t = 0, in seconds.
  std::map<LayerKind, double> preload_s;

  void validate() const;
  const PipelineSpec& pipeline(const std::string& app) const;
  const PipelineSpec& pipeline_of_user(int user) const;
};

struct Snapshot {
  double time_s = 0.0;
  int active_users = 0;  // users with a request in flight, the arriving one included
  int total_users = 0;
  double edge_utilization = 0.0;
  double cloud_utilization = 0.0;
  BandwidthTier tier = BandwidthTier::kMedium;
  std::string app;
};

struct RequestRecord {
  std::uint64_t id = 0;
  int user = 0;
  std::string app;
  Placement placement;
  Ticks arrival = 0;
  Ticks completion = -1;
  std::vector<Ticks> stage_start;
  std::vector<Ticks> stage_end;
  Ticks queue_wait = 0;
  Ticks transfer = 0;
  Ticks compute = 0;
  double bytes_moved = 0.0;
  double energy_nj = 0.0;

  bool completed() const { return completion >= 0; }
  double response_time_s() const { return to_seconds(completion - arrival); }
};

struct SimTrace {
  std::vector<RequestRecord> requests;  // in arrival order
  Ticks last_event = 0;

  std::size_t completed() const;
  double mean_response_s() const;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Placement choose(const Snapshot& state, const PipelineSpec& pipe) = 0;
  // Called when a request finishes, with the system state at that instant.
  virtual void completed(const RequestRecord&, const Snapshot&) {}
};

// Every stage pinned by a fixed rule. Valid names: device-only, edge-only,
// cloud-only, partial (all but the last stage on the edge, or the lowest
// layer without an edge, and the last stage on the cloud).
class StaticPolicy : public Policy {
 public:
  StaticPolicy(std::string name, const Topology& topo);
  Placement choose(const Snapshot& state, const PipelineSpec& pipe) override;
  const std::string& name() const { return name_; }

  static const std::vector<std::string>& names();
  static Placement placement_for(const std::string& name, std::size_t stages, const Topology& topo);

 private:
  std::string name_;
  const Topology* topo_;
};

SimTrace simulate(const SimConfig& config, Policy& policy, std::uint64_t seed);

struct EnergyReport {
  std::vector<double> compute_nj;
  std::vector<double> tx_nj;
  double compute_total_nj = 0.0;
  double tx_total_nj = 0.0;
  double total_nj() const { return compute_total_nj + tx_total_nj; }
};

// Recomputes energy from the trace's placements and the configured specs.
// Only completed requests contribute.
EnergyReport energy_of(const SimTrace& trace, const SimConfig& config);

// Columns: request_id,user_id,app,placement,arrival_us,completion_us,
// response_us,queue_wait_us,transfer_us,compute_us,stage_start_us,
// stage_end_us,bytes_moved,energy_nj,completed. Times are floor microseconds.
void write_trace_csv(const std::filesystem::path& path, const SimTrace& trace, const Topology& topo,
                     const FileHeader* header = nullptr);

}  // namespace ehsim::edgesim
