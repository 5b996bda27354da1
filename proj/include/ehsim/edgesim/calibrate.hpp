#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ehsim/edgesim/model.hpp"

namespace ehsim::edgesim {

// One measured latency: an app under a placement policy at a sampling level
// and bandwidth tier. Policies are StaticPolicy names.
struct LatencyTarget {
  std::string app;
  SamplingLevel level = SamplingLevel::kHigh;
  BandwidthTier tier = BandwidthTier::kLow;
  std::string policy;
  double latency_s = 0.0;
};

// The 54 reference placement latencies (stress, fall, pain; Local is the
// edge node of a two-layer edge/cloud topology).
std::vector<LatencyTarget> reference_latency_targets();

struct PlacementSetup {
  Topology topology;
  std::vector<PipelineSpec> pipelines;

  const PipelineSpec& pipeline(const std::string& app) const;
  PipelineSpec& pipeline(const std::string& app);
};

// Uncalibrated starting point: edge and cloud layers, three-stage
// pre-processing / feature / classification pipelines with generic costs.
PlacementSetup default_placement_setup();

// Free-parameter names:
//   node.<i>.speed, link.<i>.bw.<tier>, link.<i>.prop,
//   <app>.input.<level>, <app>.<stage>.mops.<level>, <app>.<stage>.out.<level>
std::vector<std::string> parameter_names(const PlacementSetup& setup);
double get_parameter(const PlacementSetup& setup, const std::string& name);
void set_parameter(PlacementSetup& setup, const std::string& name, double value);

// Parameters worth fitting against `targets`: everything that moves some
// target latency, minus one anchor per exact symmetry (the lowest node's
// speed against all compute costs, each link's high-tier bandwidth against
// byte counts) and minus the first stage's compute, which always shares a
// node with the second under the named policies.
std::vector<std::string> default_free_parameters(const std::vector<LatencyTarget>& targets,
                                                 const PlacementSetup& setup);

struct CalibrationOptions {
  std::vector<std::string> free;  // empty: nothing is fitted
  int max_sweeps = 400;
  double tolerance = 1e-14;  // stop when a sweep improves the loss by less than this
  int restarts = 3;          // extra seeded starts beyond the given one
  std::uint64_t seed = 1;
};

struct PointFit {
  LatencyTarget target;
  double fitted_s = 0.0;
  double rel_error = 0.0;
};

struct CalibrationReport {
  PlacementSetup fitted;
  std::vector<PointFit> points;
  double loss = 0.0;  // sum of squared log ratios
  double median_rel_error = 0.0;
  double max_rel_error = 0.0;
  std::size_t orderings_matched = 0;
  std::size_t orderings_total = 0;
  int sweeps = 0;
  bool feasible = true;
  std::string note;
};

// Latency of every target under `setup`, with errors and ordering checks.
CalibrationReport evaluate_fit(const std::vector<LatencyTarget>& targets, const PlacementSetup& setup);

// Coordinate descent on log parameters minimizing squared log-latency error.
// Byte counts are rounded to whole bytes and the remaining parameters
// refitted. Infeasible targets are reported in the result, not thrown.
CalibrationReport calibrate(const std::vector<LatencyTarget>& targets, const PlacementSetup& initial,
                            const CalibrationOptions& options);

}  // namespace ehsim::edgesim
