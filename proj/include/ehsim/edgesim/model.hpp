#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ehsim::edgesim {

enum class LayerKind { kDevice, kEdge, kCloud };
std::string to_string(LayerKind k);
LayerKind parse_layer(const std::string& text);

enum class SamplingLevel { kHigh = 0, kLow = 1 };
std::string to_string(SamplingLevel s);
SamplingLevel parse_sampling(const std::string& text);

enum class BandwidthTier { kLow = 0, kMedium = 1, kHigh = 2 };
std::string to_string(BandwidthTier t);
BandwidthTier parse_tier(const std::string& text);
inline constexpr BandwidthTier kAllTiers[] = {BandwidthTier::kLow, BandwidthTier::kMedium,
                                              BandwidthTier::kHigh};
inline constexpr SamplingLevel kAllSampling[] = {SamplingLevel::kHigh, SamplingLevel::kLow};

// Values indexed by SamplingLevel.
using PerSampling = std::array<double, 2>;

struct StageSpec {
  std::string name;
  PerSampling compute_mops{};
  PerSampling output_bytes{};  // whole bytes
};

struct PipelineSpec {
  std::string app;
  std::vector<StageSpec> stages;
  PerSampling input_bytes{};

  // At least one stage, positive costs, integral byte counts, and high
  // sampling producing more input than low.
  void validate() const;
};

struct NodeSpec {
  LayerKind layer = LayerKind::kEdge;
  double speed_mops_per_s = 1.0;
  double energy_nj_per_mop = 0.0;
  // One private instance per user (end devices) instead of a shared node.
  bool per_user = false;
};

// Link from layer i to layer i + 1 of a topology.
struct LinkSpec {
  std::array<double, 3> bandwidth_mbps{1.0, 2.0, 3.0};  // indexed by BandwidthTier
  double propagation_ms = 0.0;
  double tx_energy_nj_per_byte = 0.0;
};

// Ordered layers, lowest first. Input data originates at layer 0 and a
// request only ever moves upward.
struct Topology {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;  // links[i] joins nodes[i] and nodes[i + 1]

  void validate() const;
  std::size_t layers() const { return nodes.size(); }
  // Index of the first node of `kind`; throws if absent.
  std::size_t index_of(LayerKind kind) const;
};

// Stage -> layer index, non-decreasing along the pipeline.
using Placement = std::vector<int>;

std::string to_string(const Placement& p, const Topology& topo);
void validate_placement(const Placement& p, const PipelineSpec& pipe, const Topology& topo);

// All monotone placements, in lexicographic order.
std::vector<Placement> enumerate_placements(std::size_t stages, std::size_t layers);

// Every stage on layer `layer`.
Placement uniform_placement(std::size_t stages, int layer);

// Unloaded latency: compute on the assigned nodes plus, at each layer
// crossing, serialization over the link and its propagation delay.
double analytic_latency(const PipelineSpec& pipe, const Placement& placement, BandwidthTier tier,
                        SamplingLevel level, const Topology& topo);

// Bytes carried over each link (index = lower layer) by one request.
std::vector<double> crossing_bytes(const PipelineSpec& pipe, const Placement& placement,
                                   SamplingLevel level, std::size_t layers);

}  // namespace ehsim::edgesim
