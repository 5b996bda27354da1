#include "ehsim/edgesim/model.hpp"

#include <cmath>

#include "ehsim/common/error.hpp"

namespace ehsim::edgesim {

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kDevice:
      return "device";
    case LayerKind::kEdge:
      return "edge";
    case LayerKind::kCloud:
      return "cloud";
  }
  return "?";
}

LayerKind parse_layer(const std::string& text) {
  if (text == "device") return LayerKind::kDevice;
  if (text == "edge") return LayerKind::kEdge;
  if (text == "cloud") return LayerKind::kCloud;
  throw InvalidArgument("unknown layer '" + text + "' (expected device, edge or cloud)");
}

std::string to_string(SamplingLevel s) { return s == SamplingLevel::kHigh ? "high" : "low"; }

SamplingLevel parse_sampling(const std::string& text) {
  if (text == "high") return SamplingLevel::kHigh;
  if (text == "low") return SamplingLevel::kLow;
  throw InvalidArgument("unknown sampling level '" + text + "' (expected high or low)");
}

std::string to_string(BandwidthTier t) {
  switch (t) {
    case BandwidthTier::kLow:
      return "low";
    case BandwidthTier::kMedium:
      return "medium";
    case BandwidthTier::kHigh:
      return "high";
  }
  return "?";
}

BandwidthTier parse_tier(const std::string& text) {
  if (text == "low") return BandwidthTier::kLow;
  if (text == "medium") return BandwidthTier::kMedium;
  if (text == "high") return BandwidthTier::kHigh;
  throw InvalidArgument("unknown bandwidth tier '" + text + "' (expected low, medium or high)");
}

namespace {

bool whole(double b) { return b >= 0.0 && std::floor(b) == b; }

}  // namespace

void PipelineSpec::validate() const {
  if (stages.empty()) throw InvalidArgument("pipeline '" + app + "' has no stages");
  for (const auto& s : stages) {
    for (double m : s.compute_mops)
      if (!(m > 0.0) || !std::isfinite(m))
        throw InvalidArgument("stage '" + s.name + "' of '" + app + "' needs positive compute");
    for (double b : s.output_bytes)
      if (!whole(b)) throw InvalidArgument("stage '" + s.name + "' output bytes must be whole and >= 0");
  }
  for (double b : input_bytes)
    if (!whole(b)) throw InvalidArgument("pipeline '" + app + "' input bytes must be whole and >= 0");
  if (!(input_bytes[0] > input_bytes[1]))
    throw InvalidArgument("pipeline '" + app + "': high sampling must produce more input than low");
}

void Topology::validate() const {
  if (nodes.empty()) throw InvalidArgument("topology has no nodes");
  if (links.size() + 1 != nodes.size())
    throw InvalidArgument("topology needs exactly one link between consecutive layers");
  for (const auto& n : nodes) {
    if (!(n.speed_mops_per_s > 0.0)) throw InvalidArgument("node speed must be positive");
    if (n.energy_nj_per_mop < 0.0) throw InvalidArgument("node energy must be non-negative");
  }
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (static_cast<int>(nodes[i].layer) <= static_cast<int>(nodes[i - 1].layer))
      throw InvalidArgument("topology layers must be ordered device < edge < cloud");
    if (nodes[i].per_user && !nodes[i - 1].per_user)
      throw InvalidArgument("a per-user node cannot sit above a shared node");
  }
  for (const auto& l : links) {
    for (double b : l.bandwidth_mbps)
      if (!(b > 0.0)) throw InvalidArgument("link bandwidth must be positive");
    if (!(l.bandwidth_mbps[0] < l.bandwidth_mbps[1] && l.bandwidth_mbps[1] < l.bandwidth_mbps[2]))
      throw InvalidArgument("bandwidth tiers must satisfy low < medium < high");
    if (l.propagation_ms < 0.0 || l.tx_energy_nj_per_byte < 0.0)
      throw InvalidArgument("link propagation and energy must be non-negative");
  }
}

std::size_t Topology::index_of(LayerKind kind) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].layer == kind) return i;
  throw InvalidArgument("topology has no " + to_string(kind) + " layer");
}

std::string to_string(const Placement& p, const Topology& topo) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += '>';
    const auto idx = static_cast<std::size_t>(p[i]);
    out += idx < topo.nodes.size() ? to_string(topo.nodes[idx].layer) : "?";
  }
  return out;
}

void validate_placement(const Placement& p, const PipelineSpec& pipe, const Topology& topo) {
  if (p.size() != pipe.stages.size())
    throw InvalidArgument("placement has " + std::to_string(p.size()) + " entries for " +
                          std::to_string(pipe.stages.size()) + " stages");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0 || static_cast<std::size_t>(p[i]) >= topo.layers())
      throw InvalidArgument("placement names a layer outside the topology");
    if (i > 0 && p[i] < p[i - 1]) throw InvalidArgument("placement is not monotone");
  }
}

std::vector<Placement> enumerate_placements(std::size_t stages, std::size_t layers) {
  if (stages == 0 || layers == 0) throw InvalidArgument("need at least one stage and one layer");
  std::vector<Placement> out;
  Placement cur(stages, 0);
  while (true) {
    out.push_back(cur);
    // Next non-decreasing sequence in lexicographic order.
    std::size_t i = stages;
    while (i > 0 && cur[i - 1] == static_cast<int>(layers) - 1) --i;
    if (i == 0) break;
    const int v = cur[i - 1] + 1;
    for (std::size_t j = i - 1; j < stages; ++j) cur[j] = v;
  }
  return out;
}

Placement uniform_placement(std::size_t stages, int layer) { return Placement(stages, layer); }

std::vector<double> crossing_bytes(const PipelineSpec& pipe, const Placement& placement,
                                   SamplingLevel level, std::size_t layers) {
  const auto s = static_cast<std::size_t>(level);
  std::vector<double> out(layers > 0 ? layers - 1 : 0, 0.0);
  int cur = 0;
  double bytes = pipe.input_bytes[s];
  for (std::size_t k = 0; k < pipe.stages.size(); ++k) {
    for (int l = cur; l < placement[k]; ++l) out[static_cast<std::size_t>(l)] += bytes;
    cur = placement[k];
    bytes = pipe.stages[k].output_bytes[s];
  }
  return out;
}

double analytic_latency(const PipelineSpec& pipe, const Placement& placement, BandwidthTier tier,
                        SamplingLevel level, const Topology& topo) {
  validate_placement(placement, pipe, topo);
  const auto s = static_cast<std::size_t>(level);
  const auto b = static_cast<std::size_t>(tier);
  double t = 0.0;
  int cur = 0;
  double bytes = pipe.input_bytes[s];
  for (std::size_t k = 0; k < pipe.stages.size(); ++k) {
    for (int l = cur; l < placement[k]; ++l) {
      const auto& link = topo.links[static_cast<std::size_t>(l)];
      t += bytes * 8.0 / (link.bandwidth_mbps[b] * 1e6) + link.propagation_ms * 1e-3;
    }
    cur = placement[k];
    t += pipe.stages[k].compute_mops[s] / topo.nodes[static_cast<std::size_t>(cur)].speed_mops_per_s;
    bytes = pipe.stages[k].output_bytes[s];
  }
  return t;
}

}  // namespace ehsim::edgesim
