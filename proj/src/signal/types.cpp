#include "ehsim/signal/types.hpp"

#include <array>

#include "ehsim/common/error.hpp"

namespace ehsim::signal {

ModalityId::ModalityId(std::string key) : key_(std::move(key)) {
  static const std::array<const char*, 5> kBuiltin = {"ECG", "EDA", "PPG", "ACC", "RR"};
  if (key_.empty()) throw InvalidArgument("empty modality key");
  for (std::size_t i = 0; i < kBuiltin.size(); ++i)
    if (key_ == kBuiltin[i]) rank_ = static_cast<int>(i);
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kNone:
      return "none";
    case NoiseKind::kWander:
      return "wander";
    case NoiseKind::kWanderArtifact:
      return "wander+artifact";
  }
  return "?";
}

NoiseKind parse_noise_kind(const std::string& text) {
  if (text == "none") return NoiseKind::kNone;
  if (text == "wander") return NoiseKind::kWander;
  if (text == "wander+artifact") return NoiseKind::kWanderArtifact;
  throw InvalidArgument("unknown noise kind '" + text + "' (expected none, wander, wander+artifact)");
}

std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::kS1:
      return "S1";
    case ScenarioId::kS2:
      return "S2";
    case ScenarioId::kS3:
      return "S3";
    case ScenarioId::kS4:
      return "S4";
  }
  return "?";
}

ScenarioId parse_scenario(const std::string& text) {
  for (auto id : kAllScenarios)
    if (to_string(id) == text) return id;
  throw InvalidArgument("unknown scenario '" + text + "' (expected S1..S4)");
}

void NoiseScenario::validate() const {
  std::size_t wander = 0;
  std::size_t artifact = 0;
  for (const auto& [m, spec] : per_modality) {
    if (spec.kind == NoiseKind::kWander) ++wander;
    if (spec.kind == NoiseKind::kWanderArtifact) ++artifact;
    if (spec.kind != NoiseKind::kNone && spec.target_snr_db > kSnrCeilingDb)
      throw InvalidArgument("target SNR for " + m.key() + " above ceiling");
    if (spec.kind == NoiseKind::kWanderArtifact &&
        (spec.artifact_duration_s <= 0.0 || spec.artifact_amplitude_scale <= 0.0))
      throw InvalidArgument("artifact on " + m.key() + " needs positive duration and amplitude");
  }
  const std::size_t n = per_modality.size();
  const std::string name = to_string(id);
  switch (id) {
    case ScenarioId::kS1:
      if (wander + artifact != 0) throw InvalidArgument(name + " must not inject noise");
      break;
    case ScenarioId::kS2:
      if (wander != n) throw InvalidArgument(name + " needs wander on every modality");
      break;
    case ScenarioId::kS3:
      if (artifact != 1) throw InvalidArgument(name + " needs an artifact on exactly one modality");
      break;
    case ScenarioId::kS4:
      if (artifact != 2) throw InvalidArgument(name + " needs artifacts on exactly two modalities");
      break;
  }
}

std::string to_string(QualityLabel label) {
  switch (label) {
    case QualityLabel::kUnreliable:
      return "Unreliable";
    case QualityLabel::kNoisy:
      return "Noisy";
    case QualityLabel::kReliable:
      return "Reliable";
  }
  return "?";
}

QualityLabel QualityReport::label(const ModalityId& m) const {
  auto it = entries.find(m);
  if (it == entries.end()) throw InvalidArgument("no quality entry for " + m.key());
  return it->second.label;
}

}  // namespace ehsim::signal
