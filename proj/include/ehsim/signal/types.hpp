#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ehsim::signal {

// Reports stay totally ordered by clamping SNR into [kSnrFloorDb,
// kSnrCeilingDb]; kSnrCeilingDb doubles as the "no noise" (+inf) sentinel.
inline constexpr double kSnrCeilingDb = 60.0;
inline constexpr double kSnrFloorDb = -60.0;

// Physiological input source. The five built-in modalities have synthesis
// templates; other keys can be declared in configuration (rates, bands) but
// cannot be generated.
class ModalityId {
 public:
  ModalityId() = default;
  explicit ModalityId(std::string key);

  static ModalityId ecg() { return ModalityId("ECG"); }
  static ModalityId eda() { return ModalityId("EDA"); }
  static ModalityId ppg() { return ModalityId("PPG"); }
  static ModalityId acc() { return ModalityId("ACC"); }
  static ModalityId rr() { return ModalityId("RR"); }

  const std::string& key() const { return key_; }
  bool builtin() const { return rank_ < kCustomRank; }
  // Canonical concatenation order: ECG, EDA, PPG, ACC, RR, then custom keys
  // alphabetically.
  int rank() const { return rank_; }

  friend bool operator==(const ModalityId& a, const ModalityId& b) { return a.key_ == b.key_; }
  friend std::strong_ordering operator<=>(const ModalityId& a, const ModalityId& b) {
    if (auto c = a.rank_ <=> b.rank_; c != 0) return c;
    return a.key_ <=> b.key_;
  }

 private:
  static constexpr int kCustomRank = 100;
  std::string key_;
  int rank_ = kCustomRank;
};

struct GroundTruth {
  std::vector<double> clean_samples;
  double injected_noise_power = 0.0;
  double true_snr_db = kSnrCeilingDb;
  std::vector<double> true_peak_times_s;
  int class_label = 0;
  // Overwritten motion-artifact segment [begin, end) in seconds, if any.
  std::optional<std::pair<double, double>> artifact_s;
};

struct Signal {
  ModalityId modality;
  double sampling_rate_hz = 1.0;
  std::vector<double> samples;
  double start_time_s = 0.0;
  GroundTruth truth;

  double duration_s() const { return static_cast<double>(samples.size()) / sampling_rate_hz; }
};

enum class NoiseKind { kNone, kWander, kWanderArtifact };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& text);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kNone;
  double target_snr_db = kSnrCeilingDb;
  double artifact_duration_s = 0.0;
  double artifact_amplitude_scale = 0.0;
};

enum class ScenarioId { kS1, kS2, kS3, kS4 };

std::string to_string(ScenarioId id);
ScenarioId parse_scenario(const std::string& text);
inline constexpr ScenarioId kAllScenarios[] = {ScenarioId::kS1, ScenarioId::kS2, ScenarioId::kS3,
                                               ScenarioId::kS4};

struct NoiseScenario {
  ScenarioId id = ScenarioId::kS1;
  std::map<ModalityId, NoiseSpec> per_modality;

  // Throws InvalidArgument when the per-modality kinds violate the scenario's
  // definition (S1 none, S2 wander, S3 one artifact, S4 two artifacts).
  void validate() const;
};

enum class QualityLabel { kUnreliable = 0, kNoisy = 1, kReliable = 2 };

std::string to_string(QualityLabel label);

struct QualityThresholds {
  double noisy_db = 15.0;
  double drop_db = 5.0;
  double hysteresis_db = 1.0;
};

struct QualityEntry {
  double estimated_snr_db = kSnrCeilingDb;
  QualityLabel label = QualityLabel::kReliable;
  bool detached = false;
};

struct QualityReport {
  std::map<ModalityId, QualityEntry> entries;

  QualityLabel label(const ModalityId& m) const;
};

}  // namespace ehsim::signal
