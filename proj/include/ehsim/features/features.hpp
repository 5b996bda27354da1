#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ehsim/common/csv.hpp"
#include "ehsim/signal/synth.hpp"
#include "ehsim/signal/types.hpp"

namespace ehsim::features {

using signal::ModalityId;

struct FeatureDef {
  std::string name;
  // True when the value depends on the sampling grid or on content above a
  // quarter of the nominal rate, i.e. it may move when the rate is halved.
  bool rate_sensitive = true;
};

struct Template {
  ModalityId modality;
  std::vector<FeatureDef> defs;

  std::size_t size() const { return defs.size(); }
  std::vector<std::string> names() const;
};

// Built-in templates: ECG 52, EDA 42, PPG 42, ACC 30, RR 28.
const Template& default_template(const ModalityId& m);

// Ranked names for one modality plus how many of them to keep.
struct ModalityPlan {
  std::vector<std::string> ranking;
  std::size_t k = 0;
};

struct FeaturePlan {
  std::map<ModalityId, ModalityPlan> modalities;

  // Throws InvalidArgument if k is out of range or the ranking is not a
  // permutation of the template.
  void validate() const;
  const ModalityPlan& at(const ModalityId& m) const;
};

// Template order, every feature kept.
ModalityPlan full_plan(const ModalityId& m);
FeaturePlan full_plan(const std::vector<ModalityId>& mods);

struct FeatureBlock {
  ModalityId modality;
  // Extracted from a half-rate signal.
  bool half_rate = false;
  std::vector<std::string> names;
  std::vector<double> values;
  // False where the value was undefined and imputed as 0.
  std::vector<bool> valid;

  std::size_t size() const { return values.size(); }
  // "ECG" or "ECG_half".
  std::string prefix() const;
  double value(const std::string& name) const;
};

// Computes the modality's template on `signal` and keeps the first k names
// of the plan's ranking. Half-rate blocks are detected from the signal rate.
FeatureBlock extract_features(const signal::Signal& signal, const ModalityPlan& plan,
                              const signal::SynthConfig& config = {});
FeatureBlock extract_features(const signal::Signal& signal, const signal::SynthConfig& config = {});

// Keeps `names` (in that order) from a full block.
FeatureBlock select(const FeatureBlock& block, const std::vector<std::string>& names);

struct FeatureVector {
  std::uint64_t window_id = 0;
  std::vector<FeatureBlock> blocks;
  int label = -1;

  std::size_t size() const;
  std::vector<double> flat() const;
  std::vector<std::string> flat_names() const;
  const FeatureBlock* block(const ModalityId& m) const;
};

// Fisher-ratio ranking of one modality's block (full or half-rate variant),
// best first, ties by name. Needs at least two classes.
std::vector<std::string> rank_features(const std::vector<FeatureVector>& set, const ModalityId& m,
                                       bool half_rate = false);

// Default reduced count for a Noisy modality: 12 for ECG, ceil(size / 4)
// otherwise.
std::size_t default_reduced_k(const ModalityId& m);

struct AggregationPolicy {
  // Rankings computed on half-rate noisy training blocks.
  std::map<ModalityId, ModalityPlan> noisy;

  const ModalityPlan& noisy_plan(const ModalityId& m) const;
};

// Drops Unreliable modalities, reduces Noisy ones to their noisy plan and
// concatenates in canonical modality order. `blocks` hold full templates
// (half-rate for modalities sensed at half rate).
FeatureVector aggregate(const std::vector<FeatureBlock>& blocks, const signal::QualityReport& report,
                        const AggregationPolicy& policy);

// Feature dataset CSV: window_id,label,<flat names>.
void write_feature_csv(const std::filesystem::path& path, const std::vector<FeatureVector>& set,
                       const FileHeader* header = nullptr);

}  // namespace ehsim::features
