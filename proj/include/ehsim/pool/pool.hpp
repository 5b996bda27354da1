#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ehsim/common/csv.hpp"
#include "ehsim/features/features.hpp"

namespace ehsim::pool {

using features::FeatureVector;
using signal::ModalityId;

struct KeyEntry {
  ModalityId modality;
  // Reduced entries use the half-rate block and the noise-aware ranking.
  bool reduced = false;
  std::size_t count = 0;

  friend bool operator==(const KeyEntry&, const KeyEntry&) = default;
};

// Ordered modality subset with per-modality feature counts.
struct ModelKey {
  std::vector<KeyEntry> entries;

  // Canonical text, e.g. "ECG_half:12+EDA:42+PPG:42".
  std::string str() const;
  static ModelKey parse(const std::string& text);
  std::size_t feature_count() const;
  // Throws InvalidArgument for an empty or unordered subset or bad counts.
  void validate() const;
  // Flat feature names the key consumes, given the noise-aware plans.
  std::vector<std::string> feature_names(const features::AggregationPolicy& policy) const;

  friend bool operator==(const ModelKey&, const ModelKey&) = default;
  friend bool operator<(const ModelKey& a, const ModelKey& b) { return a.str() < b.str(); }
};

// Key that matches an aggregated vector (block order and sizes).
ModelKey key_of(const FeatureVector& v);

// Every combination of {absent, full, reduced} per modality except all-absent.
std::vector<ModelKey> default_keys(const std::vector<ModalityId>& mods);

enum class Family { kNearestCentroid, kKnn, kTreeEnsemble };

std::string to_string(Family f);
Family parse_family(const std::string& text);

struct FamilyParams {
  int knn_k = 5;
  int trees = 15;
  int max_depth = 5;
  // Inference cost per input feature, in millions of operations.
  double cost_per_feature_mops(Family f) const;
};

struct Prediction {
  int label = 0;
  double confidence = 0.0;
  std::string model_key;
  int exited_at_tier = 1;
  double cost_mops = 0.0;
};

struct TrainMeta {
  std::uint64_t seed = 0;
  std::string dataset_hash;
  double heldout_accuracy = 0.0;
  std::size_t train_rows = 0;
  std::size_t heldout_rows = 0;
};

class Classifier;

class TrainedModel {
 public:
  TrainedModel(ModelKey key, Family family, std::vector<std::string> names,
               std::shared_ptr<const Classifier> impl, int classes, double cost_mops, TrainMeta meta);

  const ModelKey& key() const { return key_; }
  Family family() const { return family_; }
  const std::vector<std::string>& feature_names() const { return names_; }
  int class_count() const { return classes_; }
  double inference_cost_mops() const { return cost_mops_; }
  const TrainMeta& meta() const { return meta_; }
  TrainedModel with_meta(TrainMeta meta) const {
    TrainedModel copy = *this;
    copy.meta_ = std::move(meta);
    return copy;
  }

  // Picks the model's features from `v` by flat name; throws InvalidArgument
  // on a shape mismatch.
  std::vector<double> inputs(const FeatureVector& v) const;
  Prediction predict(const FeatureVector& v) const;
  Prediction predict_row(const std::vector<double>& row) const;

  std::string serialize() const;
  static TrainedModel deserialize(const std::string& text);

 private:
  ModelKey key_;
  Family family_;
  std::vector<std::string> names_;
  std::shared_ptr<const Classifier> impl_;
  int classes_;
  double cost_mops_;
  TrainMeta meta_;
};

// Labeled training windows. Each vector carries, per modality, a full block
// from the clean window and a half-rate block from a noisy copy.
struct Dataset {
  std::vector<FeatureVector> rows;
  features::AggregationPolicy policy;
  int class_count = 2;

  std::string hash() const;
};

struct DatasetSpec {
  std::vector<ModalityId> modalities = {ModalityId::ecg(), ModalityId::eda(), ModalityId::ppg()};
  std::size_t windows = 600;
  double window_s = 60.0;
  // Wander SNR range used for the half-rate (Noisy-plan) training copies.
  double noisy_snr_lo_db = 6.0;
  double noisy_snr_hi_db = 14.0;
  signal::SynthConfig synth;
  std::map<ModalityId, std::size_t> reduced_k;  // default_reduced_k when absent
  int jobs = 1;
};

// Generates windows, extracts both block variants and fills the noise-aware
// rankings from the half-rate blocks.
Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed);

struct Pool {
  features::AggregationPolicy policy;
  std::map<std::string, TrainedModel> models;

  const TrainedModel& at(const ModelKey& key) const;
  const TrainedModel* find(const ModelKey& key) const;
};

Pool train_pool(const Dataset& data, const std::vector<ModelKey>& keys, Family family,
                std::uint64_t seed, const FamilyParams& params = {}, int jobs = 1);

TrainedModel train_model(const Dataset& data, const ModelKey& key, Family family, std::uint64_t seed,
                         const FamilyParams& params = {});

// Lower-level entry point on a plain matrix (rows x names).
TrainedModel train_matrix(const ModelKey& key, Family family, const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                          int classes, std::uint64_t seed, const FamilyParams& params = {},
                          double heldout_fraction = 0.3);

Prediction tiered_predict(const std::vector<const TrainedModel*>& tiers, const FeatureVector& v,
                          double threshold);

struct Evaluation {
  double accuracy = 0.0;
  double mean_confidence = 0.0;
  double mean_cost_mops = 0.0;
  double mean_exit_tier = 1.0;
  std::size_t n = 0;
};

Evaluation evaluate(const TrainedModel& model, const std::vector<FeatureVector>& set);
Evaluation evaluate(const std::vector<const TrainedModel*>& tiers, const std::vector<FeatureVector>& set,
                    double threshold);

// Builds the vector a key consumes from a dataset row (full or half-rate
// blocks, reduced via the policy).
FeatureVector view(const FeatureVector& row, const ModelKey& key, const features::AggregationPolicy& policy);

// Directory layout: manifest.csv, policy.json, one <key>.json per model.
void save_pool(const Pool& pool, const std::filesystem::path& dir, const FileHeader* header = nullptr);
Pool load_pool(const std::filesystem::path& dir);

}  // namespace ehsim::pool
