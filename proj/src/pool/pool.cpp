#include "ehsim/pool/pool.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "ehsim/common/error.hpp"
#include "ehsim/common/parallel.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/signal/synth.hpp"
#include "json.hpp"

namespace ehsim::pool {

using json = nlohmann::json;
using features::AggregationPolicy;
using features::FeatureBlock;

// ---------------------------------------------------------------- keys

std::string ModelKey::str() const {
  std::string out;
  for (const auto& e : entries) {
    if (!out.empty()) out += '+';
    out += e.modality.key() + (e.reduced ? "_half" : "") + ":" + std::to_string(e.count);
  }
  return out;
}

ModelKey ModelKey::parse(const std::string& text) {
  ModelKey k;
  if (text.empty()) throw InvalidArgument("empty model key");
  for (const auto& part : split(text, '+')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw InvalidArgument("bad model key part '" + part + "'");
    std::string name = part.substr(0, colon);
    KeyEntry e;
    if (name.size() > 5 && name.ends_with("_half")) {
      e.reduced = true;
      name.resize(name.size() - 5);
    }
    e.modality = ModalityId(name);
    e.count = static_cast<std::size_t>(std::stoul(part.substr(colon + 1)));
    k.entries.push_back(e);
  }
  k.validate();
  return k;
}

std::size_t ModelKey::feature_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.count;
  return n;
}

void ModelKey::validate() const {
  if (entries.empty()) throw InvalidArgument("model key needs a non-empty modality subset");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (i > 0 && !(entries[i - 1].modality < e.modality))
      throw InvalidArgument("model key modalities must be distinct and in canonical order");
    const std::size_t size = features::default_template(e.modality).size();
    if (e.reduced ? (e.count < 1 || e.count > size) : e.count != size)
      throw InvalidArgument("invalid feature count " + std::to_string(e.count) + " for " +
                            e.modality.key());
  }
}

std::vector<std::string> ModelKey::feature_names(const AggregationPolicy& policy) const {
  validate();
  std::vector<std::string> out;
  for (const auto& e : entries) {
    const std::string prefix = e.modality.key() + (e.reduced ? "_half" : "");
    std::vector<std::string> names;
    if (e.reduced) {
      const auto& plan = policy.noisy_plan(e.modality);
      if (plan.k != e.count)
        throw InvalidArgument("key " + str() + " expects " + std::to_string(e.count) + " reduced " +
                              e.modality.key() + " features, plan has " + std::to_string(plan.k));
      names.assign(plan.ranking.begin(), plan.ranking.begin() + static_cast<std::ptrdiff_t>(plan.k));
    } else {
      names = features::default_template(e.modality).names();
    }
    for (const auto& n : names) out.push_back(prefix + "." + n);
  }
  return out;
}

ModelKey key_of(const FeatureVector& v) {
  ModelKey k;
  for (const auto& b : v.blocks) k.entries.push_back({b.modality, b.half_rate, b.size()});
  return k;
}

std::vector<ModelKey> default_keys(const std::vector<ModalityId>& mods_in) {
  auto mods = mods_in;
  std::sort(mods.begin(), mods.end());
  std::vector<ModelKey> keys;
  std::size_t combos = 1;
  for (std::size_t i = 0; i < mods.size(); ++i) combos *= 3;
  for (std::size_t code = 1; code < combos; ++code) {
    ModelKey k;
    std::size_t c = code;
    for (const auto& m : mods) {
      const std::size_t state = c % 3;
      c /= 3;
      if (state == 1) k.entries.push_back({m, false, features::default_template(m).size()});
      if (state == 2) k.entries.push_back({m, true, features::default_reduced_k(m)});
    }
    keys.push_back(std::move(k));
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::string to_string(Family f) {
  switch (f) {
    case Family::kNearestCentroid:
      return "nearest-centroid";
    case Family::kKnn:
      return "knn";
    case Family::kTreeEnsemble:
      return "tree-ensemble";
  }
  return "?";
}

Family parse_family(const std::string& text) {
  for (auto f : {Family::kNearestCentroid, Family::kKnn, Family::kTreeEnsemble})
    if (to_string(f) == text) return f;
  throw InvalidArgument("unknown model family '" + text +
                        "' (expected nearest-centroid, knn, tree-ensemble)");
}

double FamilyParams::cost_per_feature_mops(Family f) const {
  switch (f) {
    case Family::kNearestCentroid:
      return 0.004;
    case Family::kKnn:
      return 0.05;
    case Family::kTreeEnsemble:
      return 0.002;
  }
  return 0.0;
}

// ---------------------------------------------------------------- classifiers

class Classifier {
 public:
  virtual ~Classifier() = default;
  // `z` is standardized.
  virtual void predict(const std::vector<double>& z, int& label, double& confidence) const = 0;
  virtual json to_json() const = 0;

  std::vector<double> mean;
  std::vector<double> scale;
  int classes = 2;

  std::vector<double> standardize(const std::vector<double>& x) const {
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / scale[j];
    return z;
  }
};

namespace {

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
  return d;
}

int argmax_low(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

class NearestCentroid final : public Classifier {
 public:
  std::vector<std::vector<double>> centroids;

  // Confidence is the softmin of Euclidean centroid distances.
  void predict(const std::vector<double>& z, int& label, double& confidence) const override {
    std::vector<double> d(centroids.size());
    for (std::size_t c = 0; c < centroids.size(); ++c) d[c] = std::sqrt(sq_distance(z, centroids[c]));
    label = 0;
    for (std::size_t c = 1; c < d.size(); ++c)
      if (d[c] < d[static_cast<std::size_t>(label)]) label = static_cast<int>(c);
    const double dmin = d[static_cast<std::size_t>(label)];
    double total = 0.0;
    for (double v : d) total += std::exp(-(v - dmin));
    confidence = 1.0 / total;
  }

  json to_json() const override { return {{"centroids", centroids}}; }
};

class Knn final : public Classifier {
 public:
  int k = 5;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;

  void predict(const std::vector<double>& z, int& label, double& confidence) const override {
    std::vector<std::pair<double, std::size_t>> d(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) d[i] = {std::sqrt(sq_distance(z, rows[i])), i};
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    std::vector<double> votes(static_cast<std::size_t>(classes), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < kk; ++i) {
      const double w = 1.0 / (d[i].first + 1e-9);
      votes[static_cast<std::size_t>(labels[d[i].second])] += w;
      total += w;
    }
    label = argmax_low(votes);
    confidence = votes[static_cast<std::size_t>(label)] / total;
  }

  json to_json() const override { return {{"k", k}, {"rows", rows}, {"labels", labels}}; }
};

struct Tree {
  std::vector<int> feature;  // -1 for leaves
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<int> leaf_class;

  int predict(const std::vector<double>& z) const {
    int node = 0;
    while (feature[static_cast<std::size_t>(node)] >= 0) {
      const auto n = static_cast<std::size_t>(node);
      node = z[static_cast<std::size_t>(feature[n])] <= threshold[n] ? left[n] : right[n];
    }
    return leaf_class[static_cast<std::size_t>(node)];
  }
};

class TreeEnsemble final : public Classifier {
 public:
  std::vector<Tree> trees;

  void predict(const std::vector<double>& z, int& label, double& confidence) const override {
    std::vector<double> votes(static_cast<std::size_t>(classes), 0.0);
    for (const auto& t : trees) votes[static_cast<std::size_t>(t.predict(z))] += 1.0;
    label = argmax_low(votes);
    confidence = votes[static_cast<std::size_t>(label)] / static_cast<double>(trees.size());
  }

  json to_json() const override {
    json arr = json::array();
    for (const auto& t : trees)
      arr.push_back({{"feature", t.feature},
                     {"threshold", t.threshold},
                     {"left", t.left},
                     {"right", t.right},
                     {"leaf_class", t.leaf_class}});
    return {{"trees", arr}};
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<int>& y, int classes,
              int max_depth, Rng& rng)
      : x_(x), y_(y), classes_(classes), max_depth_(max_depth), rng_(rng) {}

  Tree build(std::vector<std::size_t> idx) {
    tree_ = Tree{};
    grow(idx, 0);
    return std::move(tree_);
  }

 private:
  int add_leaf(const std::vector<std::size_t>& idx) {
    std::vector<double> counts(static_cast<std::size_t>(classes_), 0.0);
    for (auto i : idx) counts[static_cast<std::size_t>(y_[i])] += 1.0;
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.leaf_class.push_back(argmax_low(counts));
    return static_cast<int>(tree_.feature.size() - 1);
  }

  static double gini(const std::vector<double>& counts, double n) {
    if (n <= 0.0) return 0.0;
    double s = 1.0;
    for (double c : counts) s -= (c / n) * (c / n);
    return s;
  }

  int grow(std::vector<std::size_t>& idx, int depth) {
    bool pure = true;
    for (auto i : idx)
      if (y_[i] != y_[idx.front()]) pure = false;
    if (pure || depth >= max_depth_ || idx.size() < 4) return add_leaf(idx);

    const std::size_t p = x_.front().size();
    const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(p)))));
    std::vector<std::size_t> feats(p);
    std::iota(feats.begin(), feats.end(), 0);
    for (std::size_t i = 0; i < m; ++i) std::swap(feats[i], feats[i + rng_.below(p - i)]);

    const double n = static_cast<double>(idx.size());
    std::vector<double> total(static_cast<std::size_t>(classes_), 0.0);
    for (auto i : idx) total[static_cast<std::size_t>(y_[i])] += 1.0;
    double best = gini(total, n) - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order = idx;
    for (std::size_t f = 0; f < m; ++f) {
      const std::size_t j = feats[f];
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x_[a][j] != x_[b][j]) return x_[a][j] < x_[b][j];
        return a < b;
      });
      std::vector<double> left(static_cast<std::size_t>(classes_), 0.0);
      for (std::size_t s = 0; s + 1 < order.size(); ++s) {
        left[static_cast<std::size_t>(y_[order[s]])] += 1.0;
        const double lo = x_[order[s]][j];
        const double hi = x_[order[s + 1]][j];
        if (!(hi > lo)) continue;
        const double nl = static_cast<double>(s + 1);
        std::vector<double> right(total);
        for (std::size_t c = 0; c < right.size(); ++c) right[c] -= left[c];
        const double score = (nl * gini(left, nl) + (n - nl) * gini(right, n - nl)) / n;
        if (score < best) {
          best = score;
          best_feature = static_cast<int>(j);
          best_threshold = 0.5 * (lo + hi);
        }
      }
    }
    if (best_feature < 0) return add_leaf(idx);

    std::vector<std::size_t> l, r;
    for (auto i : idx) (x_[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? l : r).push_back(i);
    const int node = static_cast<int>(tree_.feature.size());
    tree_.feature.push_back(best_feature);
    tree_.threshold.push_back(best_threshold);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.leaf_class.push_back(-1);
    const int li = grow(l, depth + 1);
    const int ri = grow(r, depth + 1);
    tree_.left[static_cast<std::size_t>(node)] = li;
    tree_.right[static_cast<std::size_t>(node)] = ri;
    return node;
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<int>& y_;
  int classes_;
  int max_depth_;
  Rng& rng_;
  Tree tree_;
};

std::shared_ptr<Classifier> fit(Family family, const std::vector<std::vector<double>>& z,
                                const std::vector<int>& y, int classes, std::uint64_t seed,
                                const FamilyParams& params) {
  const std::size_t p = z.front().size();
  switch (family) {
    case Family::kNearestCentroid: {
      auto nc = std::make_shared<NearestCentroid>();
      nc->centroids.assign(static_cast<std::size_t>(classes), std::vector<double>(p, 0.0));
      std::vector<double> counts(static_cast<std::size_t>(classes), 0.0);
      for (std::size_t i = 0; i < z.size(); ++i) {
        auto& c = nc->centroids[static_cast<std::size_t>(y[i])];
        for (std::size_t j = 0; j < p; ++j) c[j] += z[i][j];
        counts[static_cast<std::size_t>(y[i])] += 1.0;
      }
      for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] > 0.0)
          for (double& v : nc->centroids[c]) v /= counts[c];
      return nc;
    }
    case Family::kKnn: {
      auto knn = std::make_shared<Knn>();
      knn->k = params.knn_k;
      knn->rows = z;
      knn->labels = y;
      return knn;
    }
    case Family::kTreeEnsemble: {
      auto te = std::make_shared<TreeEnsemble>();
      Rng rng(derive_seed(seed, "trees"));
      TreeBuilder builder(z, y, classes, params.max_depth, rng);
      for (int t = 0; t < params.trees; ++t) {
        std::vector<std::size_t> boot(z.size());
        for (auto& i : boot) i = rng.below(z.size());
        te->trees.push_back(builder.build(std::move(boot)));
      }
      return te;
    }
  }
  throw InvalidArgument("unknown family");
}

std::shared_ptr<Classifier> classifier_from_json(Family family, const json& j) {
  std::shared_ptr<Classifier> out;
  switch (family) {
    case Family::kNearestCentroid: {
      auto nc = std::make_shared<NearestCentroid>();
      nc->centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
      out = nc;
      break;
    }
    case Family::kKnn: {
      auto knn = std::make_shared<Knn>();
      knn->k = j.at("k").get<int>();
      knn->rows = j.at("rows").get<std::vector<std::vector<double>>>();
      knn->labels = j.at("labels").get<std::vector<int>>();
      out = knn;
      break;
    }
    case Family::kTreeEnsemble: {
      auto te = std::make_shared<TreeEnsemble>();
      for (const auto& t : j.at("trees")) {
        Tree tree;
        tree.feature = t.at("feature").get<std::vector<int>>();
        tree.threshold = t.at("threshold").get<std::vector<double>>();
        tree.left = t.at("left").get<std::vector<int>>();
        tree.right = t.at("right").get<std::vector<int>>();
        tree.leaf_class = t.at("leaf_class").get<std::vector<int>>();
        te->trees.push_back(std::move(tree));
      }
      out = te;
      break;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- models

TrainedModel::TrainedModel(ModelKey key, Family family, std::vector<std::string> names,
                           std::shared_ptr<const Classifier> impl, int classes, double cost_mops,
                           TrainMeta meta)
    : key_(std::move(key)),
      family_(family),
      names_(std::move(names)),
      impl_(std::move(impl)),
      classes_(classes),
      cost_mops_(cost_mops),
      meta_(std::move(meta)) {}

std::vector<double> TrainedModel::inputs(const FeatureVector& v) const {
  std::vector<double> row;
  row.reserve(names_.size());
  std::size_t next = 0;
  for (const auto& b : v.blocks) {
    const std::string prefix = b.prefix() + ".";
    for (std::size_t i = 0; i < b.names.size() && next < names_.size(); ++i) {
      if (names_[next].size() == prefix.size() + b.names[i].size() &&
          names_[next].compare(0, prefix.size(), prefix) == 0 &&
          names_[next].compare(prefix.size(), std::string::npos, b.names[i]) == 0) {
        row.push_back(b.values[i]);
        ++next;
      }
    }
  }
  if (row.size() != names_.size())
    throw InvalidArgument("feature vector does not provide the inputs of model " + key_.str() + " (" +
                          std::to_string(row.size()) + " of " + std::to_string(names_.size()) +
                          " features matched)");
  return row;
}

Prediction TrainedModel::predict_row(const std::vector<double>& row) const {
  if (row.size() != names_.size())
    throw InvalidArgument("shape mismatch: model " + key_.str() + " expects " +
                          std::to_string(names_.size()) + " features, got " + std::to_string(row.size()));
  Prediction p;
  impl_->predict(impl_->standardize(row), p.label, p.confidence);
  p.model_key = key_.str();
  p.exited_at_tier = 1;
  p.cost_mops = cost_mops_;
  return p;
}

Prediction TrainedModel::predict(const FeatureVector& v) const { return predict_row(inputs(v)); }

std::string TrainedModel::serialize() const {
  json j;
  j["key"] = key_.str();
  j["family"] = to_string(family_);
  j["classes"] = classes_;
  j["inference_cost_mops"] = cost_mops_;
  j["names"] = names_;
  j["mean"] = impl_->mean;
  j["scale"] = impl_->scale;
  j["meta"] = {{"seed", meta_.seed},
               {"dataset_hash", meta_.dataset_hash},
               {"heldout_accuracy", meta_.heldout_accuracy},
               {"train_rows", meta_.train_rows},
               {"heldout_rows", meta_.heldout_rows}};
  j["params"] = impl_->to_json();
  return j.dump(1) + "\n";
}

TrainedModel TrainedModel::deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    const Family family = parse_family(j.at("family").get<std::string>());
    auto impl = classifier_from_json(family, j.at("params"));
    impl->mean = j.at("mean").get<std::vector<double>>();
    impl->scale = j.at("scale").get<std::vector<double>>();
    impl->classes = j.at("classes").get<int>();
    TrainMeta meta;
    const auto& m = j.at("meta");
    meta.seed = m.at("seed").get<std::uint64_t>();
    meta.dataset_hash = m.at("dataset_hash").get<std::string>();
    meta.heldout_accuracy = m.at("heldout_accuracy").get<double>();
    meta.train_rows = m.at("train_rows").get<std::size_t>();
    meta.heldout_rows = m.at("heldout_rows").get<std::size_t>();
    return TrainedModel(ModelKey::parse(j.at("key").get<std::string>()), family,
                        j.at("names").get<std::vector<std::string>>(), impl, impl->classes,
                        j.at("inference_cost_mops").get<double>(), meta);
  } catch (const json::exception& e) {
    throw RuntimeError(std::string("malformed model file: ") + e.what());
  }
}

// ---------------------------------------------------------------- datasets

std::string Dataset::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& r : rows) {
    mix(static_cast<std::uint64_t>(r.label));
    for (const auto& b : r.blocks)
      for (double v : b.values) mix(std::bit_cast<std::uint64_t>(v));
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.windows < 4) throw InvalidArgument("dataset needs at least 4 windows");
  if (spec.synth.class_count < 2) throw InvalidArgument("dataset needs at least two classes");
  Dataset d;
  d.class_count = spec.synth.class_count;
  d.rows.resize(spec.windows);
  auto mods = spec.modalities;
  std::sort(mods.begin(), mods.end());
  parallel_for(spec.windows, spec.jobs, [&](std::size_t w) {
    const std::uint64_t ws = derive_seed(seed, static_cast<std::uint64_t>(w));
    Rng rng(derive_seed(ws, "dataset"));
    FeatureVector& v = d.rows[w];
    v.window_id = w;
    v.label = static_cast<int>(w % static_cast<std::size_t>(spec.synth.class_count));
    for (const auto& m : mods) {
      const auto s = signal::generate_window(m, v.label, spec.window_s, ws, spec.synth);
      v.blocks.push_back(features::extract_features(s, spec.synth));
      const signal::NoiseSpec noise{signal::NoiseKind::kWander,
                                    rng.uniform(spec.noisy_snr_lo_db, spec.noisy_snr_hi_db), 0.0, 0.0};
      const auto noisy = signal::inject_noise(s, noise, derive_seed(ws, "noisy/" + m.key()), spec.synth);
      auto half = features::extract_features(signal::downsample(noisy, 2), spec.synth);
      half.half_rate = true;
      v.blocks.push_back(std::move(half));
    }
  });
  for (const auto& m : mods) {
    auto it = spec.reduced_k.find(m);
    const std::size_t k = it != spec.reduced_k.end() ? it->second : features::default_reduced_k(m);
    d.policy.noisy[m] = {features::rank_features(d.rows, m, true), k};
  }
  return d;
}

FeatureVector view(const FeatureVector& row, const ModelKey& key, const AggregationPolicy& policy) {
  FeatureVector v;
  v.window_id = row.window_id;
  v.label = row.label;
  for (const auto& e : key.entries) {
    const FeatureBlock* found = nullptr;
    for (const auto& b : row.blocks)
      if (b.modality == e.modality && b.half_rate == e.reduced) found = &b;
    if (found == nullptr)
      throw InvalidArgument("key " + key.str() + " requests modality " + e.modality.key() +
                            " absent from the dataset");
    if (e.reduced) {
      const auto& plan = policy.noisy_plan(e.modality);
      v.blocks.push_back(features::select(
          *found, {plan.ranking.begin(), plan.ranking.begin() + static_cast<std::ptrdiff_t>(e.count)}));
    } else {
      v.blocks.push_back(*found);
    }
  }
  return v;
}

// ---------------------------------------------------------------- training

TrainedModel train_matrix(const ModelKey& key, Family family, const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                          int classes, std::uint64_t seed, const FamilyParams& params,
                          double heldout_fraction) {
  if (x.empty() || x.size() != y.size()) throw InvalidArgument("training matrix and labels differ in size");
  for (int label : y)
    if (label < 0 || label >= classes) throw InvalidArgument("label outside class range");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  const auto held = static_cast<std::size_t>(std::floor(heldout_fraction * static_cast<double>(x.size())));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  if (train_idx.empty()) throw InvalidArgument("no training rows left after the split");

  const std::size_t p = names.size();
  std::vector<double> mean(p, 0.0), scale(p, 0.0);
  for (auto i : train_idx)
    for (std::size_t j = 0; j < p; ++j) mean[j] += x[i][j];
  for (double& m : mean) m /= static_cast<double>(train_idx.size());
  for (auto i : train_idx)
    for (std::size_t j = 0; j < p; ++j) scale[j] += (x[i][j] - mean[j]) * (x[i][j] - mean[j]);
  for (double& s : scale) {
    s = std::sqrt(s / static_cast<double>(train_idx.size()));
    if (!(s > 1e-12)) s = 1.0;
  }
  std::vector<std::vector<double>> z;
  std::vector<int> zy;
  for (auto i : train_idx) {
    std::vector<double> row(p);
    for (std::size_t j = 0; j < p; ++j) row[j] = (x[i][j] - mean[j]) / scale[j];
    z.push_back(std::move(row));
    zy.push_back(y[i]);
  }
  auto impl = fit(family, z, zy, classes, derive_seed(seed, key.str()), params);
  impl->mean = mean;
  impl->scale = scale;
  impl->classes = classes;
  TrainMeta meta;
  meta.seed = seed;
  meta.train_rows = train_idx.size();
  meta.heldout_rows = test_idx.size();
  TrainedModel model(key, family, names, impl, classes,
                     static_cast<double>(p) * params.cost_per_feature_mops(family), meta);
  if (!test_idx.empty()) {
    std::size_t hit = 0;
    for (auto i : test_idx)
      if (model.predict_row(x[i]).label == y[i]) ++hit;
    meta.heldout_accuracy = static_cast<double>(hit) / static_cast<double>(test_idx.size());
  }
  return model.with_meta(meta);
}

TrainedModel train_model(const Dataset& data, const ModelKey& key, Family family, std::uint64_t seed,
                         const FamilyParams& params) {
  const auto names = key.feature_names(data.policy);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::set<int> classes;
  for (const auto& row : data.rows) {
    x.push_back(view(row, key, data.policy).flat());
    y.push_back(row.label);
    classes.insert(row.label);
  }
  if (classes.size() < 2) throw InvalidArgument("training data covers fewer than two classes");
  auto model = train_matrix(key, family, names, x, y, data.class_count, seed, params);
  TrainMeta meta = model.meta();
  meta.dataset_hash = data.hash();
  return model.with_meta(meta);
}

// ---------------------------------------------------------------- pools

const TrainedModel* Pool::find(const ModelKey& key) const {
  auto it = models.find(key.str());
  return it == models.end() ? nullptr : &it->second;
}

const TrainedModel& Pool::at(const ModelKey& key) const {
  const auto* m = find(key);
  if (m == nullptr) throw InvalidArgument("model pool has no entry for key " + key.str());
  return *m;
}

Pool train_pool(const Dataset& data, const std::vector<ModelKey>& keys, Family family,
                std::uint64_t seed, const FamilyParams& params, int jobs) {
  if (keys.empty()) throw InvalidArgument("no model keys requested");
  for (const auto& k : keys) k.validate();
  std::vector<std::optional<TrainedModel>> trained(keys.size());
  parallel_for(keys.size(), jobs, [&](std::size_t i) {
    trained[i].emplace(train_model(data, keys[i], family, seed, params));
  });
  Pool pool;
  pool.policy = data.policy;
  for (auto& t : trained) pool.models.emplace(t->key().str(), std::move(*t));
  return pool;
}

Prediction tiered_predict(const std::vector<const TrainedModel*>& tiers, const FeatureVector& v,
                          double threshold) {
  if (tiers.empty()) throw InvalidArgument("tier list is empty");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidArgument("confidence threshold must be in [0, 1]");
  double cost = 0.0;
  Prediction p;
  for (std::size_t t = 0; t < tiers.size(); ++t) {
    p = tiers[t]->predict(v);
    cost += tiers[t]->inference_cost_mops();
    p.exited_at_tier = static_cast<int>(t + 1);
    if (p.confidence >= threshold) break;
  }
  p.cost_mops = cost;
  return p;
}

namespace {

template <typename PredictFn>
Evaluation evaluate_with(const std::vector<FeatureVector>& set, int classes, PredictFn&& fn) {
  if (set.empty()) throw InvalidArgument("evaluation set is empty");
  Evaluation e;
  std::size_t hit = 0;
  double conf = 0.0, cost = 0.0, tier = 0.0;
  for (const auto& v : set) {
    if (v.label < 0 || v.label >= classes)
      throw InvalidArgument("label " + std::to_string(v.label) + " outside trained class range");
    const Prediction p = fn(v);
    if (p.label == v.label) ++hit;
    conf += p.confidence;
    cost += p.cost_mops;
    tier += p.exited_at_tier;
  }
  const double n = static_cast<double>(set.size());
  e.n = set.size();
  e.accuracy = static_cast<double>(hit) / n;
  e.mean_confidence = conf / n;
  e.mean_cost_mops = cost / n;
  e.mean_exit_tier = tier / n;
  return e;
}

}  // namespace

Evaluation evaluate(const TrainedModel& model, const std::vector<FeatureVector>& set) {
  return evaluate_with(set, model.class_count(), [&](const FeatureVector& v) { return model.predict(v); });
}

Evaluation evaluate(const std::vector<const TrainedModel*>& tiers, const std::vector<FeatureVector>& set,
                    double threshold) {
  if (tiers.empty()) throw InvalidArgument("tier list is empty");
  return evaluate_with(set, tiers.back()->class_count(),
                       [&](const FeatureVector& v) { return tiered_predict(tiers, v, threshold); });
}

namespace {

std::string file_stem(const ModelKey& key) {
  std::string s = key.str();
  for (char& c : s)
    if (c == ':' ) c = '-';
    else if (c == '+') c = '_';
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << text;
  if (!out) throw RuntimeError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

void save_pool(const Pool& pool, const std::filesystem::path& dir, const FileHeader* header) {
  std::filesystem::create_directories(dir);
  json policy = json::object();
  for (const auto& [m, plan] : pool.policy.noisy)
    policy[m.key()] = {{"k", plan.k}, {"ranking", plan.ranking}};
  write_text(dir / "policy.json", policy.dump(1) + "\n");
  CsvWriter manifest(dir / "manifest.csv",
                     {"key", "family", "features", "heldout_accuracy", "inference_cost_mops", "file"},
                     header);
  for (const auto& [name, model] : pool.models) {
    const std::string file = file_stem(model.key()) + ".json";
    write_text(dir / file, model.serialize());
    manifest.cell(name)
        .cell(to_string(model.family()))
        .cell(model.key().feature_count())
        .cell(model.meta().heldout_accuracy)
        .cell(model.inference_cost_mops())
        .cell(file);
    manifest.end_row();
  }
}

Pool load_pool(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.csv"))
    throw MissingArtifact((dir / "manifest.csv").string(), "train-pool");
  Pool pool;
  try {
    const json policy = json::parse(read_text(dir / "policy.json"));
    for (const auto& [key, plan] : policy.items())
      pool.policy.noisy[ModalityId(key)] = {plan.at("ranking").get<std::vector<std::string>>(),
                                            plan.at("k").get<std::size_t>()};
  } catch (const json::exception& e) {
    throw RuntimeError(std::string("malformed policy.json: ") + e.what());
  }
  const auto table = read_csv(dir / "manifest.csv");
  const auto ck = table.column("key");
  const auto cf = table.column("file");
  for (const auto& row : table.rows) {
    auto model = TrainedModel::deserialize(read_text(dir / row.at(cf)));
    if (model.key().str() != row.at(ck))
      throw RuntimeError("manifest key " + row.at(ck) + " does not match " + row.at(cf));
    pool.models.emplace(row.at(ck), std::move(model));
  }
  return pool;
}

}  // namespace ehsim::pool
