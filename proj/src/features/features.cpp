#include "ehsim/features/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "ehsim/common/error.hpp"
#include "ehsim/common/fft.hpp"
#include "ehsim/signal/hrv.hpp"

namespace ehsim::features {
namespace {

using signal::Signal;

struct Spectral {
  std::string tag;
  double lo;
  double hi;
};

struct Layout {
  bool hrv = false;
  bool hrv_short = false;  // PPG subset
  bool eda = false;
  std::vector<Spectral> bands;
  bool centroid_entropy = false;
};

Layout layout_for(const ModalityId& m) {
  Layout l;
  const auto& k = m.key();
  if (k == "ECG") {
    l.hrv = true;
    l.bands = {{"1_2", 1, 2}, {"2_4", 2, 4}, {"4_8", 4, 8}, {"8_16", 8, 16}, {"16_32", 16, 32}};
    l.centroid_entropy = true;
  } else if (k == "PPG") {
    l.hrv = true;
    l.hrv_short = true;
    l.bands = {{"0.5_1.5", 0.5, 1.5}, {"1.5_3", 1.5, 3}, {"3_6", 3, 6}};
  } else if (k == "EDA") {
    l.eda = true;
    l.bands = {{"0.55_0.8", 0.55, 0.8}, {"0.8_1.1", 0.8, 1.1}, {"1.1_1.5", 1.1, 1.5},
               {"1.5_2", 1.5, 2.0}};
  } else if (k == "ACC") {
    l.bands = {{"0.5_1", 0.5, 1}, {"1_2", 1, 2}, {"2_4", 2, 4}, {"4_8", 4, 8}};
  } else if (k == "RR") {
    l.bands = {{"0.06_0.2", 0.06, 0.2}, {"0.2_0.4", 0.2, 0.4}, {"0.4_0.8", 0.4, 0.8}};
  } else {
    throw InvalidArgument("no feature template for modality '" + k + "'");
  }
  return l;
}

const std::vector<std::string> kStats = {
    "mean", "std",  "var",  "rms",  "min", "max",  "range",    "median",  "p05",          "p10",
    "p25",  "p75",  "p90",  "p95",  "iqr", "mad",  "skew",     "kurt",    "mad_diff",     "std_diff",
    "max_abs_diff", "mean_cross_rate"};

const std::vector<std::string> kHrvFull = {
    "n_peaks", "hr_mean",    "hr_std",   "ibi_mean", "ibi_std", "rmssd",
    "pnn20",   "pnn50",      "ibi_min",  "ibi_max",  "ibi_median", "ibi_range",
    "ibi_cv",  "sd1",        "sd2",      "sd_ratio", "peak_amp_mean", "peak_amp_std"};

const std::vector<std::string> kHrvShort = {"n_peaks", "hr_mean",  "hr_std",     "ibi_mean",
                                            "ibi_std", "rmssd",    "pnn50",      "ibi_min",
                                            "ibi_max", "ibi_median", "ibi_cv",   "sd1",
                                            "sd2",     "peak_amp_mean"};

const std::vector<std::string> kEda = {"tonic_level",   "tonic_slope",  "tonic_half_delta",
                                       "scr_count",     "scr_rate",     "scr_amp_mean",
                                       "scr_amp_max",   "scr_amp_std",  "phasic_auc",
                                       "phasic_energy", "deriv_pos_frac", "deriv_max"};

// Content of the built-in templates sits below a quarter of the nominal rate
// except for EDA, whose fast phasic edges reach past it.
bool stat_insensitive(const std::string& name, const ModalityId& m) {
  if (name == "mean") return true;
  if (name == "std" || name == "var" || name == "rms") return m.key() != "EDA";
  return false;
}

Template build_template(const ModalityId& m) {
  const Layout l = layout_for(m);
  const signal::ModalityProfile prof = signal::default_profile(m);
  const double quarter = prof.nominal_rate_hz / 4.0;
  Template t;
  t.modality = m;
  for (const auto& s : kStats) t.defs.push_back({s, !stat_insensitive(s, m)});
  if (l.hrv) {
    for (const auto& s : l.hrv_short ? kHrvShort : kHrvFull) {
      const bool insensitive = s == "hr_mean" || s == "ibi_mean";
      t.defs.push_back({s, !insensitive});
    }
  }
  if (l.eda) {
    for (const auto& s : kEda) {
      t.defs.push_back({s, s != "tonic_level"});
    }
  }
  for (const auto& b : l.bands) t.defs.push_back({"bp_" + b.tag, b.hi > quarter});
  for (const auto& b : l.bands) t.defs.push_back({"rel_" + b.tag, b.hi > quarter});
  if (l.centroid_entropy) {
    t.defs.push_back({"spec_centroid", true});
    t.defs.push_back({"spec_entropy", true});
  }
  return t;
}

// Appends values in template order.
struct Sink {
  std::vector<double> values;
  std::vector<bool> valid;

  void put(double v, bool ok = true) {
    if (!ok || !std::isfinite(v)) {
      values.push_back(0.0);
      valid.push_back(false);
    } else {
      values.push_back(v);
      valid.push_back(true);
    }
  }
};

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

void put_stats(Sink& out, const std::vector<double>& x, double fs) {
  const std::size_t n = x.size();
  const double mean = mean_of(x);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, sq = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
    sq += v * v;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  const double sd = std::sqrt(m2);
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const double median = quantile_sorted(sorted, 0.5);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(x[i] - median);
  std::sort(dev.begin(), dev.end());
  std::vector<double> diff;
  diff.reserve(n);
  for (std::size_t i = 1; i < n; ++i) diff.push_back(x[i] - x[i - 1]);
  double mad_diff = 0.0, max_abs_diff = 0.0;
  for (double d : diff) {
    mad_diff += std::abs(d);
    max_abs_diff = std::max(max_abs_diff, std::abs(d));
  }
  mad_diff = diff.empty() ? 0.0 : mad_diff / static_cast<double>(diff.size());
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < n; ++i)
    if ((x[i - 1] - mean) * (x[i] - mean) < 0.0) ++crossings;
  const double duration = static_cast<double>(n) / fs;

  out.put(mean);
  out.put(sd);
  out.put(m2);
  out.put(std::sqrt(sq / static_cast<double>(n)));
  out.put(sorted.front());
  out.put(sorted.back());
  out.put(sorted.back() - sorted.front());
  out.put(median);
  for (double q : {0.05, 0.10, 0.25, 0.75, 0.90, 0.95}) out.put(quantile_sorted(sorted, q));
  out.put(quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25));
  out.put(quantile_sorted(dev, 0.5));
  out.put(sd > 0.0 ? m3 / (sd * sd * sd) : 0.0, sd > 0.0);
  out.put(sd > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0, sd > 0.0);
  out.put(mad_diff);
  out.put(std_of(diff));
  out.put(max_abs_diff);
  out.put(static_cast<double>(crossings) / duration);
}

double sample_at(const std::vector<double>& x, double fs, double t) {
  const auto i = static_cast<long long>(std::llround(t * fs));
  return x[static_cast<std::size_t>(std::clamp<long long>(i, 0, static_cast<long long>(x.size()) - 1))];
}

void put_hrv(Sink& out, const std::vector<double>& x, double fs, bool short_form, double median) {
  const auto peaks = signal::detect_peaks(x, fs);
  std::vector<double> ibi;
  for (std::size_t i = 1; i < peaks.size(); ++i) ibi.push_back(peaks[i] - peaks[i - 1]);
  std::vector<double> sdiff;
  for (std::size_t i = 1; i < ibi.size(); ++i) sdiff.push_back(ibi[i] - ibi[i - 1]);
  std::vector<double> hr;
  for (double v : ibi) hr.push_back(60.0 / v);
  std::vector<double> amps;
  for (double t : peaks) amps.push_back(sample_at(x, fs, t) - median);

  const bool has_ibi = ibi.size() >= 1;
  const bool has_diff = sdiff.size() >= 1;
  std::vector<double> sorted_ibi = ibi;
  std::sort(sorted_ibi.begin(), sorted_ibi.end());
  const double ibi_mean = has_ibi ? (peaks.back() - peaks.front()) / static_cast<double>(ibi.size()) : 0.0;
  const double ibi_std = std_of(ibi);
  double rmssd = 0.0;
  std::size_t over20 = 0, over50 = 0;
  for (double d : sdiff) {
    rmssd += d * d;
    if (std::abs(d) > 0.020) ++over20;
    if (std::abs(d) > 0.050) ++over50;
  }
  rmssd = has_diff ? 1000.0 * std::sqrt(rmssd / static_cast<double>(sdiff.size())) : 0.0;
  const double nd = static_cast<double>(sdiff.size());
  const double sd1 = std::sqrt(0.5) * std_of(sdiff) * 1000.0;
  const double sd2_sq = 2.0 * ibi_std * ibi_std * 1e6 - sd1 * sd1;
  const double sd2 = sd2_sq > 0.0 ? std::sqrt(sd2_sq) : 0.0;

  auto put_named = [&](const std::string& name) {
    if (name == "n_peaks") return out.put(static_cast<double>(peaks.size()));
    if (name == "hr_mean") return out.put(has_ibi ? 60.0 / ibi_mean : 0.0, has_ibi);
    if (name == "hr_std") return out.put(std_of(hr), ibi.size() >= 2);
    if (name == "ibi_mean") return out.put(ibi_mean * 1000.0, has_ibi);
    if (name == "ibi_std") return out.put(ibi_std * 1000.0, ibi.size() >= 2);
    if (name == "rmssd") return out.put(rmssd, has_diff);
    if (name == "pnn20") return out.put(has_diff ? static_cast<double>(over20) / nd : 0.0, has_diff);
    if (name == "pnn50") return out.put(has_diff ? static_cast<double>(over50) / nd : 0.0, has_diff);
    if (name == "ibi_min") return out.put(has_ibi ? sorted_ibi.front() * 1000.0 : 0.0, has_ibi);
    if (name == "ibi_max") return out.put(has_ibi ? sorted_ibi.back() * 1000.0 : 0.0, has_ibi);
    if (name == "ibi_median")
      return out.put(has_ibi ? quantile_sorted(sorted_ibi, 0.5) * 1000.0 : 0.0, has_ibi);
    if (name == "ibi_range")
      return out.put(has_ibi ? (sorted_ibi.back() - sorted_ibi.front()) * 1000.0 : 0.0, has_ibi);
    if (name == "ibi_cv") return out.put(has_ibi ? ibi_std * 1000.0 / (ibi_mean * 1000.0) : 0.0, has_ibi);
    if (name == "sd1") return out.put(sd1, sdiff.size() >= 2);
    if (name == "sd2") return out.put(sd2, sdiff.size() >= 2);
    if (name == "sd_ratio") return out.put(sd2 > 0.0 ? sd1 / sd2 : 0.0, sd2 > 0.0);
    if (name == "peak_amp_mean") return out.put(mean_of(amps), !amps.empty());
    if (name == "peak_amp_std") return out.put(std_of(amps), amps.size() >= 2);
    throw InvalidArgument("unhandled feature " + name);
  };
  for (const auto& name : short_form ? kHrvShort : kHrvFull) put_named(name);
}

void put_eda(Sink& out, const std::vector<double>& x, double fs, double median) {
  const std::size_t n = x.size();
  const double duration = static_cast<double>(n) / fs;
  const double mean = mean_of(x);
  // Least-squares slope against time, per second.
  const double tm = 0.5 * static_cast<double>(n - 1) / fs;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs - tm;
    sxy += t * (x[i] - mean);
    sxx += t * t;
  }
  const std::size_t h = n / 2;
  const double first = std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(h), 0.0) /
                       static_cast<double>(std::max<std::size_t>(h, 1));
  const double second = std::accumulate(x.begin() + static_cast<std::ptrdiff_t>(h), x.end(), 0.0) /
                        static_cast<double>(std::max<std::size_t>(n - h, 1));
  signal::PeakDetectorConfig scr{1.0, 5.0, 0.3};
  const auto peaks = signal::detect_peaks(x, fs, scr);
  std::vector<double> amps;
  for (double t : peaks) amps.push_back(sample_at(x, fs, t) - median);
  double auc = 0.0, energy = 0.0;
  for (double v : x) {
    auc += std::abs(v - median);
    energy += (v - median) * (v - median);
  }
  std::size_t pos = 0;
  double dmax = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = x[i] - x[i - 1];
    if (d > 0.0) ++pos;
    dmax = std::max(dmax, d * fs);
  }
  out.put(mean);
  out.put(sxx > 0.0 ? sxy / sxx : 0.0, sxx > 0.0);
  out.put(second - first);
  out.put(static_cast<double>(peaks.size()));
  out.put(static_cast<double>(peaks.size()) * 60.0 / duration);
  out.put(mean_of(amps), !amps.empty());
  out.put(amps.empty() ? 0.0 : *std::max_element(amps.begin(), amps.end()), !amps.empty());
  out.put(std_of(amps), amps.size() >= 2);
  out.put(auc / static_cast<double>(n));
  out.put(energy / static_cast<double>(n));
  out.put(n > 1 ? static_cast<double>(pos) / static_cast<double>(n - 1) : 0.0, n > 1);
  out.put(dmax);
}

void put_spectral(Sink& out, const std::vector<double>& x, double fs, const Layout& l,
                  const signal::ModalityProfile& prof) {
  const auto spec = fft::variance_spectrum(x);
  const std::size_t n = x.size();
  auto band_power = [&](double lo, double hi) {
    double p = 0.0;
    for (std::size_t k = 1; k < spec.size(); ++k) {
      const double f = fft::bin_frequency(k, n, fs);
      if (f >= lo && f < hi) p += spec[k];
    }
    return p;
  };
  const double ref = band_power(prof.signal_low_hz, prof.nominal_rate_hz / 4.0);
  std::vector<double> abs;
  for (const auto& b : l.bands) abs.push_back(band_power(b.lo, b.hi));
  for (double p : abs) out.put(p);
  for (double p : abs) out.put(ref > 0.0 ? p / ref : 0.0, ref > 0.0);
  if (l.centroid_entropy) {
    double total = 0.0, moment = 0.0;
    for (std::size_t k = 1; k < spec.size(); ++k) {
      total += spec[k];
      moment += spec[k] * fft::bin_frequency(k, n, fs);
    }
    double entropy = 0.0;
    if (total > 0.0) {
      for (std::size_t k = 1; k < spec.size(); ++k) {
        const double p = spec[k] / total;
        if (p > 0.0) entropy -= p * std::log(p);
      }
      entropy /= std::log(static_cast<double>(std::max<std::size_t>(spec.size() - 1, 2)));
    }
    out.put(total > 0.0 ? moment / total : 0.0, total > 0.0);
    out.put(entropy, total > 0.0);
  }
}

}  // namespace

std::vector<std::string> Template::names() const {
  std::vector<std::string> out;
  out.reserve(defs.size());
  for (const auto& d : defs) out.push_back(d.name);
  return out;
}

const Template& default_template(const ModalityId& m) {
  static const std::map<ModalityId, Template> cache = [] {
    std::map<ModalityId, Template> c;
    for (const auto& id : {ModalityId::ecg(), ModalityId::eda(), ModalityId::ppg(),
                           ModalityId::acc(), ModalityId::rr()})
      c[id] = build_template(id);
    return c;
  }();
  auto it = cache.find(m);
  if (it == cache.end()) throw InvalidArgument("no feature template for modality '" + m.key() + "'");
  return it->second;
}

void FeaturePlan::validate() const {
  for (const auto& [m, p] : modalities) {
    const auto& t = default_template(m);
    if (p.k < 1 || p.k > t.size())
      throw InvalidArgument("feature count for " + m.key() + " must be in [1, " +
                            std::to_string(t.size()) + "]");
    std::set<std::string> want;
    for (const auto& d : t.defs) want.insert(d.name);
    std::set<std::string> got(p.ranking.begin(), p.ranking.end());
    if (got != want || p.ranking.size() != t.size())
      throw InvalidArgument("ranking for " + m.key() + " is not a permutation of its template");
  }
}

const ModalityPlan& FeaturePlan::at(const ModalityId& m) const {
  auto it = modalities.find(m);
  if (it == modalities.end()) throw InvalidArgument("feature plan has no entry for " + m.key());
  return it->second;
}

ModalityPlan full_plan(const ModalityId& m) {
  const auto& t = default_template(m);
  return {t.names(), t.size()};
}

FeaturePlan full_plan(const std::vector<ModalityId>& mods) {
  FeaturePlan p;
  for (const auto& m : mods) p.modalities[m] = full_plan(m);
  return p;
}

std::string FeatureBlock::prefix() const { return half_rate ? modality.key() + "_half" : modality.key(); }

double FeatureBlock::value(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw InvalidArgument("feature '" + name + "' not in " + prefix() + " block");
}

FeatureBlock extract_features(const Signal& s, const signal::SynthConfig& config) {
  const auto& m = s.modality;
  const Template& t = default_template(m);
  const Layout l = layout_for(m);
  const signal::ModalityProfile prof = config.profile(m);
  if (s.samples.size() < 2 || s.duration_s() < 1.0)
    throw InvalidArgument("signal shorter than one feature window");
  const double fs = s.sampling_rate_hz;
  Sink sink;
  put_stats(sink, s.samples, fs);
  const double median = sink.values[7];
  if (l.hrv) put_hrv(sink, s.samples, fs, l.hrv_short, median);
  if (l.eda) put_eda(sink, s.samples, fs, median);
  put_spectral(sink, s.samples, fs, l, prof);
  if (sink.values.size() != t.size())
    throw RuntimeError("template size mismatch for " + m.key());
  FeatureBlock b;
  b.modality = m;
  b.half_rate = fs < prof.nominal_rate_hz * 0.75;
  b.names = t.names();
  b.values = std::move(sink.values);
  b.valid = std::move(sink.valid);
  return b;
}

FeatureBlock select(const FeatureBlock& block, const std::vector<std::string>& names) {
  FeatureBlock out;
  out.modality = block.modality;
  out.half_rate = block.half_rate;
  for (const auto& name : names) {
    auto it = std::find(block.names.begin(), block.names.end(), name);
    if (it == block.names.end())
      throw InvalidArgument("unknown feature '" + name + "' for " + block.modality.key());
    const auto i = static_cast<std::size_t>(it - block.names.begin());
    out.names.push_back(name);
    out.values.push_back(block.values[i]);
    out.valid.push_back(block.valid[i]);
  }
  return out;
}

FeatureBlock extract_features(const Signal& s, const ModalityPlan& plan,
                              const signal::SynthConfig& config) {
  const auto& t = default_template(s.modality);
  if (plan.k < 1 || plan.k > plan.ranking.size() || plan.k > t.size())
    throw InvalidArgument("feature plan k out of range for " + s.modality.key());
  const std::vector<std::string> keep(plan.ranking.begin(),
                                      plan.ranking.begin() + static_cast<std::ptrdiff_t>(plan.k));
  return select(extract_features(s, config), keep);
}

std::size_t FeatureVector::size() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.size();
  return n;
}

std::vector<double> FeatureVector::flat() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& b : blocks) out.insert(out.end(), b.values.begin(), b.values.end());
  return out;
}

std::vector<std::string> FeatureVector::flat_names() const {
  std::vector<std::string> out;
  for (const auto& b : blocks)
    for (const auto& n : b.names) out.push_back(b.prefix() + "." + n);
  return out;
}

const FeatureBlock* FeatureVector::block(const ModalityId& m) const {
  for (const auto& b : blocks)
    if (b.modality == m) return &b;
  return nullptr;
}

std::vector<std::string> rank_features(const std::vector<FeatureVector>& set, const ModalityId& m,
                                       bool half_rate) {
  std::map<int, std::vector<const FeatureBlock*>> by_class;
  const std::vector<std::string>* names = nullptr;
  for (const auto& v : set) {
    for (const auto& b : v.blocks) {
      if (b.modality != m || b.half_rate != half_rate) continue;
      if (names == nullptr) names = &b.names;
      if (b.names != *names) throw InvalidArgument("inconsistent feature blocks for " + m.key());
      by_class[v.label].push_back(&b);
    }
  }
  if (names == nullptr) throw InvalidArgument("no " + m.key() + " blocks to rank");
  if (by_class.size() < 2) throw InvalidArgument("feature ranking needs at least two classes");
  const std::size_t p = names->size();
  std::vector<std::pair<double, std::string>> scored;
  std::vector<double> col;
  for (std::size_t j = 0; j < p; ++j) {
    // Per-class sums over sorted values make the score independent of row order.
    std::vector<std::tuple<double, double, double>> stats;  // n, mean, var
    double total_n = 0.0, total_sum = 0.0;
    for (const auto& [c, rows] : by_class) {
      col.clear();
      for (const auto* b : rows) col.push_back(b->values[j]);
      std::sort(col.begin(), col.end());
      const double n = static_cast<double>(col.size());
      double sum = 0.0;
      for (double v : col) sum += v;
      const double mean = sum / n;
      double ss = 0.0;
      for (double v : col) ss += (v - mean) * (v - mean);
      stats.emplace_back(n, mean, ss / n);
      total_n += n;
      total_sum += sum;
    }
    const double grand = total_sum / total_n;
    double between = 0.0, within = 0.0;
    for (const auto& [n, mean, var] : stats) {
      between += n * (mean - grand) * (mean - grand);
      within += n * var;
    }
    const double scale = std::max(1.0, grand * grand) * 1e-24 * total_n;
    double score = 0.0;
    if (within > scale)
      score = between / within;
    else if (between > scale)
      score = std::numeric_limits<double>::infinity();
    scored.emplace_back(score, (*names)[j]);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& s : scored) out.push_back(std::move(s.second));
  return out;
}

std::size_t default_reduced_k(const ModalityId& m) {
  if (m == ModalityId::ecg()) return 12;
  const std::size_t n = default_template(m).size();
  return (n + 3) / 4;
}

const ModalityPlan& AggregationPolicy::noisy_plan(const ModalityId& m) const {
  auto it = noisy.find(m);
  if (it == noisy.end()) throw InvalidArgument("no reduced feature plan for " + m.key());
  return it->second;
}

FeatureVector aggregate(const std::vector<FeatureBlock>& blocks, const signal::QualityReport& report,
                        const AggregationPolicy& policy) {
  std::vector<const FeatureBlock*> ordered;
  for (const auto& b : blocks) ordered.push_back(&b);
  std::sort(ordered.begin(), ordered.end(),
            [](const FeatureBlock* a, const FeatureBlock* b) { return a->modality < b->modality; });
  FeatureVector out;
  for (const auto* b : ordered) {
    switch (report.label(b->modality)) {
      case signal::QualityLabel::kUnreliable:
        break;
      case signal::QualityLabel::kNoisy: {
        const auto& plan = policy.noisy_plan(b->modality);
        const std::vector<std::string> keep(plan.ranking.begin(),
                                            plan.ranking.begin() + static_cast<std::ptrdiff_t>(plan.k));
        out.blocks.push_back(select(*b, keep));
        break;
      }
      case signal::QualityLabel::kReliable:
        out.blocks.push_back(*b);
        break;
    }
  }
  if (out.blocks.empty()) throw InvalidArgument("no usable input: every modality is Unreliable");
  return out;
}

void write_feature_csv(const std::filesystem::path& path, const std::vector<FeatureVector>& set,
                       const FileHeader* header) {
  if (set.empty()) throw InvalidArgument("empty feature set");
  std::vector<std::string> cols = {"window_id", "label"};
  const auto names = set.front().flat_names();
  cols.insert(cols.end(), names.begin(), names.end());
  CsvWriter w(path, cols, header);
  for (const auto& v : set) {
    if (v.flat_names() != names) throw InvalidArgument("feature vectors with differing layouts");
    w.cell(static_cast<std::int64_t>(v.window_id)).cell(v.label);
    for (double x : v.flat()) w.cell(x);
    w.end_row();
  }
}

}  // namespace ehsim::features
