#include "ehsim/common/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

namespace ehsim::fft {
namespace {

// FFTW's planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  std::size_t n = 0;

  explicit Plans(std::size_t len) : n(len) {
    std::lock_guard lock(planner_mutex());
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, spec, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real, FFTW_ESTIMATE);
  }
  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spec);
  }
};

Plans& plans_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<Plans>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Plans>(n);
  return *slot;
}

}  // namespace

std::vector<std::complex<double>> forward(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  Plans& p = plans_for(n);
  std::copy(x.begin(), x.end(), p.real);
  fftw_execute(p.forward);
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {p.spec[k][0], p.spec[k][1]};
  return out;
}

std::vector<double> inverse(std::span<const std::complex<double>> bins, std::size_t n) {
  if (n == 0) return {};
  Plans& p = plans_for(n);
  for (std::size_t k = 0; k < n / 2 + 1; ++k) {
    const auto v = k < bins.size() ? bins[k] : std::complex<double>{};
    p.spec[k][0] = v.real();
    p.spec[k][1] = v.imag();
  }
  fftw_execute(p.backward);
  std::vector<double> out(p.real, p.real + n);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

std::vector<double> variance_spectrum(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const auto bins = forward(x);
  std::vector<double> out(bins.size(), 0.0);
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  for (std::size_t k = 1; k < bins.size(); ++k) {
    // Interior bins appear twice in the two-sided spectrum; Nyquist once.
    const bool nyquist = (n % 2 == 0) && (k == n / 2);
    out[k] = (nyquist ? 1.0 : 2.0) * std::norm(bins[k]) / nn;
  }
  return out;
}

}  // namespace ehsim::fft
