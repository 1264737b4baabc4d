#include "postfilter/dsp/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <stdexcept>

#include "postfilter/autodiff/tensor.hpp"

namespace postfilter::dsp {
namespace {

// FFTW planning is not thread-safe; plans are created once per size and
// executed through the new-array interface.
struct PlanCache {
  std::mutex mutex;
  std::map<std::size_t, fftw_plan> forward;
  std::map<std::size_t, fftw_plan> inverse;

  ~PlanCache() {
    for (auto& [n, plan] : forward) fftw_destroy_plan(plan);
    for (auto& [n, plan] : inverse) fftw_destroy_plan(plan);
  }
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

template <typename Make>
fftw_plan lookup(std::map<std::size_t, fftw_plan>& plans, std::size_t n, Make make) {
  std::lock_guard lock(cache().mutex);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  fftw_plan plan = make();
  plans.emplace(n, plan);
  return plan;
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> signal, std::size_t n_fft) {
  if (n_fft == 0) throw ContractViolation("rfft: n_fft must be positive");
  double* in = fftw_alloc_real(n_fft);
  fftw_complex* out = fftw_alloc_complex(n_fft / 2 + 1);
  std::fill(in, in + n_fft, 0.0);
  std::copy_n(signal.begin(), std::min(n_fft, signal.size()), in);
  fftw_plan plan = lookup(cache().forward, n_fft, [&] {
    return fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), in, out, FFTW_ESTIMATE);
  });
  fftw_execute_dft_r2c(plan, in, out);
  std::vector<std::complex<double>> result(n_fft / 2 + 1);
  for (std::size_t k = 0; k < result.size(); ++k) result[k] = {out[k][0], out[k][1]};
  fftw_free(in);
  fftw_free(out);
  return result;
}

std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n_fft) {
  if (spectrum.size() != n_fft / 2 + 1) {
    throw ContractViolation("irfft: expected " + std::to_string(n_fft / 2 + 1) + " bins, got " +
                            std::to_string(spectrum.size()));
  }
  fftw_complex* in = fftw_alloc_complex(spectrum.size());
  double* out = fftw_alloc_real(n_fft);
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    in[k][0] = spectrum[k].real();
    in[k][1] = spectrum[k].imag();
  }
  fftw_plan plan = lookup(cache().inverse, n_fft, [&] {
    return fftw_plan_dft_c2r_1d(static_cast<int>(n_fft), in, out, FFTW_ESTIMATE);
  });
  fftw_execute_dft_c2r(plan, in, out);
  std::vector<double> result(out, out + n_fft);
  const double inv = 1.0 / static_cast<double>(n_fft);
  for (double& v : result) v *= inv;
  fftw_free(in);
  fftw_free(out);
  return result;
}

}  // namespace postfilter::dsp
