#include "ksl/spectral.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

namespace ksl {

namespace {
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

const Fft2d& Fft2d::get(int n) {
  static std::map<int, std::unique_ptr<Fft2d>> cache;
  std::lock_guard lock(plan_mutex());
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::unique_ptr<Fft2d>(new Fft2d(n))).first;
  return *it->second;
}

Fft2d::Fft2d(int n) : n_(n) {
  const std::size_t real_size = static_cast<std::size_t>(n) * n;
  double* r = fftw_alloc_real(real_size);
  fftw_complex* c = fftw_alloc_complex(spectrum_size());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  forward_plan_ = fftw_plan_dft_r2c_2d(n, n, r, c, flags);
  inverse_plan_ = fftw_plan_dft_c2r_2d(n, n, c, r, flags | FFTW_DESTROY_INPUT);
  fftw_free(r);
  fftw_free(c);
}

Spectrum Fft2d::forward(std::span<const double> real) const {
  std::vector<double> in(real.begin(), real.end());
  Spectrum out(spectrum_size());
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

std::vector<double> Fft2d::inverse(const Spectrum& spec) const {
  Spectrum in = spec;
  std::vector<double> out(static_cast<std::size_t>(n_) * n_);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(in.data()), out.data());
  const double scale = 1.0 / (static_cast<double>(n_) * n_);
  for (double& v : out) v *= scale;
  return out;
}

}  // namespace ksl
