#pragma once

// Real-to-complex FFT on square grids, backed by FFTW.
//
// Plans are created once per size and shared; execution uses the new-array
// interface so concurrent transforms on distinct buffers are safe.

#include <complex>
#include <span>
#include <vector>

#include "ksl/field.hpp"

namespace ksl {

using Spectrum = std::vector<std::complex<double>>;

class Fft2d {
 public:
  /// Size-n square transform; n need not be a grid size (padded grids use 2n).
  static const Fft2d& get(int n);

  int n() const { return n_; }
  int half() const { return n_ / 2 + 1; }
  std::size_t spectrum_size() const { return static_cast<std::size_t>(n_) * half(); }

  Spectrum forward(std::span<const double> real) const;
  /// Normalized inverse (includes the 1/n^2 factor).
  std::vector<double> inverse(const Spectrum& spec) const;

 private:
  explicit Fft2d(int n);
  int n_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

/// Signed integer frequency for FFT index j of an n-point axis.
inline int signed_frequency(int j, int n) { return j <= n / 2 ? j : j - n; }

/// Applies multiplier(kx, ky) to the spectrum of f and transforms back.
template <class Multiplier>
Field apply_multiplier(const Field& f, Multiplier&& mult) {
  const GridSpec& g = f.grid();
  const Fft2d& fft = Fft2d::get(g.n());
  Spectrum s = fft.forward(f.values());
  const int n = g.n();
  const int h = fft.half();
  for (int j = 0; j < n; ++j) {
    const double ky = g.wavenumber(j);
    for (int i = 0; i < h; ++i) s[static_cast<std::size_t>(j) * h + i] *= mult(g.wavenumber(i), ky, i, j);
  }
  return Field(g, fft.inverse(s));
}

}  // namespace ksl
