#include "ksl/poisson.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "ksl/errors.hpp"
#include "ksl/spectral.hpp"

namespace ksl {

std::string_view to_string(PoissonBackend b) {
  return b == PoissonBackend::periodic_spectral ? "periodic-spectral" : "free-space-log";
}

PoissonBackend parse_backend(std::string_view s) {
  if (s == "periodic-spectral" || s == "periodic") return PoissonBackend::periodic_spectral;
  if (s == "free-space-log" || s == "free-space" || s == "freespace") return PoissonBackend::free_space;
  throw ConfigError("unknown poisson backend '" + std::string(s) + "'");
}

double cell_average_log(double h) {
  // Mean of ln r over [0,1]^2 is (ln 2)/2 + pi/4 - 3/2; rescale to half-width h/2.
  return std::log(0.5 * h) + 0.5 * std::log(2.0) + 0.25 * std::numbers::pi - 1.5;
}

namespace {

struct PeriodicSpectra {
  Spectrum v, gx, gy;
  double mean;
};

PeriodicSpectra periodic_spectra(const Field& u, bool want_potential) {
  const GridSpec& g = u.grid();
  const Fft2d& fft = Fft2d::get(g.n());
  Spectrum s = fft.forward(u.values());
  const int n = g.n();
  const int h = fft.half();
  PeriodicSpectra out;
  out.mean = s[0].real() / (static_cast<double>(n) * n);
  out.gx.assign(s.size(), 0.0);
  out.gy.assign(s.size(), 0.0);
  if (want_potential) out.v.assign(s.size(), 0.0);
  for (int j = 0; j < n; ++j) {
    const double ky = g.wavenumber(j);
    for (int i = 0; i < h; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * h + i;
      const double kx = g.wavenumber(i);
      const double k2 = kx * kx + ky * ky;
      if (k2 == 0.0) continue;
      const std::complex<double> vhat = s[k] / k2;
      if (want_potential) out.v[k] = vhat;
      out.gx[k] = std::complex<double>(0.0, i == n / 2 ? 0.0 : kx) * vhat;
      out.gy[k] = std::complex<double>(0.0, j == n / 2 ? 0.0 : ky) * vhat;
    }
  }
  return out;
}

// Kernel spectra on the padded 2n grid, cached per (n, L).
struct FreeSpaceKernels {
  Spectrum log_kernel, gx_kernel, gy_kernel;
};

const FreeSpaceKernels& freespace_kernels(const GridSpec& g) {
  static std::map<std::pair<int, double>, std::unique_ptr<FreeSpaceKernels>> cache;
  static std::mutex mu;
  std::lock_guard lock(mu);
  const auto key = std::make_pair(g.n(), g.box_length());
  if (auto it = cache.find(key); it != cache.end()) return *it->second;

  const int n = g.n();
  const int m = 2 * n;
  const double h = g.dx();
  const double c = 1.0 / (2.0 * std::numbers::pi);
  std::vector<double> klog(static_cast<std::size_t>(m) * m), kx(klog.size()), ky(klog.size());
  for (int j = 0; j < m; ++j) {
    const int b = j < n ? j : j - m;
    for (int i = 0; i < m; ++i) {
      const int a = i < n ? i : i - m;
      const std::size_t k = static_cast<std::size_t>(j) * m + i;
      const double area = h * h;
      if (a == 0 && b == 0) {
        klog[k] = -c * cell_average_log(h) * area;
        continue;  // gradient kernel averages to zero on the origin cell
      }
      const double x = a * h, y = b * h;
      const double r2 = x * x + y * y;
      klog[k] = -c * 0.5 * std::log(r2) * area;
      kx[k] = -c * x / r2 * area;
      ky[k] = -c * y / r2 * area;
    }
  }
  const Fft2d& fft = Fft2d::get(m);
  auto ker = std::make_unique<FreeSpaceKernels>();
  ker->log_kernel = fft.forward(klog);
  ker->gx_kernel = fft.forward(kx);
  ker->gy_kernel = fft.forward(ky);
  return *cache.emplace(key, std::move(ker)).first->second;
}

std::vector<double> crop(const std::vector<double>& padded, int n) {
  std::vector<double> out(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      out[static_cast<std::size_t>(j) * n + i] = padded[static_cast<std::size_t>(j) * 2 * n + i];
  return out;
}

Spectrum padded_spectrum(const Field& u) {
  const int n = u.grid().n();
  const int m = 2 * n;
  std::vector<double> pad(static_cast<std::size_t>(m) * m, 0.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) pad[static_cast<std::size_t>(j) * m + i] = u(i, j);
  return Fft2d::get(m).forward(pad);
}

std::vector<double> convolve(const Spectrum& us, const Spectrum& ks, int n) {
  Spectrum prod(us.size());
  for (std::size_t k = 0; k < us.size(); ++k) prod[k] = us[k] * ks[k];
  return crop(Fft2d::get(2 * n).inverse(prod), n);
}

void remove_mean(std::vector<double>& v) {
  const double mean = compensated_sum(v) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

void check_finite(const Field& u) {
  if (!u.all_finite()) throw DomainError("poisson source contains non-finite values");
}

}  // namespace

VectorField periodic_gradient(const Field& u) {
  const auto s = periodic_spectra(u, false);
  const Fft2d& fft = Fft2d::get(u.grid().n());
  VectorField g(u.grid());
  g.x = fft.inverse(s.gx);
  g.y = fft.inverse(s.gy);
  return g;
}

ChemoSolution solve_periodic(const Field& u) {
  check_finite(u);
  const auto s = periodic_spectra(u, true);
  const Fft2d& fft = Fft2d::get(u.grid().n());
  VectorField g(u.grid());
  g.x = fft.inverse(s.gx);
  g.y = fft.inverse(s.gy);
  return {Field(u.grid(), fft.inverse(s.v)), std::move(g), PoissonBackend::periodic_spectral, s.mean};
}

VectorField freespace_gradient(const Field& u) {
  const auto& ker = freespace_kernels(u.grid());
  const Spectrum us = padded_spectrum(u);
  const int n = u.grid().n();
  VectorField g(u.grid());
  g.x = convolve(us, ker.gx_kernel, n);
  g.y = convolve(us, ker.gy_kernel, n);
  return g;
}

ChemoSolution solve_freespace(const Field& u) {
  check_finite(u);
  const GridSpec& g = u.grid();
  const double quarter = 0.25 * g.box_length();
  CompensatedSum inner, total;
  for (int j = 0; j < g.n(); ++j)
    for (int i = 0; i < g.n(); ++i) {
      const double a = std::abs(u(i, j));
      total.add(a);
      if (std::abs(g.coord(i)) <= quarter && std::abs(g.coord(j)) <= quarter) inner.add(a);
    }
  if (total.value() > 0.0 && inner.value() < (1.0 - 1e-6) * total.value())
    throw ConfigError("free-space solve needs the source inside the inner half-box");

  const auto& ker = freespace_kernels(g);
  const Spectrum us = padded_spectrum(u);
  std::vector<double> v = convolve(us, ker.log_kernel, g.n());
  remove_mean(v);
  VectorField grad(g);
  grad.x = convolve(us, ker.gx_kernel, g.n());
  grad.y = convolve(us, ker.gy_kernel, g.n());
  return {Field(g, std::move(v)), std::move(grad), PoissonBackend::free_space, 0.0};
}

namespace {

double bilinear(const GridSpec& g, const std::vector<double>& f, double x, double y) {
  const int n = g.n();
  const double fx = (x - g.coord(0)) / g.dx(), fy = (y - g.coord(0)) / g.dx();
  const double ix = std::floor(fx), iy = std::floor(fy);
  const double ax = fx - ix, ay = fy - iy;
  auto at = [&](long i, long j) {
    i = ((i % n) + n) % n;
    j = ((j % n) + n) % n;
    return f[g.index(static_cast<int>(i), static_cast<int>(j))];
  };
  const long i0 = static_cast<long>(ix), j0 = static_cast<long>(iy);
  return (1 - ax) * (1 - ay) * at(i0, j0) + ax * (1 - ay) * at(i0 + 1, j0) + (1 - ax) * ay * at(i0, j0 + 1) +
         ax * ay * at(i0 + 1, j0 + 1);
}

}  // namespace

double mean_radial_gradient(const VectorField& grad_v, Point center, double r, int samples) {
  CompensatedSum acc;
  for (int k = 0; k < samples; ++k) {
    const double a = 2.0 * std::numbers::pi * (k + 0.5) / samples;
    const double c = std::cos(a), s = std::sin(a);
    const double x = center.x + r * c, y = center.y + r * s;
    acc.add(c * bilinear(grad_v.grid, grad_v.x, x, y) + s * bilinear(grad_v.grid, grad_v.y, x, y));
  }
  return acc.value() / samples;
}

CrossValidation cross_validate(const Field& u) {
  const GridSpec& g = u.grid();
  const VectorField p = periodic_gradient(u);
  const VectorField f = freespace_gradient(u);
  const double r_max = g.box_length() / 8.0;
  double diff = 0.0, scale = 0.0;
  for (int j = 0; j < g.n(); ++j)
    for (int i = 0; i < g.n(); ++i) {
      const double x = g.coord(i), y = g.coord(j);
      if (x * x + y * y > r_max * r_max) continue;
      const std::size_t k = g.index(i, j);
      diff = std::max(diff, std::hypot(p.x[k] - f.x[k], p.y[k] - f.y[k]));
      scale = std::max(scale, std::hypot(f.x[k], f.y[k]));
    }
  CrossValidation cv;
  cv.discrepancy = scale > 0.0 ? diff / scale : 0.0;
  cv.sufficient_box = cv.discrepancy < cv.tolerance;
  return cv;
}

}  // namespace ksl
