#include "ksl/heat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ksl/errors.hpp"
#include "ksl/spectral.hpp"

namespace ksl {

Field heat_evolve(const Field& f, double t) {
  if (!(t >= 0.0)) throw DomainError("heat_evolve needs t >= 0");
  if (t == 0.0) return f;
  return apply_multiplier(f, [t](double kx, double ky, int, int) {
    return std::complex<double>(std::exp(-(kx * kx + ky * ky) * t), 0.0);
  });
}

namespace {

VectorField gradient_with_multiplier(const Field& f, double t) {
  const GridSpec& g = f.grid();
  const Fft2d& fft = Fft2d::get(g.n());
  const Spectrum s = fft.forward(f.values());
  Spectrum sx(s.size()), sy(s.size());
  const int n = g.n();
  const int h = fft.half();
  for (int j = 0; j < n; ++j) {
    const double ky = j == n / 2 ? 0.0 : g.wavenumber(j);
    const double kyf = g.wavenumber(j);
    for (int i = 0; i < h; ++i) {
      const double kx = i == n / 2 ? 0.0 : g.wavenumber(i);
      const double kxf = g.wavenumber(i);
      const double decay = t > 0.0 ? std::exp(-(kxf * kxf + kyf * kyf) * t) : 1.0;
      const std::size_t k = static_cast<std::size_t>(j) * h + i;
      sx[k] = std::complex<double>(0.0, kx * decay) * s[k];
      sy[k] = std::complex<double>(0.0, ky * decay) * s[k];
    }
  }
  VectorField out(g);
  out.x = fft.inverse(sx);
  out.y = fft.inverse(sy);
  return out;
}

double t_power(double t, double e) { return e == 0.0 ? 1.0 : std::pow(t, e); }

}  // namespace

VectorField grad_heat_evolve(const Field& f, double t) {
  if (!(t > 0.0)) throw DomainError("grad_heat_evolve needs t > 0");
  return gradient_with_multiplier(f, t);
}

VectorField spectral_gradient(const Field& f) { return gradient_with_multiplier(f, 0.0); }

LqLpReport verify_lq_lp(const Field& z, double q, double p, std::span<const double> t_list) {
  if (!(q >= 1.0) || !(p >= 1.0)) throw DomainError("exponents must be >= 1");
  if (q > p) throw DomainError("L^q -> L^p estimate needs q <= p");
  LqLpReport rep;
  rep.q = q;
  rep.p = p;
  const double zq = lp_norm(z, q);
  const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
  const double inv_q = std::isinf(q) ? 0.0 : 1.0 / q;
  for (double t : t_list) {
    if (!(t > 0.0)) throw DomainError("times must be positive");
    const double num = lp_norm(heat_evolve(z, t), p);
    const double den = t_power(t, inv_p - inv_q) * zq;
    const double r = den > 0.0 ? num / den : 0.0;
    rep.ratios.emplace_back(t, r);
    rep.max_ratio = std::max(rep.max_ratio, r);
  }
  return rep;
}

void HyperNormRecord::add(double t, double value) {
  samples.emplace_back(t, value);
  sup_value = std::max(sup_value, value);
}

namespace {

std::vector<double> usable_times(const GridSpec& g, std::span<const double> t_grid, bool& truncated) {
  const double floor_t = resolution_floor(g);
  std::vector<double> ts;
  for (double t : t_grid) {
    if (t < floor_t)
      truncated = true;
    else
      ts.push_back(t);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

}  // namespace

HyperNormRecord hyper_limit_profile(const Field& z, double p, std::span<const double> t_grid) {
  if (!(p > 1.0)) throw DomainError("profile exponent must exceed 1");
  HyperNormRecord rec;
  rec.p = p;
  for (double t : usable_times(z.grid(), t_grid, rec.truncated))
    rec.add(t, std::pow(t, 1.0 - 1.0 / p) * lp_norm(heat_evolve(z, t), p));
  return rec;
}

HyperNormRecord hyper_limit_profile(const GridSpec& grid, const AtomSpec& atoms, double p,
                                    std::span<const double> t_grid) {
  if (!(p > 1.0)) throw DomainError("profile exponent must exceed 1");
  HyperNormRecord rec;
  rec.p = p;
  for (double t : usable_times(grid, t_grid, rec.truncated)) {
    AtomSpec at = atoms;
    at.delta = atoms.delta + t;
    rec.add(t, std::pow(t, 1.0 - 1.0 / p) * lp_norm(mollify_atoms(grid, at), p));
  }
  return rec;
}

double single_atom_plateau(const GridSpec& grid, double p, double t) {
  if (t < resolution_floor(grid)) throw ResolutionError("plateau time below the resolution floor");
  AtomSpec a{{Point{}}, {1.0}, t};
  return std::pow(t, 1.0 - 1.0 / p) * lp_norm(mollify_atoms(grid, a), p);
}

}  // namespace ksl
