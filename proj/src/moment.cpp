#include "ksl/moment.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <tuple>

#include "ksl/errors.hpp"
#include "ksl/poisson.hpp"
#include "ksl/spectral.hpp"

namespace ksl {

namespace {

constexpr double kPi = std::numbers::pi;

// Minimum-image displacement along one periodic axis.
double wrap(double d, double L) { return d - L * std::round(d / L); }

}  // namespace

double psi_unit(double r2) { return r2 < 1.0 ? (1.0 - r2) * (1.0 - r2) : 0.0; }

Point psi_unit_gradient(Point x) {
  const double r2 = x.x * x.x + x.y * x.y;
  if (r2 >= 1.0) return {};
  const double f = -4.0 * (1.0 - r2);
  return {f * x.x, f * x.y};
}

double psi_unit_laplacian(double r2) { return r2 < 1.0 ? 16.0 * r2 - 8.0 : 0.0; }

double WeightPsi::value(Point x) const {
  const double X = (x.x - center.x) / radius, Y = (x.y - center.y) / radius;
  return psi_unit(X * X + Y * Y);
}

Point WeightPsi::gradient(Point x) const {
  const Point g = psi_unit_gradient({(x.x - center.x) / radius, (x.y - center.y) / radius});
  return {g.x / radius, g.y / radius};
}

double WeightPsi::laplacian(Point x) const {
  const double X = (x.x - center.x) / radius, Y = (x.y - center.y) / radius;
  return psi_unit_laplacian(X * X + Y * Y) / (radius * radius);
}

double WeightPsi::cell_laplacian(Point x, double h) const {
  const double X = (x.x - center.x) / radius, Y = (x.y - center.y) / radius, H = h / radius;
  const double hx = 0.5 * H;
  const double nx = std::max(0.0, std::abs(X) - hx), ny = std::max(0.0, std::abs(Y) - hx);
  if (nx * nx + ny * ny >= 1.0) return 0.0;
  const double fx = std::abs(X) + hx, fy = std::abs(Y) + hx;
  double avg;
  if (fx * fx + fy * fy <= 1.0) {
    avg = 16.0 * (X * X + Y * Y + H * H / 6.0) - 8.0;
  } else {
    constexpr int S = 32;
    double sum = 0.0;
    for (int b = 0; b < S; ++b)
      for (int a = 0; a < S; ++a) {
        const double px = X + ((a + 0.5) / S - 0.5) * H, py = Y + ((b + 0.5) / S - 0.5) * H;
        sum += psi_unit_laplacian(px * px + py * py);
      }
    avg = sum / (S * S);
  }
  return avg / (radius * radius);
}

double measure_gradient_lipschitz(double reach, bool subtract_core, std::uint64_t seed, std::size_t pairs) {
  const double core = subtract_core ? 4.0 : 0.0;
  // Hessian of psi inside the unit ball: -4(1-r^2) I + 8 x x^T (limit from inside at r = 1).
  double best = 0.0;
  const int samples = 4000;
  const double rmax = std::min(reach, 1.0);
  for (int k = 0; k <= samples; ++k) {
    const double r = rmax * k / samples;
    const double a = -4.0 * (1.0 - r * r) + core;
    const double hxx = a + 8.0 * r * r, hyy = a;  // along x = (r, 0)
    best = std::max({best, std::abs(hxx), std::abs(hyy)});
  }
  if (reach > 1.0) best = std::max(best, core);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-reach, reach);
  std::normal_distribution<double> gauss(0.0, 1e-3 * reach);
  auto draw = [&] {
    for (;;) {
      const Point p{uni(rng), uni(rng)};
      if (p.x * p.x + p.y * p.y <= reach * reach) return p;
    }
  };
  auto field = [&](Point p) {
    const Point g = psi_unit_gradient(p);
    return Point{g.x + core * p.x, g.y + core * p.y};
  };
  for (std::size_t k = 0; k < pairs; ++k) {
    const Point x = draw();
    Point y = (k % 2 == 0) ? draw() : Point{x.x + gauss(rng), x.y + gauss(rng)};
    if (y.x * y.x + y.y * y.y > reach * reach) continue;
    const double d = std::hypot(x.x - y.x, x.y - y.y);
    if (d == 0.0) continue;
    const Point fx = field(x), fy = field(y);
    best = std::max(best, std::hypot(fx.x - fy.x, fx.y - fy.y) / d);
  }
  return best;
}

WeightPsi build_psi(const GridSpec& grid, Point center, double radius, double improved_rho) {
  if (!(radius >= 6.0 * grid.dx())) throw ResolutionError("probe radius below 6 dx");
  const double half = 0.5 * grid.box_length();
  if (std::abs(center.x) + radius > half || std::abs(center.y) + radius > half)
    throw DomainError("probe ball leaves the box");
  if (!(improved_rho > 0.0 && improved_rho <= 1.0)) throw DomainError("improved-constant radius must lie in (0, 1]");
  WeightPsi w;
  w.center = center;
  w.radius = radius;
  w.improved_rho = improved_rho;
  w.lipschitz_B = measure_gradient_lipschitz(1.5, false, 11, 200'000);
  w.improved_B = measure_gradient_lipschitz(improved_rho, true, 13, 200'000);
  return w;
}

namespace {

// Calls f(i, j, x) for every cell whose node lies within `reach` of the centre.
template <class F>
void for_cells_near(const GridSpec& g, Point c, double reach, F&& f) {
  const double dx = g.dx();
  const double half = 0.5 * g.box_length();
  const int n = g.n();
  const int i0 = static_cast<int>(std::floor((c.x - reach + half) / dx)) - 1;
  const int i1 = static_cast<int>(std::ceil((c.x + reach + half) / dx)) + 1;
  const int j0 = static_cast<int>(std::floor((c.y - reach + half) / dx)) - 1;
  const int j1 = static_cast<int>(std::ceil((c.y + reach + half) / dx)) + 1;
  for (int j = std::max(0, j0); j <= std::min(n - 1, j1); ++j)
    for (int i = std::max(0, i0); i <= std::min(n - 1, i1); ++i) f(i, j, Point{g.coord(i), g.coord(j)});
}

}  // namespace

double local_moment(const Field& u, const WeightPsi& psi) {
  CompensatedSum s;
  for_cells_near(u.grid(), psi.center, psi.radius, [&](int i, int j, Point x) { s.add(psi.value(x) * u(i, j)); });
  return s.value() * u.grid().cell_area();
}

std::string_view to_string(FarField f) { return f == FarField::exact ? "exact" : "subsample"; }

FarField parse_far_field(std::string_view s) {
  if (s == "exact") return FarField::exact;
  if (s == "subsample") return FarField::subsample;
  throw ConfigError("unknown pair sum '" + std::string(s) + "' (exact, subsample)");
}

namespace {

// Spectra of x/|x|^2 and y/|y|^2 sampled at node displacements of a 2n padded grid, zero at the origin.
const std::pair<Spectrum, Spectrum>& pair_kernel_spectra(const GridSpec& g) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, std::pair<Spectrum, Spectrum>> cache;
  std::lock_guard lock(mutex);
  const auto key = std::make_pair(g.n(), g.box_length());
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const int p = 2 * g.n();
  std::vector<double> kx(static_cast<std::size_t>(p) * p, 0.0), ky(kx.size(), 0.0);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < p; ++i) {
      if (i == 0 && j == 0) continue;
      const double x = signed_frequency(i, p) * g.dx(), y = signed_frequency(j, p) * g.dx();
      const double r2 = x * x + y * y;
      kx[static_cast<std::size_t>(j) * p + i] = x / r2;
      ky[static_cast<std::size_t>(j) * p + i] = y / r2;
    }
  const Fft2d& fft = Fft2d::get(p);
  return cache.emplace(key, std::make_pair(fft.forward(kx), fft.forward(ky))).first->second;
}

struct PairCell {
  Point x;
  double u;
  Point grad;
  double lap;
  int i = 0, j = 0;
};

// Pairs with y outside the ball, kept with probability q so that about `budget` pairs are evaluated in total.
void subsampled_far_field(const std::vector<PairCell>& inside, const std::vector<PairCell>& outside,
                          std::size_t budget, std::uint64_t seed, CompensatedSum& bo, MomentDerivative& out) {
  double q = 1.0;
  if (budget < inside.size() * (inside.size() + outside.size())) {
    const double spare = static_cast<double>(budget) - static_cast<double>(inside.size() * inside.size());
    q = std::clamp(spare / (static_cast<double>(inside.size()) * outside.size()), 1e-3, 1.0);
    out.subsampled = q < 1.0;
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(q);
  double variance = 0.0;
  std::size_t evaluated = inside.size() * inside.size();
  for (const PairCell& y : outside) {
    if (out.subsampled && !keep(rng)) continue;
    double c = 0.0;
    for (const PairCell& p : inside) {
      const double rx = p.x.x - y.x.x, ry = p.x.y - y.x.y;
      c += (p.grad.x * rx + p.grad.y * ry) / (rx * rx + ry * ry) * p.u;
    }
    evaluated += inside.size();
    c *= 2.0 * y.u / q;
    bo.add(c);
    variance += (1.0 - q) * c * c;
  }
  out.pairs = evaluated;
  out.monte_carlo_error = std::sqrt(variance);
}

}  // namespace

MomentDerivative moment_derivative_formula(const Field& u, const WeightPsi& psi, std::size_t max_pairs,
                                           FarField far, std::uint64_t seed) {
  const GridSpec& g = u.grid();
  const double area = g.cell_area();
  MomentDerivative out;

  CompensatedSum lin;
  for_cells_near(g, psi.center, psi.radius + g.dx(),
                 [&](int i, int j, Point x) { lin.add(psi.cell_laplacian(x, g.dx()) * u(i, j)); });
  out.linear = lin.value() * area;

  const double floor = 1e-12 * u.max();
  std::vector<PairCell> inside, outside;
  const double R2 = psi.radius * psi.radius;
  for (int j = 0; j < g.n(); ++j)
    for (int i = 0; i < g.n(); ++i) {
      const double v = u(i, j);
      if (!(v > floor)) continue;
      const Point x{g.coord(i), g.coord(j)};
      const double dx0 = x.x - psi.center.x, dy0 = x.y - psi.center.y;
      if (dx0 * dx0 + dy0 * dy0 < R2)
        inside.push_back({x, v, psi.gradient(x), psi.laplacian(x), i, j});
      else
        outside.push_back({x, v, {}, 0.0, i, j});
    }

  // Both points in the ball: symmetric kernel, unordered pairs counted twice.
  CompensatedSum bb;
  for (std::size_t a = 0; a < inside.size(); ++a) {
    const PairCell& p = inside[a];
    double row = 0.0;
    for (std::size_t b = a + 1; b < inside.size(); ++b) {
      const PairCell& q = inside[b];
      const double rx = p.x.x - q.x.x, ry = p.x.y - q.x.y;
      row += ((p.grad.x - q.grad.x) * rx + (p.grad.y - q.grad.y) * ry) / (rx * rx + ry * ry) * q.u;
    }
    bb.add(2.0 * p.u * row);
  }
  // Coincident cells: direction-averaged limit of the kernel, Lap psi / 2.
  CompensatedSum diag;
  for (const PairCell& p : inside) diag.add(0.5 * p.lap * p.u * p.u * area);

  // One point outside the ball, where grad psi vanishes.
  const std::size_t full_pairs = inside.size() * (inside.size() + outside.size());
  const bool over_budget = full_pairs > max_pairs && !outside.empty();
  CompensatedSum bo;
  if (over_budget && far == FarField::exact) {
    // sum_p 2 u_p grad psi(p) . sum_y u_y (p - y)/|p - y|^2 with y outside, as one padded convolution
    const int n = g.n(), p = 2 * n;
    std::vector<double> w(static_cast<std::size_t>(p) * p, 0.0);
    for (const PairCell& y : outside) w[static_cast<std::size_t>(y.j) * p + y.i] = y.u;
    const Fft2d& fft = Fft2d::get(p);
    const Spectrum ws = fft.forward(w);
    const auto& [kx, ky] = pair_kernel_spectra(g);
    Spectrum sx(ws.size()), sy(ws.size());
    for (std::size_t m = 0; m < ws.size(); ++m) {
      sx[m] = ws[m] * kx[m];
      sy[m] = ws[m] * ky[m];
    }
    const std::vector<double> ex = fft.inverse(sx), ey = fft.inverse(sy);
    for (const PairCell& c : inside) {
      const std::size_t k = static_cast<std::size_t>(c.j) * p + c.i;
      bo.add(2.0 * c.u * (c.grad.x * ex[k] + c.grad.y * ey[k]));
    }
    out.pairs = full_pairs;
  } else {
    subsampled_far_field(inside, outside, over_budget ? max_pairs : full_pairs, seed, bo, out);
  }
  const double a2 = area * area;
  const double scale = -1.0 / (4.0 * kPi);
  out.diagonal = scale * diag.value() * area;
  out.bilinear = scale * (bb.value() + bo.value()) * a2 + out.diagonal;
  out.monte_carlo_error *= std::abs(scale) * a2;
  out.total = out.linear + out.bilinear;
  return out;
}

double moment_derivative_spectral(const Field& u, const WeightPsi& psi, PoissonBackend backend) {
  const VectorField grad_v = chemo_gradient(u, backend);
  const GridSpec& g = u.grid();
  CompensatedSum s;
  for_cells_near(g, psi.center, psi.radius + g.dx(), [&](int i, int j, Point x) {
    const Point gp = psi.gradient(x);
    const std::size_t k = g.index(i, j);
    s.add(u(i, j) * (psi.cell_laplacian(x, g.dx()) + grad_v.x[k] * gp.x + grad_v.y[k] * gp.y));
  });
  return s.value() * g.cell_area();
}

double moment_derivative_envelope(double mass, double radius) {
  return (8.0 * mass + mass * mass / kPi) / (radius * radius);
}

double disc_cell_fraction(Point c, double h, double r) {
  const double hx = 0.5 * h;
  const double nx = std::max(0.0, std::abs(c.x) - hx), ny = std::max(0.0, std::abs(c.y) - hx);
  if (nx * nx + ny * ny >= r * r) return 0.0;
  const double fx = std::abs(c.x) + hx, fy = std::abs(c.y) + hx;
  if (fx * fx + fy * fy <= r * r) return 1.0;
  constexpr int S = 32;
  int inside = 0;
  for (int b = 0; b < S; ++b) {
    const double y = c.y + ((b + 0.5) / S - 0.5) * h;
    for (int a = 0; a < S; ++a) {
      const double x = c.x + ((a + 0.5) / S - 0.5) * h;
      if (x * x + y * y <= r * r) ++inside;
    }
  }
  return static_cast<double>(inside) / (S * S);
}

double ball_mass(const Field& u, Point center, double r) {
  const GridSpec& g = u.grid();
  const double L = g.box_length();
  CompensatedSum s;
  for_cells_near(g, center, r + g.dx(), [&](int i, int j, Point x) {
    const double f = disc_cell_fraction({wrap(x.x - center.x, L), wrap(x.y - center.y, L)}, g.dx(), r);
    if (f > 0.0) s.add(f * u(i, j));
  });
  return s.value() * g.cell_area();
}

namespace {

const Spectrum& disc_spectrum(const GridSpec& g, double r) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, double>, Spectrum> cache;
  std::lock_guard lock(mutex);
  const auto key = std::make_tuple(g.n(), g.box_length(), r);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const int n = g.n();
  std::vector<double> kernel(g.size());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      // displacement of node (i, j) from the origin node, minimum image
      const double x = signed_frequency(i, n) * g.dx(), y = signed_frequency(j, n) * g.dx();
      kernel[g.index(i, j)] = disc_cell_fraction({x, y}, g.dx(), r);
    }
  return cache.emplace(key, Fft2d::get(n).forward(kernel)).first->second;
}

}  // namespace

SlidingMass sliding_ball_mass(const Field& u, double r) {
  const GridSpec& g = u.grid();
  if (!(r >= 3.0 * g.dx())) throw ResolutionError("sliding-ball radius below 3 dx");
  if (!(r < 0.5 * g.box_length())) throw DomainError("sliding-ball radius exceeds half the box");
  const Fft2d& fft = Fft2d::get(g.n());
  Spectrum s = fft.forward(u.values());
  const Spectrum& k = disc_spectrum(g, r);
  for (std::size_t m = 0; m < s.size(); ++m) s[m] *= k[m];
  const std::vector<double> conv = fft.inverse(s);
  const auto it = std::max_element(conv.begin(), conv.end());
  const auto idx = static_cast<std::size_t>(it - conv.begin());
  const int i = static_cast<int>(idx % g.n()), j = static_cast<int>(idx / g.n());
  return {*it * g.cell_area(), {g.coord(i), g.coord(j)}};
}

bool h0_identity_holds(double rho, double delta) {
  using boost::multiprecision::cpp_rational;
  const cpp_rational r(rho), d(delta);
  const cpp_rational a = (1 - r * r) * (1 - r * r);
  const cpp_rational one_minus_h0 = a + (1 - a) * (1 - d);
  return 1 - one_minus_h0 == d * (1 - a);
}

namespace {

double h0_value(double rho, double delta) {
  using boost::multiprecision::cpp_rational;
  const cpp_rational r(rho), d(delta);
  const cpp_rational a = (1 - r * r) * (1 - r * r);
  return static_cast<double>(1 - (a + (1 - a) * (1 - d)));
}

}  // namespace

LocalizationParams make_localization_params(double total_mass, double eps0, double m0, double m, double rho,
                                            double delta, double rho1) {
  LocalizationParams p;
  p.eps0 = eps0;
  p.m0 = m0;
  p.m = m;
  p.rho = rho;
  p.delta = delta;
  p.rho1 = rho1;
  p.H0 = h0_value(rho, delta);
  p.H1 = h0_value(rho, 0.5 * delta);
  p.h0_identity_exact = h0_identity_holds(rho, delta) && h0_identity_holds(rho, 0.5 * delta);
  p.R0 = 6.0 * 128.0 * kPi * total_mass / eps0;
  p.beta = 0.5 * std::sqrt(p.H1);
  p.validate();
  return p;
}

void LocalizationParams::validate() const {
  auto unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!(eps0 > 0.0 && eps0 < 8.0 * kPi)) throw ConfigError("eps0 must lie in (0, 8 pi)");
  if (!unit(rho) || !unit(delta) || !unit(rho1)) throw ConfigError("rho, delta and rho1 must lie in (0, 1)");
  if (!unit(H0) || !unit(H1)) throw ConfigError("H0 and H1 must lie in (0, 1)");
  if (!(beta > 0.0 && beta * beta <= 0.25 * H1 * (1.0 + 1e-15))) throw ConfigError("beta^2 must not exceed H1/4");
  if (!(m0 > 0.0 && m0 <= m && m <= 8.0 * kPi - eps0 + 1e-12)) throw ConfigError("need 0 < m0 <= m <= 8 pi - eps0");
}

L0Verdict lemma_L0_check(const Field& w, const LocalizationParams& params, L0Part part, Point center,
                         double radius) {
  const GridSpec& g = w.grid();
  const double L = g.box_length();
  const double inner_r = part == L0Part::iii ? params.beta * radius : params.rho * radius;
  CompensatedSum ball, inner, mom;
  for (int j = 0; j < g.n(); ++j)
    for (int i = 0; i < g.n(); ++i) {
      const double v = w(i, j);
      const double X = wrap(g.coord(i) - center.x, L) / radius, Y = wrap(g.coord(j) - center.y, L) / radius;
      const double r2 = X * X + Y * Y;
      if (r2 <= 1.0) ball.add(v);
      if (r2 * radius * radius <= inner_r * inner_r) inner.add(v);
      mom.add(psi_unit(r2) * v);
    }
  const double area = g.cell_area();
  L0Verdict out{part, ball.value() * area, inner.value() * area, mom.value() * area};
  const double m = params.m;
  const double tol = 1e-12 * std::max(m, out.ball_mass);
  switch (part) {
    case L0Part::i:
      out.hypothesis = out.ball_mass <= m && out.inner_mass <= (1.0 - params.delta) * m;
      out.conclusion = out.psi_moment <= (1.0 - params.H0) * m + tol;
      break;
    case L0Part::ii:
      out.hypothesis = out.ball_mass <= m && out.psi_moment >= (1.0 - params.H1) * m;
      out.conclusion = out.inner_mass >= (1.0 - 0.5 * params.delta) * m - tol;
      break;
    case L0Part::iii:
      out.hypothesis = out.psi_moment <= (1.0 - params.H1) * m;
      out.conclusion = out.inner_mass <= (1.0 - 0.5 * params.H1) * m + tol;
      break;
  }
  out.holds = !out.hypothesis || out.conclusion;
  return out;
}

bool ProbeReport::pass() const {
  if (inconclusive || !l1_pass || !l3_pass || !envelope_pass) return false;
  return std::all_of(cascade.begin(), cascade.end(), [](const CascadeLevel& c) { return c.pass; });
}

bool LocalizationReport::pass() const {
  return std::all_of(probes.begin(), probes.end(), [](const ProbeReport& p) { return p.pass(); });
}

namespace {

double far_sliding_mass(const Field& u, double r) {
  const double L = u.grid().box_length();
  if (r < 0.5 * L) return sliding_ball_mass(u, r).value;
  // a ball of radius >= L/sqrt(2) centred in the box covers it; in between, the total mass bounds from above
  return u.mass();
}

}  // namespace

LocalizationReport monitor_localization(const Trajectory& traj, const LocalizationParams& params,
                                        const std::vector<Probe>& probes, FarField far, std::uint64_t seed) {
  params.validate();
  LocalizationReport report;
  if (traj.snapshots.empty()) return report;
  const GridSpec& g = traj.snapshots.front().grid();
  const double total = traj.initial_mass();
  for (const Probe& probe : probes) {
    const WeightPsi psi = build_psi(g, probe.center, probe.radius);
    ProbeReport pr;
    pr.probe = probe;
    std::vector<double> radii;
    for (int j = 1;; ++j) {
      const double r = std::pow(params.rho1, j) * probe.radius;
      if (r < 3.0 * g.dx() || std::pow(1.0 - params.H1, j) * params.m < params.m0) break;
      radii.push_back(r);
    }
    const double envelope = moment_derivative_envelope(total, probe.radius);
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
      const Field& u = traj.snapshots[k];
      ProbeSample s;
      s.t = traj.times[k];
      s.lambda = local_moment(u, psi);
      s.derivative = moment_derivative_formula(u, psi, 10'000'000, far, seed).total;
      s.inner_mass = ball_mass(u, probe.center, params.rho * probe.radius);
      s.sliding = sliding_ball_mass(u, probe.radius).value;
      s.far_sliding = far_sliding_mass(u, params.R0 * probe.radius);
      s.hypothesis = s.far_sliding <= params.m && s.inner_mass >= (1.0 - params.delta) * params.m;
      for (double r : radii) s.cascade_mass.push_back(ball_mass(u, probe.center, r));
      pr.worst_envelope_ratio = std::max(pr.worst_envelope_ratio, s.derivative / envelope);
      if (s.derivative > envelope * (1.0 + 1e-9)) pr.envelope_pass = false;
      if (pr.first_sliding_violation < 0.0 && s.sliding > params.m) pr.first_sliding_violation = s.t;
      pr.samples.push_back(std::move(s));
    }
    for (std::size_t k = 0; k + 1 < pr.samples.size(); ++k)
      pr.derivative_fd.push_back((pr.samples[k + 1].lambda - pr.samples[k].lambda) /
                                 (pr.samples[k + 1].t - pr.samples[k].t));

    double theta = std::numeric_limits<double>::infinity();
    for (const auto& s : pr.samples)
      if (s.hypothesis) {
        pr.hypothesis_ever = true;
        theta = std::min(theta, -s.derivative);
        if (s.derivative > 0.0) pr.l1_pass = false;
      }
    pr.theta_measured = pr.hypothesis_ever ? theta : 0.0;
    if (!pr.hypothesis_ever) {
      pr.A0 = 0.0;
    } else if (theta > 0.0) {
      pr.A0 = params.m / theta;
      double spacing = 0.0;
      for (std::size_t k = 0; k + 1 < pr.samples.size(); ++k)
        spacing = std::max(spacing, pr.samples[k + 1].t - pr.samples[k].t);
      pr.inconclusive = spacing > pr.A0 / 20.0;
    } else {
      pr.A0 = std::numeric_limits<double>::infinity();
    }
    for (const auto& s : pr.samples)
      if (s.t >= pr.A0 && s.inner_mass > (1.0 - params.H1) * params.m) pr.l3_pass = false;

    double geometric = 0.0;
    for (std::size_t j = 0; j < radii.size(); ++j) {
      geometric += std::pow(params.rho1, static_cast<double>(j));
      CascadeLevel c;
      c.j = static_cast<int>(j) + 1;
      c.radius = radii[j];
      c.bound = std::pow(1.0 - params.H1, c.j) * params.m;
      c.t_from = pr.A0 * geometric;
      for (const auto& s : pr.samples) {
        if (s.t < c.t_from) continue;
        c.checked = true;
        if (s.cascade_mass[j] > c.bound) c.pass = false;
      }
      pr.cascade.push_back(c);
    }
    report.probes.push_back(std::move(pr));
  }
  return report;
}

double MomentSeries::fd_relative_error() const { return ksl::fd_relative_error(formula, fd); }

double fd_relative_error(const std::vector<double>& formula, const std::vector<double>& fd) {
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < fd.size(); ++k) {
    scale = std::max(scale, std::abs(fd[k]));
    worst = std::max(worst, std::abs(fd[k] - 0.5 * (formula[k] + formula[k + 1])));
  }
  return scale > 0.0 ? worst / scale : worst;
}

double MomentSeries::integration_defect() const {
  double integral = 0.0, worst = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    integral += 0.5 * (formula[k] + formula[k + 1]) * (t[k + 1] - t[k]);
    worst = std::max(worst, std::abs(lambda[k + 1] - lambda[0] - integral));
  }
  return worst;
}

MomentSeries moment_series(const Trajectory& traj, const WeightPsi& psi, FarField far, std::uint64_t seed) {
  MomentSeries s{psi, {}, {}, {}, {}};
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    s.t.push_back(traj.times[k]);
    s.lambda.push_back(local_moment(traj.snapshots[k], psi));
    s.formula.push_back(moment_derivative_formula(traj.snapshots[k], psi, 10'000'000, far, seed).total);
  }
  for (std::size_t k = 0; k + 1 < s.t.size(); ++k)
    s.fd.push_back((s.lambda[k + 1] - s.lambda[k]) / (s.t[k + 1] - s.t[k]));
  return s;
}

HyperNormRecord hyper_norm_series(const Trajectory& traj, double p) {
  if (!(p > 1.0)) throw DomainError("hypercontractivity exponent must exceed 1");
  HyperNormRecord rec;
  rec.p = p;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k)
    if (traj.times[k] > 0.0)
      rec.add(traj.times[k], std::pow(traj.times[k], 1.0 - 1.0 / p) * lp_norm(traj.snapshots[k], p));
  return rec;
}

void write_moment_csv(const std::filesystem::path& path, const ProbeReport& report, const LocalizationParams& params) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "t,lambda,dlambda_formula,dlambda_fd,inner_mass,sliding_mass,far_sliding_mass,hypothesis";
  for (const auto& c : report.cascade) out << ",ball_mass_r" << c.radius;
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < report.samples.size(); ++k) {
    const auto& s = report.samples[k];
    out << s.t << ',' << s.lambda << ',' << s.derivative << ',';
    if (k < report.derivative_fd.size()) out << report.derivative_fd[k];
    out << ',' << s.inner_mass << ',' << s.sliding << ',' << s.far_sliding << ',' << (s.hypothesis ? 1 : 0);
    for (double m : s.cascade_mass) out << ',' << m;
    out << '\n';
  }
  out << "# m=" << params.m << " H0=" << params.H0 << " H1=" << params.H1 << " theta=" << report.theta_measured
      << " A0=" << report.A0 << '\n';
}

}  // namespace ksl
