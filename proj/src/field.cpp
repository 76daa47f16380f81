#include "ksl/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ksl/errors.hpp"

namespace ksl {

double GridSpec::wavenumber(int j) const {
  const int js = j <= n_ / 2 ? j : j - n_;
  return 2.0 * std::numbers::pi * js / box_length_;
}

GridSpec make_grid(double box_length, int n) {
  if (!(box_length > 0.0) || !std::isfinite(box_length))
    throw ConfigError("box length must be positive, got " + std::to_string(box_length));
  if (n < 16 || (n & (n - 1)) != 0)
    throw ConfigError("cells per axis must be a power of two >= 16, got " + std::to_string(n));
  GridSpec g;
  g.box_length_ = box_length;
  g.n_ = n;
  return g;
}

Field::Field(const GridSpec& grid) : grid_(grid), values_(grid.size(), 0.0) {}

Field::Field(const GridSpec& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw UsageError("field storage does not match grid size");
}

double Field::mass() const { return compensated_sum(values_) * grid_.cell_area(); }

double Field::max() const { return *std::max_element(values_.begin(), values_.end()); }

double Field::min() const { return *std::min_element(values_.begin(), values_.end()); }

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Field& Field::operator+=(const Field& other) {
  if (!(grid_ == other.grid_)) throw UsageError("field grids differ");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  if (!(grid_ == other.grid_)) throw UsageError("field grids differ");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
  return *this;
}

Field& Field::operator*=(double a) {
  for (double& v : values_) v *= a;
  return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double a, Field f) { return f *= a; }

double compensated_sum(std::span<const double> values) {
  CompensatedSum s;
  for (double v : values) s.add(v);
  return s.value();
}

namespace {

// Adds mass * N(center, variance) to f; the caller has validated resolution.
void add_gaussian(Field& f, Point c, double mass, double variance) {
  const GridSpec& g = f.grid();
  const double norm = mass / (2.0 * std::numbers::pi * variance);
  const double inv = 1.0 / (2.0 * variance);
  for (int j = 0; j < g.n(); ++j) {
    const double dy = g.coord(j) - c.y;
    for (int i = 0; i < g.n(); ++i) {
      const double dxv = g.coord(i) - c.x;
      f(i, j) += norm * std::exp(-(dxv * dxv + dy * dy) * inv);
    }
  }
}

void check_inside(const GridSpec& g, Point c, double width) {
  const double half = 0.5 * g.box_length();
  const double d = std::min({half - c.x, c.x + half, half - c.y, c.y + half});
  // Tail mass beyond radius d is exp(-d^2 / 2s^2); require it below 1e-8.
  if (d <= 0.0 || std::exp(-d * d / (2.0 * width * width)) >= 1e-8)
    throw ConfigError("bump of width " + std::to_string(width) + " is not contained in the box");
}

}  // namespace

Field gaussian_bump(const GridSpec& grid, Point center, double mass, double width) {
  if (!(width > 2.0 * grid.dx()))
    throw ResolutionError("bump width " + std::to_string(width) + " not above 2*dx = " +
                          std::to_string(2.0 * grid.dx()));
  if (!(mass >= 0.0)) throw DomainError("bump mass must be nonnegative");
  check_inside(grid, center, width);
  Field f(grid);
  add_gaussian(f, center, mass, width * width);
  return f;
}

Field mollify_atoms(const GridSpec& grid, const AtomSpec& atoms) {
  if (atoms.centers.size() != atoms.masses.size()) throw UsageError("atom centers and masses differ in length");
  if (!(atoms.delta > 0.0)) throw DomainError("mollification width must be positive");
  const double width = std::sqrt(2.0 * atoms.delta);
  if (!(width > 2.0 * grid.dx()))
    throw ResolutionError("heat-kernel width sqrt(2 delta) = " + std::to_string(width) + " not above 2*dx");
  Field f(grid);
  for (std::size_t a = 0; a < atoms.masses.size(); ++a) {
    if (!(atoms.masses[a] > 0.0)) throw DomainError("atom masses must be positive");
    check_inside(grid, atoms.centers[a], width);
    add_gaussian(f, atoms.centers[a], atoms.masses[a], width * width);
  }
  return f;
}

double lp_norm(const Field& f, double p) {
  if (!(p >= 1.0)) throw DomainError("L^p norm needs p >= 1");
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
  }
  CompensatedSum s;
  if (p == 1.0) {
    for (double v : f.values()) s.add(std::abs(v));
  } else if (p == 2.0) {
    for (double v : f.values()) s.add(v * v);
  } else {
    for (double v : f.values()) s.add(std::pow(std::abs(v), p));
  }
  return std::pow(s.value() * f.grid().cell_area(), 1.0 / p);
}

Field rescale_field(const Field& f, double lambda) { return rescale_field(f, lambda, f.grid()); }

Field rescale_field(const Field& f, double lambda, const GridSpec& target) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("scale factor must be positive");
  const GridSpec& g = f.grid();
  const int n = g.n();
  const double half = 0.5 * g.box_length();
  const double reach = lambda * 0.5 * target.box_length();
  if (reach < half) {
    // Only the region |x|, |y| <= reach of the source is sampled.
    CompensatedSum outside;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (std::abs(g.coord(i)) > reach || std::abs(g.coord(j)) > reach) outside.add(std::abs(f(i, j)));
    const double total = lp_norm(f, 1.0);
    if (total > 0.0 && outside.value() * g.cell_area() > 1e-6 * total)
      throw ConfigError("rescaled support escapes the box");
  }
  if (lambda == 1.0 && target == g) return f;
  Field out(target);
  const double l2 = lambda * lambda;
  const double inv_dx = 1.0 / g.dx();
  auto sample = [&](int i, int j) { return f((i % n + n) % n, (j % n + n) % n); };
  for (int j = 0; j < target.n(); ++j) {
    const double py = lambda * target.coord(j);
    if (std::abs(py) > half) continue;
    const double fy = (py + half) * inv_dx;
    const int j0 = static_cast<int>(std::floor(fy));
    const double ty = fy - j0;
    for (int i = 0; i < target.n(); ++i) {
      const double px = lambda * target.coord(i);
      if (std::abs(px) > half) continue;
      const double fx = (px + half) * inv_dx;
      const int i0 = static_cast<int>(std::floor(fx));
      const double tx = fx - i0;
      const double v = (1 - tx) * (1 - ty) * sample(i0, j0) + tx * (1 - ty) * sample(i0 + 1, j0) +
                       (1 - tx) * ty * sample(i0, j0 + 1) + tx * ty * sample(i0 + 1, j0 + 1);
      out(i, j) = l2 * v;
    }
  }
  return out;
}

}  // namespace ksl
