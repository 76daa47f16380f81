#pragma once

// Grids, scalar/vector fields and initial-data builders.
//
// The periodic box is [-L/2, L/2)^2 sampled at the nodes x_i = -L/2 + i*dx,
// i = 0..n-1, so the origin is node n/2 and the grid is symmetric under
// x -> -x. Each node carries the cell [x_i - dx/2, x_i + dx/2) for
// finite-volume purposes. Storage is row-major: values[j*n + i] is (x_i, y_j).

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ksl {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

class GridSpec {
 public:
  GridSpec() = default;

  double box_length() const { return box_length_; }
  int n() const { return n_; }
  double dx() const { return box_length_ / n_; }
  double cell_area() const { return dx() * dx(); }
  std::size_t size() const { return static_cast<std::size_t>(n_) * n_; }

  double coord(int i) const { return -0.5 * box_length_ + i * dx(); }
  /// Signed angular wavenumber 2*pi*j'/L of FFT index j (j' wrapped into [-n/2, n/2)).
  double wavenumber(int j) const;
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * n_ + i; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  friend GridSpec make_grid(double, int);
  double box_length_ = 1.0;
  int n_ = 16;
};

/// n must be a power of two >= 16 and L > 0; throws ConfigError otherwise.
GridSpec make_grid(double box_length, int n);

class Field {
 public:
  explicit Field(const GridSpec& grid);
  Field(const GridSpec& grid, std::vector<double> values);

  const GridSpec& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }

  /// Compensated-sum integral over the box.
  double mass() const;
  double max() const;
  double min() const;
  bool all_finite() const;

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double a);

 private:
  GridSpec grid_;
  std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double a, Field f);

struct VectorField {
  explicit VectorField(const GridSpec& g) : grid(g), x(g.size(), 0.0), y(g.size(), 0.0) {}
  GridSpec grid;
  std::vector<double> x;
  std::vector<double> y;
};

/// A purely atomic measure realized through e^{delta*Laplacian}.
struct AtomSpec {
  std::vector<Point> centers;
  std::vector<double> masses;
  double delta = 0.0;
};

Field gaussian_bump(const GridSpec& grid, Point center, double mass, double width);
Field mollify_atoms(const GridSpec& grid, const AtomSpec& atoms);

/// (sum |u|^p dx^2)^{1/p}; p = +infinity gives max |u|.
double lp_norm(const Field& f, double p);

/// x -> lambda^2 u(lambda x) on the same grid, bilinear interpolation, zero outside the box.
Field rescale_field(const Field& f, double lambda);
/// Same map sampled on another grid.
Field rescale_field(const Field& f, double lambda, const GridSpec& target);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace ksl
