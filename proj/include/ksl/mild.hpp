#pragma once

// Mild formulation u(t) = e^{t Lap} u0 + B(u,u)(t) with
//
//   B(u,z)(t) = - int_0^t grad e^{(t-s) Lap} . ( u(s) grad (-Lap)^{-1} z(s) ) ds,
//
// discretized on geometric time nodes accumulating at 0. The Duhamel integral
// uses s = t - sigma^2, which removes the (t-s)^{-1/2} singularity of the
// kernel, and composite Gauss-Legendre panels between node times.

#include <filesystem>
#include <vector>

#include "ksl/field.hpp"
#include "ksl/poisson.hpp"

namespace ksl {

struct MildTrajectory {
  Field initial;              // value at t = 0
  std::vector<double> times;  // 0 < t_1 < ... < t_J
  std::vector<Field> fields;
  double p = 4.0 / 3.0;
  double triple_norm = 0.0;   // max_j t_j^{1-1/p} ||u(t_j)||_p

  const GridSpec& grid() const { return initial.grid(); }
  /// Linear in log t between nodes; linear in t on (0, t_1).
  Field value_at(double s) const;
  void update_norm();
};

/// Geometric nodes T * ratio^{j - count}, j = 1..count.
std::vector<double> geometric_nodes(double T, int count, double ratio = 2.0);

/// e^{t Lap} u0 at the given nodes.
MildTrajectory free_trajectory(const Field& u0, const std::vector<double>& times, double p);

/// |||a - b||| over the shared nodes.
double triple_norm_difference(const MildTrajectory& a, const MildTrajectory& b);

struct MildOptions {
  int nodes = 12;
  int points_per_panel = 8;  // total points per node never below 24
  double p = 4.0 / 3.0;
  double tolerance = 1e-6;
  PoissonBackend backend = PoissonBackend::periodic_spectral;
};

/// B(u,z) at node index `node`.
Field bilinear_B(const MildTrajectory& u, const MildTrajectory& z, std::size_t node, const MildOptions& opt = {});

/// B(u,z) at every node.
std::vector<Field> bilinear_B_all(const MildTrajectory& u, const MildTrajectory& z, const MildOptions& opt = {});

enum class PicardStatus { converged, max_iterations, non_contraction };
std::string_view to_string(PicardStatus s);

struct PicardLogEntry {
  int iteration;
  double difference;  // |||u^{k+1} - u^k|||
  double ratio;       // difference / previous difference (0 for the first)
};

struct PicardResult {
  MildTrajectory solution;
  std::vector<PicardLogEntry> log;
  PicardStatus status = PicardStatus::max_iterations;
  double max_ratio = 0.0;
};

PicardResult picard(const Field& u0, double T, int k_max, const MildOptions& opt = {});

struct ContractionPoint {
  double mass;
  double ratio;  // worst successive-difference ratio over the first iterations
};

struct ContractionProfile {
  std::vector<ContractionPoint> points;
  double threshold_mass = 0.0;  // interpolated crossing of ratio = 1; +inf if not reached
};

/// Gaussian bumps of the given width and masses; ratios from `probe_iterations` Picard steps.
ContractionProfile contraction_profile(const GridSpec& grid, double width, const std::vector<double>& masses,
                                       double T, const MildOptions& opt = {}, int probe_iterations = 3);

void write_convergence_csv(const std::filesystem::path& path, const PicardResult& result);

}  // namespace ksl
