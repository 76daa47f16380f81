#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "ksl/errors.hpp"
#include "ksl/evolution.hpp"
#include "ksl/heat.hpp"
#include "ksl/mild.hpp"

using namespace ksl;
constexpr double kPi = std::numbers::pi;

namespace {

const GridSpec kGrid = make_grid(16.0, 64);

MildTrajectory heat_of(const Field& u0, double T, int nodes = 8) {
  return free_trajectory(u0, geometric_nodes(T, nodes), 4.0 / 3.0);
}

double max_abs(const Field& f) { return std::max(f.max(), -f.min()); }

}  // namespace

TEST_CASE("geometric time nodes") {
  const auto t = geometric_nodes(0.8, 5);
  REQUIRE(t.size() == 5);
  CHECK(t.back() == 0.8);
  CHECK(t.front() == doctest::Approx(0.05));
  for (std::size_t k = 1; k < t.size(); ++k) CHECK(t[k] / t[k - 1] == doctest::Approx(2.0));
  CHECK_THROWS_AS(geometric_nodes(0.0, 5), DomainError);
  CHECK_THROWS_AS(geometric_nodes(1.0, 5, 1.0), DomainError);
}

TEST_CASE("trajectory interpolation and triple norm") {
  const Field u0 = gaussian_bump(kGrid, {}, 2.0, 1.0);
  const MildTrajectory m = heat_of(u0, 0.4, 4);
  CHECK(relative_l1(m.value_at(0.0), u0) == 0.0);
  CHECK(relative_l1(m.value_at(m.times[1]), m.fields[1]) < 1e-15);
  CHECK(relative_l1(m.value_at(1.0), m.fields.back()) == 0.0);
  double norm = 0.0;
  for (std::size_t k = 0; k < m.times.size(); ++k)
    norm = std::max(norm, std::pow(m.times[k], 0.25) * lp_norm(m.fields[k], 4.0 / 3.0));
  CHECK(m.triple_norm == doctest::Approx(norm).epsilon(1e-14));
}

TEST_CASE("B vanishes on zero and is bilinear") {
  const Field u0 = gaussian_bump(kGrid, {0.5, 0.0}, 3.0, 1.0);
  const Field z0 = gaussian_bump(kGrid, {-0.5, 0.5}, 2.0, 0.8);
  const MildTrajectory u = heat_of(u0, 0.2), z = heat_of(z0, 0.2);
  const std::size_t last = u.times.size() - 1;
  CHECK(max_abs(bilinear_B(u, heat_of(Field(kGrid), 0.2), last)) == 0.0);

  const double a = 1.7, b = -0.6;
  const Field base = bilinear_B(u, z, last);
  const Field scaled = bilinear_B(heat_of(a * u0, 0.2), heat_of(b * z0, 0.2), last);
  CHECK(max_abs(scaled - a * b * base) < 1e-12 * max_abs(a * b * base));

  // the symmetric part at z = u is B(u, u) itself
  const Field sym = 0.5 * (bilinear_B(u, u, last) + bilinear_B(u, u, last));
  CHECK(max_abs(sym - bilinear_B(u, u, last)) == 0.0);

  const MildTrajectory other = heat_of(z0, 0.3);
  CHECK_THROWS_AS(bilinear_B(u, other, last), UsageError);
}

TEST_CASE("B is in divergence form") {
  const Field u0 = gaussian_bump(kGrid, {0.5, 0.0}, 3.0, 1.0) + gaussian_bump(kGrid, {-1.0, 1.0}, 1.0, 0.8);
  const Field z0 = gaussian_bump(kGrid, {-0.5, 0.5}, 2.0, 0.8);
  const MildTrajectory u = heat_of(u0, 0.2), z = heat_of(z0, 0.2);
  const double M = u0.mass() + z0.mass();
  for (const Field& b : bilinear_B_all(u, z)) CHECK(std::abs(b.mass()) < 1e-6 * M * M);
  for (const Field& b : bilinear_B_all(u, u)) CHECK(std::abs(b.mass()) < 1e-6 * M * M);
}

TEST_CASE("zero data is a fixed point after one iteration") {
  const PicardResult r = picard(Field(kGrid), 0.1, 5);
  CHECK(r.status == PicardStatus::converged);
  CHECK(r.log.size() <= 1);
  for (const Field& f : r.solution.fields) CHECK(max_abs(f) == 0.0);
}

TEST_CASE("small data: geometric convergence and agreement with the stepper") {
  MildOptions opt;
  opt.backend = PoissonBackend::free_space;
  const Field u0 = gaussian_bump(kGrid, {}, kPi, 1.0);
  const double T = 0.1;
  const PicardResult r = picard(u0, T, 30, opt);
  REQUIRE(r.status == PicardStatus::converged);
  CHECK(r.max_ratio < 0.5);
  CHECK(std::isfinite(r.solution.triple_norm));

  SimConfig c{.initial = u0};
  c.t_end = T;
  c.record_every = T;
  c.blowup_cap = 1e4;
  c.backend = PoissonBackend::free_space;
  const Trajectory traj = run(c);
  CHECK(relative_l1(r.solution.fields.back(), traj.snapshots.back()) < 1e-2);

  // the mild solution moves mass inwards relative to the heat flow
  CHECK(r.solution.fields.back().max() > heat_evolve(u0, T).max());

  const auto path = std::filesystem::temp_directory_path() / "ksl_picard_test.csv";
  write_convergence_csv(path, r);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,difference_triple_norm,ratio");
  std::filesystem::remove(path);
}

TEST_CASE("refining quadrature and nodes barely moves the fixed point") {
  MildOptions coarse;
  coarse.backend = PoissonBackend::free_space;
  coarse.nodes = 8;
  MildOptions fine = coarse;
  fine.nodes = 16;
  fine.points_per_panel = 16;
  const Field u0 = gaussian_bump(kGrid, {}, kPi, 1.0);
  const PicardResult a = picard(u0, 0.1, 30, coarse), b = picard(u0, 0.1, 30, fine);
  REQUIRE(a.status == PicardStatus::converged);
  REQUIRE(b.status == PicardStatus::converged);
  CHECK(std::abs(a.solution.triple_norm - b.solution.triple_norm) < 1e-3 * b.solution.triple_norm);
  CHECK(relative_l1(a.solution.fields.back(), b.solution.fields.back()) < 1e-3);
}

TEST_CASE("concentrated supercritical data defeat the contraction") {
  MildOptions opt;
  opt.backend = PoissonBackend::free_space;
  opt.nodes = 8;
  const PicardResult r = picard(gaussian_bump(kGrid, {}, 12.0 * kPi, 1.0), 0.6, 12, opt);
  CHECK(r.status == PicardStatus::non_contraction);
}

TEST_CASE("contraction ratio grows with the mass") {
  MildOptions opt;
  opt.backend = PoissonBackend::free_space;
  opt.nodes = 8;
  const std::vector<double> masses{0.01, kPi / 4.0, kPi, 4.0 * kPi, 12.0 * kPi};
  const ContractionProfile prof = contraction_profile(kGrid, 1.0, masses, 0.6, opt);
  REQUIRE(prof.points.size() == masses.size());
  CHECK(prof.points.front().ratio < 0.01);
  // linear in M as M -> 0
  CHECK(prof.points[0].ratio / masses[0] == doctest::Approx(prof.points[1].ratio / masses[1]).epsilon(0.1));
  for (std::size_t k = 1; k < prof.points.size(); ++k) CHECK(prof.points[k].ratio >= prof.points[k - 1].ratio);
  CHECK(prof.threshold_mass > 0.0);
  CHECK(std::isfinite(prof.threshold_mass));
  MESSAGE("contraction threshold mass " << prof.threshold_mass / kPi << " pi");
}
