#include "ksl/radial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "ksl/errors.hpp"

namespace ksl {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double RadialState::central_density() const {
  double best = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) best = std::max(best, m[i] / (std::numbers::pi * r[i] * r[i]));
  return best;
}

double RadialState::mass_within(double radius) const {
  if (radius <= r.front()) return m.front() * (radius * radius) / (r.front() * r.front());
  if (radius >= r.back()) return m.back();
  const double pos = std::log(radius / r.front()) / h;
  const auto i = std::min(static_cast<std::size_t>(pos), r.size() - 2);
  const double w = pos - static_cast<double>(i);
  return (1.0 - w) * m[i] + w * m[i + 1];
}

RadialState make_radial_nodes(const RadialGrid& grid) {
  if (!(grid.r_min > 0.0) || !(grid.r_max > grid.r_min) || grid.nodes_per_efold < 4)
    throw ConfigError("invalid radial grid");
  const double span = std::log(grid.r_max / grid.r_min);
  const int intervals = static_cast<int>(std::ceil(span * grid.nodes_per_efold));
  RadialState s;
  s.h = span / intervals;
  s.r.resize(intervals + 1);
  s.m.assign(intervals + 1, 0.0);
  for (int i = 0; i <= intervals; ++i) s.r[i] = grid.r_min * std::exp(i * s.h);
  s.r.back() = grid.r_max;
  return s;
}

RadialState radial_gaussian(const RadialGrid& grid, double mass, double width) {
  if (!(mass >= 0.0) || !(width > 0.0)) throw DomainError("radial Gaussian needs mass >= 0 and width > 0");
  RadialState s = radial_from_mass(grid, [&](double r) { return -mass * std::expm1(-r * r / (2.0 * width * width)); });
  s.m.back() = mass;
  return s;
}

std::vector<double> radial_operator(const RadialState& s) {
  const std::size_t n = s.r.size();
  std::vector<double> out(n, 0.0);
  const double h = s.h;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d2 = (s.m[i + 1] - 2.0 * s.m[i] + s.m[i - 1]) / (h * h);
    const double d1 = (s.m[i + 1] - s.m[i - 1]) / (2.0 * h);
    out[i] = (d2 + (s.m[i] / kTwoPi - 2.0) * d1) / (s.r[i] * s.r[i]);
  }
  return out;
}

namespace {

// Solves a tridiagonal system in place (Thomas); a: sub, b: diag, c: super.
bool thomas(std::vector<double>& a, std::vector<double>& b, std::vector<double>& c, std::vector<double>& d) {
  const std::size_t n = b.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (b[i - 1] == 0.0) return false;
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  if (b[n - 1] == 0.0) return false;
  d[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
  return true;
}

std::optional<std::vector<double>> newton_backward_euler(const RadialState& s, double dt) {
  const std::size_t n = s.r.size();
  const double h = s.h;
  const double M = s.m.back();
  std::vector<double> m = s.m;
  std::vector<double> a(n), b(n), c(n), f(n);
  const double tol = 1e-11 * std::max(M, 1e-300);
  for (int iter = 0; iter < 30; ++iter) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double w = 1.0 / (s.r[i] * s.r[i]);
      double d2, d1, dd2_dm, dd2_dl, dd2_dr, dd1_dm, dd1_dl, dd1_dr;
      if (i == 0) {
        // ghost m_{-1} = m_1 - 4 h m_0 from m_s = 2 m
        d2 = (2.0 * m[1] - (2.0 + 4.0 * h) * m[0]) / (h * h);
        d1 = 2.0 * m[0];
        dd2_dm = -(2.0 + 4.0 * h) / (h * h);
        dd2_dl = 0.0;
        dd2_dr = 2.0 / (h * h);
        dd1_dm = 2.0;
        dd1_dl = 0.0;
        dd1_dr = 0.0;
      } else {
        d2 = (m[i + 1] - 2.0 * m[i] + m[i - 1]) / (h * h);
        d1 = (m[i + 1] - m[i - 1]) / (2.0 * h);
        dd2_dm = -2.0 / (h * h);
        dd2_dl = dd2_dr = 1.0 / (h * h);
        dd1_dm = 0.0;
        dd1_dl = -1.0 / (2.0 * h);
        dd1_dr = 1.0 / (2.0 * h);
      }
      const double coef = m[i] / kTwoPi - 2.0;
      f[i] = (m[i] - s.m[i]) / dt - w * (d2 + coef * d1);
      a[i] = -w * (dd2_dl + coef * dd1_dl);
      b[i] = 1.0 / dt - w * (dd2_dm + coef * dd1_dm + d1 / kTwoPi);
      c[i] = -w * (dd2_dr + coef * dd1_dr);
    }
    a[n - 1] = 0.0;
    b[n - 1] = 1.0;
    c[n - 1] = 0.0;
    f[n - 1] = m[n - 1] - M;
    if (!thomas(a, b, c, f)) return std::nullopt;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      m[i] -= f[i];
      if (!std::isfinite(m[i])) return std::nullopt;
      change = std::max(change, std::abs(f[i]));
    }
    if (change <= tol) {
      m.back() = M;
      return m;
    }
  }
  return std::nullopt;
}

}  // namespace

RadialStepResult radial_step(const RadialState& s, double dt, double dt_min) {
  while (dt >= dt_min) {
    if (auto m = newton_backward_euler(s, dt)) {
      RadialState next = s;
      next.m = std::move(*m);
      next.t = s.t + dt;
      return {std::move(next), dt, false};
    }
    dt *= 0.5;
  }
  return {s, 0.0, true};
}

const RadialState& RadialRun::at(double t) const {
  for (const auto& s : snapshots)
    if (std::abs(s.t - t) <= 1e-12 * std::max(1.0, t)) return s;
  throw UsageError("no radial snapshot at t = " + std::to_string(t));
}

namespace {

RadialSample sample_of(const RadialState& s) {
  RadialSample out{s.t, s.central_density(), {}};
  for (double r : kRadialLadder) out.ladder_mass.push_back(s.mass_within(r));
  return out;
}

}  // namespace

RadialRun radial_run(const RadialState& initial, double t_end, const RadialRunOptions& opt) {
  RadialRun run;
  std::vector<double> schedule;
  for (long k = 1; k * opt.record_every <= t_end * (1 + 1e-12); ++k) schedule.push_back(k * opt.record_every);
  for (double t : opt.extra_record_times)
    if (t > 0 && t <= t_end) schedule.push_back(t);
  schedule.push_back(t_end);
  std::sort(schedule.begin(), schedule.end());
  schedule.erase(std::unique(schedule.begin(), schedule.end(),
                             [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, b); }),
                 schedule.end());

  std::vector<double> caps = opt.intermediate_caps;
  std::sort(caps.begin(), caps.end());
  std::size_t next_cap = 0;

  RadialState s = initial;
  s.t = 0.0;
  const double M = s.total_mass();
  run.snapshots.push_back(s);
  run.samples.push_back(sample_of(s));
  double dt = opt.dt_initial;
  std::size_t next = 0;

  while (next < schedule.size()) {
    const double target = schedule[next];
    double trial = std::min(dt, opt.dt_max);
    bool hits = false;
    if (s.t + trial >= target - 1e-12 * std::max(1.0, target)) {
      trial = target - s.t;
      hits = true;
    }
    RadialStepResult res = radial_step(s, trial, opt.dt_min);
    if (res.underflow) {
      run.outcome = RadialOutcome::blowup;
      run.t_end = s.t;
      run.m_core = s.mass_within(kRadialLadder.front());
      run.snapshots.push_back(s);
      return run;
    }
    const double rho_old = s.central_density();
    const double rho_new = res.state.central_density();
    const double change = std::abs(std::log(rho_new / rho_old));
    if (change > 2.0 * opt.target_change && res.dt_taken > opt.dt_min * 2.0) {
      dt = 0.5 * res.dt_taken;
      continue;
    }
    if (res.dt_taken < trial) hits = false;
    RadialState prev = std::move(s);
    s = std::move(res.state);
    if (hits) s.t = target;
    run.max_mass_drift = std::max(run.max_mass_drift, std::abs(s.total_mass() - M) / std::max(M, 1e-300));
    run.samples.push_back(sample_of(s));

    auto crossing_time = [&](double cap) {
      const double w = std::log(cap / rho_old) / std::log(rho_new / rho_old);
      return prev.t + std::clamp(w, 0.0, 1.0) * (s.t - prev.t);
    };
    while (next_cap < caps.size() && rho_new > caps[next_cap] && caps[next_cap] < opt.cap) {
      run.crossings.push_back({caps[next_cap], crossing_time(caps[next_cap]), run.samples.back().ladder_mass});
      ++next_cap;
    }
    if (rho_new > opt.cap) {
      run.outcome = RadialOutcome::blowup;
      run.t_end = crossing_time(opt.cap);
      run.m_core = s.mass_within(kRadialLadder.front());
      run.crossings.push_back({opt.cap, run.t_end, run.samples.back().ladder_mass});
      run.snapshots.push_back(s);
      return run;
    }
    const double grow = change > 0.0 ? opt.target_change / change : 1.5;
    dt = res.dt_taken * std::clamp(grow, 0.5, 1.5);
    if (hits) {
      run.snapshots.push_back(s);
      ++next;
    }
  }
  run.outcome = RadialOutcome::completed;
  run.t_end = s.t;
  return run;
}

void write_radial_csv(const std::filesystem::path& path, const RadialRun& run) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "t,central_density";
  for (double r : kRadialLadder) out << ",m_r" << r;
  out << '\n' << std::setprecision(17);
  for (const auto& s : run.samples) {
    out << s.t << ',' << s.central_density;
    for (double m : s.ladder_mass) out << ',' << m;
    out << '\n';
  }
}

}  // namespace ksl
