#include "ksl/mild.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "ksl/errors.hpp"
#include "ksl/heat.hpp"
#include "ksl/spectral.hpp"

namespace ksl {

std::string_view to_string(PicardStatus s) {
  switch (s) {
    case PicardStatus::converged: return "converged";
    case PicardStatus::max_iterations: return "max_iterations";
    case PicardStatus::non_contraction: return "non_contraction";
  }
  return "unknown";
}

Field MildTrajectory::value_at(double s) const {
  if (s <= 0.0) return initial;
  if (s <= times.front()) {
    const double w = s / times.front();
    return (1.0 - w) * initial + w * fields.front();
  }
  if (s >= times.back()) return fields.back();
  const auto it = std::upper_bound(times.begin(), times.end(), s);
  const std::size_t j = static_cast<std::size_t>(it - times.begin()) - 1;
  const double w = std::log(s / times[j]) / std::log(times[j + 1] / times[j]);
  return (1.0 - w) * fields[j] + w * fields[j + 1];
}

void MildTrajectory::update_norm() {
  triple_norm = 0.0;
  for (std::size_t j = 0; j < times.size(); ++j)
    triple_norm = std::max(triple_norm, std::pow(times[j], 1.0 - 1.0 / p) * lp_norm(fields[j], p));
}

std::vector<double> geometric_nodes(double T, int count, double ratio) {
  if (!(T > 0.0) || count < 1 || !(ratio > 1.0)) throw DomainError("invalid geometric node request");
  std::vector<double> t(count);
  for (int j = 0; j < count; ++j) t[j] = T * std::pow(ratio, j + 1 - count);
  t.back() = T;
  return t;
}

MildTrajectory free_trajectory(const Field& u0, const std::vector<double>& times, double p) {
  MildTrajectory m{u0, times, {}, p, 0.0};
  for (double t : times) m.fields.push_back(heat_evolve(u0, t));
  m.update_norm();
  return m;
}

double triple_norm_difference(const MildTrajectory& a, const MildTrajectory& b) {
  if (a.times != b.times) throw UsageError("trajectories use different nodes");
  double d = 0.0;
  for (std::size_t j = 0; j < a.times.size(); ++j)
    d = std::max(d, std::pow(a.times[j], 1.0 - 1.0 / a.p) * lp_norm(a.fields[j] - b.fields[j], a.p));
  return d;
}

namespace {

struct GaussRule {
  std::vector<double> x;  // on [0, 1]
  std::vector<double> w;
};

template <unsigned N>
GaussRule make_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  GaussRule r;
  const auto& a = G::abscissa();
  const auto& wt = G::weights();
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == 0.0) {
      r.x.push_back(0.5);
      r.w.push_back(0.5 * wt[k]);
      continue;
    }
    r.x.push_back(0.5 * (1.0 - a[k]));
    r.w.push_back(0.5 * wt[k]);
    r.x.push_back(0.5 * (1.0 + a[k]));
    r.w.push_back(0.5 * wt[k]);
  }
  return r;
}

GaussRule gauss_rule(int points) {
  switch (points) {
    case 4: return make_rule<4>();
    case 6: return make_rule<6>();
    case 8: return make_rule<8>();
    case 12: return make_rule<12>();
    case 16: return make_rule<16>();
    case 24: return make_rule<24>();
    case 32: return make_rule<32>();
    default: throw ConfigError("supported Gauss panel sizes: 4, 6, 8, 12, 16, 24, 32");
  }
}

void check_compatible(const MildTrajectory& u, const MildTrajectory& z) {
  if (!(u.grid() == z.grid())) throw UsageError("mild trajectories live on different grids");
  if (u.times != z.times) throw UsageError("mild trajectories use different time nodes");
}

// grad (-Lap)^{-1} at t = 0 and at every node.
struct DriftTable {
  VectorField at_zero;
  std::vector<VectorField> at_nodes;
};

DriftTable drift_table(const MildTrajectory& z, PoissonBackend backend) {
  DriftTable d{chemo_gradient(z.initial, backend), {}};
  for (const Field& f : z.fields) d.at_nodes.push_back(chemo_gradient(f, backend));
  return d;
}

VectorField drift_at(const MildTrajectory& z, const DriftTable& d, double s) {
  const GridSpec& g = z.grid();
  VectorField out(g);
  auto blend = [&](const VectorField& a, const VectorField& b, double w) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      out.x[k] = (1.0 - w) * a.x[k] + w * b.x[k];
      out.y[k] = (1.0 - w) * a.y[k] + w * b.y[k];
    }
  };
  const auto& t = z.times;
  if (s <= t.front()) {
    blend(d.at_zero, d.at_nodes.front(), std::max(0.0, s / t.front()));
  } else if (s >= t.back()) {
    blend(d.at_nodes.back(), d.at_nodes.back(), 0.0);
  } else {
    const auto j = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), s) - t.begin()) - 1;
    blend(d.at_nodes[j], d.at_nodes[j + 1], std::log(s / t[j]) / std::log(t[j + 1] / t[j]));
  }
  return out;
}

Field duhamel_at(const MildTrajectory& u, const MildTrajectory& z, const DriftTable& drift, std::size_t node,
                 const MildOptions& opt) {
  const GridSpec& g = u.grid();
  const double t = u.times[node];
  // Panels in s: [0, t_1], [t_1, t_2], ..., [t_{node-1}, t]; in sigma = sqrt(t - s).
  std::vector<double> breaks{0.0};
  for (std::size_t j = 0; j <= node; ++j) breaks.push_back(u.times[j]);
  const int panels = static_cast<int>(breaks.size()) - 1;
  int per_panel = opt.points_per_panel;
  while (per_panel * panels < 24) per_panel = per_panel < 8 ? 8 : (per_panel < 12 ? 12 : (per_panel < 16 ? 16 : 24));
  const GaussRule rule = gauss_rule(per_panel);

  const Fft2d& fft = Fft2d::get(g.n());
  const int n = g.n();
  const int h = fft.half();
  Spectrum acc(fft.spectrum_size(), 0.0);
  std::vector<double> fx(g.size()), fy(g.size());
  for (int p = 0; p < panels; ++p) {
    const double sig_hi = std::sqrt(t - breaks[p]);
    const double sig_lo = std::sqrt(std::max(0.0, t - breaks[p + 1]));
    for (std::size_t q = 0; q < rule.x.size(); ++q) {
      const double sigma = sig_lo + (sig_hi - sig_lo) * rule.x[q];
      const double weight = (sig_hi - sig_lo) * rule.w[q] * 2.0 * sigma;  // ds = 2 sigma dsigma
      const double s = t - sigma * sigma;
      const Field us = u.value_at(s);
      const VectorField gz = drift_at(z, drift, s);
      for (std::size_t k = 0; k < g.size(); ++k) {
        fx[k] = us.values()[k] * gz.x[k];
        fy[k] = us.values()[k] * gz.y[k];
      }
      const Spectrum sx = fft.forward(fx);
      const Spectrum sy = fft.forward(fy);
      for (int j = 0; j < n; ++j) {
        const double kyf = g.wavenumber(j);
        const double ky = j == n / 2 ? 0.0 : kyf;
        for (int i = 0; i < h; ++i) {
          const double kxf = g.wavenumber(i);
          const double kx = i == n / 2 ? 0.0 : kxf;
          const std::size_t k = static_cast<std::size_t>(j) * h + i;
          const double decay = weight * std::exp(-(kxf * kxf + kyf * kyf) * sigma * sigma);
          acc[k] -= std::complex<double>(0.0, decay) * (kx * sx[k] + ky * sy[k]);
        }
      }
    }
  }
  return Field(g, fft.inverse(acc));
}

}  // namespace

Field bilinear_B(const MildTrajectory& u, const MildTrajectory& z, std::size_t node, const MildOptions& opt) {
  check_compatible(u, z);
  if (node >= u.times.size()) throw UsageError("node index out of range");
  return duhamel_at(u, z, drift_table(z, opt.backend), node, opt);
}

std::vector<Field> bilinear_B_all(const MildTrajectory& u, const MildTrajectory& z, const MildOptions& opt) {
  check_compatible(u, z);
  const DriftTable drift = drift_table(z, opt.backend);
  std::vector<Field> out;
  for (std::size_t j = 0; j < u.times.size(); ++j) out.push_back(duhamel_at(u, z, drift, j, opt));
  return out;
}

PicardResult picard(const Field& u0, double T, int k_max, const MildOptions& opt) {
  if (u0.min() < 0.0) throw DomainError("Picard iteration expects nonnegative data");
  const auto nodes = geometric_nodes(T, opt.nodes);
  const MildTrajectory linear = free_trajectory(u0, nodes, opt.p);
  PicardResult res{linear, {}, PicardStatus::max_iterations, 0.0};
  double first = 0.0;
  for (int k = 0; k < k_max; ++k) {
    MildTrajectory next = linear;
    const auto b = bilinear_B_all(res.solution, res.solution, opt);
    bool finite = true;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      next.fields[j] += b[j];
      finite = finite && next.fields[j].all_finite();
    }
    next.update_norm();
    const double diff = finite ? triple_norm_difference(next, res.solution) : std::numeric_limits<double>::infinity();
    const double ratio = res.log.empty() ? 0.0 : diff / res.log.back().difference;
    res.log.push_back({k, diff, ratio});
    res.max_ratio = std::max(res.max_ratio, ratio);
    if (!finite) {
      res.status = PicardStatus::non_contraction;
      return res;
    }
    res.solution = std::move(next);
    if (k == 0) first = diff;
    const std::size_t L = res.log.size();
    if (L >= 3 && res.log[L - 1].difference > res.log[L - 2].difference &&
        res.log[L - 2].difference > res.log[L - 3].difference) {
      res.status = PicardStatus::non_contraction;
      return res;
    }
    if (diff <= opt.tolerance * first) {
      res.status = PicardStatus::converged;
      return res;
    }
  }
  return res;
}

ContractionProfile contraction_profile(const GridSpec& grid, double width, const std::vector<double>& masses,
                                       double T, const MildOptions& opt, int probe_iterations) {
  ContractionProfile prof;
  for (double m : masses) {
    double ratio = 0.0;
    if (m > 0.0) {
      MildOptions o = opt;
      o.tolerance = 0.0;
      const PicardResult r = picard(gaussian_bump(grid, {}, m, width), T, probe_iterations + 1, o);
      for (const auto& e : r.log)
        if (e.iteration > 0) ratio = std::max(ratio, std::isfinite(e.ratio) ? e.ratio : 1e300);
    }
    prof.points.push_back({m, ratio});
  }
  std::sort(prof.points.begin(), prof.points.end(), [](auto& a, auto& b) { return a.mass < b.mass; });
  prof.threshold_mass = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < prof.points.size(); ++k) {
    const auto& a = prof.points[k - 1];
    const auto& b = prof.points[k];
    if (a.ratio < 1.0 && b.ratio >= 1.0) {
      prof.threshold_mass = a.mass + (1.0 - a.ratio) / (b.ratio - a.ratio) * (b.mass - a.mass);
      break;
    }
  }
  if (!prof.points.empty() && prof.points.front().ratio >= 1.0) prof.threshold_mass = prof.points.front().mass;
  return prof;
}

void write_convergence_csv(const std::filesystem::path& path, const PicardResult& result) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "iteration,difference_triple_norm,ratio\n" << std::setprecision(17);
  for (const auto& e : result.log) out << e.iteration << ',' << e.difference << ',' << e.ratio << '\n';
}

}  // namespace ksl
