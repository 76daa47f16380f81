#include "ksl/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "ksl/heat.hpp"
#include "ksl/moment.hpp"
#include "ksl/poisson.hpp"
#include "ksl/radial.hpp"
#include "ksl/scenario.hpp"

namespace ksl {

namespace {

constexpr double kPi = std::numbers::pi;
using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Preset results shared between criteria, run on demand.
class PresetCache {
 public:
  explicit PresetCache(const AcceptanceOptions& opt) : opt_(opt) {}

  void ensure(const std::vector<std::string>& names) {
    std::vector<std::string> missing;
    for (const auto& n : names)
      if (!results_.count(n)) missing.push_back(n);
    if (missing.empty()) return;
    std::vector<ScenarioResult> out(missing.size());
    // Presets run concurrently, one worker each; sweep points inside a preset run serially.
    parallel_for(missing.size(), opt_.threads, [&](std::size_t k) {
      RunContext ctx{opt_.out_root / "presets", 1, opt_.seed};
      out[k] = run_scenario(parse_scenario(preset_config(missing[k])), ctx);
    });
    for (std::size_t k = 0; k < missing.size(); ++k) results_.emplace(missing[k], std::move(out[k]));
  }

  const ScenarioResult& get(const std::string& name) {
    ensure({name});
    return results_.at(name);
  }

  std::vector<std::string> all_names() const {
    std::vector<std::string> names;
    for (const auto& p : preset_list()) names.push_back(p.name);
    return names;
  }

 private:
  const AcceptanceOptions& opt_;
  std::map<std::string, ScenarioResult> results_;
};

bool verdict_pass(const ScenarioResult& r, const std::string& check, double* value = nullptr) {
  const CheckVerdict* v = r.find(check);
  if (value) *value = v ? v->value : std::nan("");
  return v && v->pass;
}

bool is_evolve(const ScenarioResult& r) { return r.scenario.mode == ScenarioMode::evolve; }

CriterionResult c1_mass(PresetCache& presets) {
  CriterionResult c{1, "mass conservation"};
  presets.ensure(presets.all_names());
  int completed = 0, qualifying = 0;
  double worst = 0.0, slowest = 0.0;
  bool pass = true;
  for (const auto& name : presets.all_names()) {
    const ScenarioResult& r = presets.get(name);
    if (!is_evolve(r)) continue;
    for (const auto& p : r.points) {
      if (p.fault || p.outcome != Outcome::completed) continue;
      ++completed;
      worst = std::max(worst, p.mass_drift);
      if (p.mass_drift >= 1e-6) pass = false;
      if (r.scenario.n == 256 && r.scenario.box_length == 32.0 && r.scenario.t_end == 2.0) {
        ++qualifying;
        slowest = std::max(slowest, p.seconds);
        if (p.seconds >= 120.0) pass = false;
      }
    }
  }
  c.pass = pass && qualifying > 0;
  c.detail = fmt("%d completed runs, worst |M(t)-M(0)|/M(0) = %.2e (< 1e-6); %d runs at n=256 L=32 t=2, slowest %.1f s",
                 completed, worst, qualifying, slowest);
  return c;
}

double relative_l2(const Field& a, const Field& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) {
    num += std::pow(a.values()[k] - b.values()[k], 2);
    den += std::pow(b.values()[k], 2);
  }
  return std::sqrt(num / den);
}

CriterionResult c2_heat() {
  CriterionResult c{2, "heat semigroup exactness"};
  const GridSpec g = make_grid(32.0, 256);
  double variance_err = 0.0;
  const Field base = gaussian_bump(g, {0.5, -0.25}, 3.0, 1.0);
  for (double t : {0.1, 0.5, 1.0, 2.0}) {
    const Field exact = gaussian_bump(g, {0.5, -0.25}, 3.0, std::sqrt(1.0 + 2.0 * t));
    variance_err = std::max(variance_err, relative_l2(heat_evolve(base, t), exact));
  }
  Field f = gaussian_bump(g, {-2.0, 1.0}, 2.0, 0.7) + gaussian_bump(g, {3.0, 0.5}, 1.0, 1.5);
  f += gaussian_bump(g, {0.0, -4.0}, 0.5, 0.4);
  double compose_err = 0.0;
  for (auto [a, b] : {std::pair{0.05, 0.3}, {0.4, 0.4}, {1.0, 0.25}})
    compose_err = std::max(compose_err, relative_l2(heat_evolve(heat_evolve(f, a), b), heat_evolve(f, a + b)));

  // Near-atomic data: a Gaussian of width 0.3 at the origin; the ratio tends to 1/(4 pi) from below.
  const Field atom = gaussian_bump(g, {}, 1.0, 0.3);
  const std::vector<double> times = {1.0, 2.0, 5.0, 10.0, 20.0};
  const LqLpReport rep = verify_lq_lp(atom, 1.0, std::numeric_limits<double>::infinity(), times);
  const double sharp = 1.0 / (4.0 * kPi);
  const double ratio_err = std::abs(rep.max_ratio - sharp) / sharp;
  c.pass = variance_err < 1e-8 && compose_err < 1e-8 && ratio_err < 5e-3;
  c.detail = fmt("variance addition %.1e, composition %.1e (< 1e-8 rel L2); L1->Linf ratio %.6f vs 1/(4pi) = %.6f "
                 "(%.2f%%, < 0.5%%)",
                 variance_err, compose_err, rep.max_ratio, sharp, 100.0 * ratio_err);
  return c;
}

CriterionResult c3_poisson() {
  CriterionResult c{3, "Poisson radial law"};
  const double M = 4.0 * kPi;
  const GridSpec g = make_grid(32.0, 256);
  const Field u = gaussian_bump(g, {}, M, 1.0);
  const double lo = 4.0 * g.dx(), hi = g.box_length() / 4.0;
  const double mean = M / (g.box_length() * g.box_length());
  double worst_free = 0.0, worst_periodic = 0.0;
  const VectorField free = solve_freespace(u).grad_v;
  const VectorField periodic = solve_periodic(u).grad_v;
  for (int k = 0; k <= 24; ++k) {
    const double r = lo * std::pow(hi / lo, k / 24.0);
    const double m = M * (1.0 - std::exp(-0.5 * r * r));
    const double law_free = m / (2.0 * kPi * r);
    const double law_periodic = (m - mean * kPi * r * r) / (2.0 * kPi * r);
    worst_free = std::max(worst_free, std::abs(mean_radial_gradient(free, {}, r) + law_free) / law_free);
    worst_periodic =
        std::max(worst_periodic, std::abs(mean_radial_gradient(periodic, {}, r) + law_periodic) / law_periodic);
  }
  // Cross-validation needs a box wide enough that the removed mean is negligible near the centre.
  const Field wide = gaussian_bump(make_grid(64.0, 256), {}, M, 1.0);
  const CrossValidation cv = cross_validate(wide);
  c.pass = worst_free < 0.02 && worst_periodic < 0.02 && cv.discrepancy < 0.03;
  c.detail = fmt("|dv/dr + m/(2 pi r)| rel. on [4dx, L/4]: free-space %.2e, periodic %.2e (< 2%%); "
                 "backend cross-validation %.2f%% at L=64 (< 3%%)",
                 worst_free, worst_periodic, 100.0 * cv.discrepancy);
  return c;
}

CriterionResult c4_moment(PresetCache& presets) {
  CriterionResult c{4, "Lambda' formula"};
  presets.ensure(presets.all_names());
  double fd = 0.0;
  const bool fd_pass = verdict_pass(presets.get("moment-fd-4pi"), "moment_fd", &fd);
  int probes = 0;
  double worst = -std::numeric_limits<double>::infinity();
  bool env = true;
  for (const auto& name : presets.all_names()) {
    const ScenarioResult& r = presets.get(name);
    for (const auto& v : r.checks)
      if (v.name == "envelope") {
        env = env && v.pass;
        worst = std::max(worst, v.value);
      }
    for (const auto& p : r.points) probes += static_cast<int>(p.localization.probes.size());
  }
  c.pass = fd_pass && env && probes > 0;
  c.detail = fmt("formula vs finite difference %.2e at dx=1/16 (< 1e-2); envelope 8M/R^2 + M^2/(pi R^2): worst ratio %.3f over "
                 "%d probe runs",
                 fd, worst, probes);
  return c;
}

CriterionResult c5_lemma_l0(std::uint64_t seed) {
  CriterionResult c{5, "Lemma L0 arithmetic"};
  bool exact = true;
  for (double rho : {0.5, 0.25, 0.75, 0.1})
    for (double delta : {0.5, 0.25, 0.125, 0.3}) exact = exact && h0_identity_holds(rho, delta);
  const LocalizationParams params = make_localization_params(7.0 * kPi, kPi, 0.5, 7.0 * kPi, 0.5, 0.5);
  exact = exact && params.h0_identity_exact;
  const double a = (1.0 - 0.25) * (1.0 - 0.25);
  exact = exact && params.H0 == 0.5 * (1.0 - a);

  const GridSpec g = make_grid(4.0, 128);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int counterexamples = 0;
  int hypotheses[3] = {0, 0, 0};
  for (int trial = 0; trial < 100; ++trial) {
    Field w(g);
    const int bumps = 1 + static_cast<int>(4 * U(rng));
    const bool central = trial % 3 == 0;
    for (int b = 0; b < bumps; ++b) {
      const double rad = central && b == 0 ? 0.05 * U(rng) : 1.3 * std::sqrt(U(rng));
      const double ang = 2.0 * kPi * U(rng);
      const double cx = rad * std::cos(ang), cy = rad * std::sin(ang);
      const double s = central && b == 0 ? 0.02 + 0.08 * U(rng) : 0.05 + 0.4 * U(rng);
      const double weight = central && b == 0 ? 20.0 : U(rng);
      for (int j = 0; j < g.n(); ++j)
        for (int i = 0; i < g.n(); ++i) {
          const double dx = g.coord(i) - cx, dy = g.coord(j) - cy;
          w(i, j) += weight / (s * s) * std::exp(-0.5 * (dx * dx + dy * dy) / (s * s));
        }
    }
    if (trial % 4 == 1)
      for (double& v : w.values()) v += 0.5 * U(rng);
    // Scale so the unit-ball mass is a random fraction of m.
    const double ball = lemma_L0_check(w, params, L0Part::i).ball_mass;
    w *= params.m * (0.5 + 0.55 * U(rng)) / ball;
    int k = 0;
    for (L0Part part : {L0Part::i, L0Part::ii, L0Part::iii}) {
      const L0Verdict v = lemma_L0_check(w, params, part);
      if (v.hypothesis) ++hypotheses[k];
      if (!v.holds) ++counterexamples;
      ++k;
    }
  }
  const bool exercised = hypotheses[0] > 0 && hypotheses[1] > 0 && hypotheses[2] > 0;
  c.pass = exact && counterexamples == 0 && exercised;
  c.detail = fmt("H0 = delta(1-(1-rho^2)^2) exact in rational arithmetic: %s; 100 random fields, %d counterexamples; "
                 "hypotheses met (i) %d, (ii) %d, (iii) %d times",
                 exact ? "yes" : "no", counterexamples, hypotheses[0], hypotheses[1], hypotheses[2]);
  return c;
}

CriterionResult c6_dichotomy(PresetCache& presets) {
  CriterionResult c{6, "8pi dichotomy"};
  const auto t0 = Clock::now();
  RadialRunOptions opt;
  opt.cap = 1e6;
  opt.record_every = 1.0;
  const RadialRun r4 = radial_run(radial_gaussian(RadialGrid{}, 4.0 * kPi, 1.0), 10.0, opt);
  const RadialRun r8 = radial_run(radial_gaussian(RadialGrid{}, 8.0 * kPi, 1.0), 10.0, opt);
  double radial_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  presets.ensure({"subcritical-4pi", "supercritical-12pi"});
  const ScenarioResult& sub = presets.get("subcritical-4pi");
  const ScenarioResult& sup = presets.get("supercritical-12pi");
  const PointSummary& p4 = sub.points.front();
  const PointSummary& p12 = sup.points.front();
  double dt_rel = 0.0;
  const bool agree = verdict_pass(sup, "radial_time", &dt_rel);
  const bool ok4 = r4.outcome == RadialOutcome::completed && r4.t_end == 10.0;
  const bool ok8 = r8.outcome == RadialOutcome::completed && r8.t_end == 10.0;
  const bool ok2d = !p4.fault && p4.outcome == Outcome::completed && p4.t_outcome == 2.0;
  const bool blow = !p12.fault && p12.outcome == Outcome::blowup;
  const double seconds = radial_seconds + p4.seconds + p12.seconds;
  c.pass = ok4 && ok8 && ok2d && blow && agree && seconds < 600.0;
  c.detail = fmt("radial 4pi to t=10: %s, 8pi to t=10: %s (central density %.1f); 2D 4pi to t=2: %s; 12pi blow-up "
                 "2D t=%.4f, |dt_b|/t_b = %.1f%% (< 10%%); %.0f s",
                 ok4 ? "completed" : "FAILED", ok8 ? "completed" : "FAILED", r8.samples.back().central_density,
                 ok2d ? "completed" : "FAILED", p12.t_outcome, 100.0 * dt_rel, seconds);
  return c;
}

CriterionResult c7_concentration() {
  CriterionResult c{7, "8pi concentration trend"};
  RadialRunOptions opt;
  opt.cap = 1e11;
  opt.intermediate_caps = {1e8, 1e9, 1e10};
  const RadialRun run = radial_run(radial_gaussian(RadialGrid{}, 12.0 * kPi, 1.0), 2.0, opt);
  bool pass = run.outcome == RadialOutcome::blowup && run.crossings.size() == 4;
  std::ostringstream ladder;
  for (const auto& x : run.crossings) {
    const double frac = x.ladder_mass.front() / (8.0 * kPi);
    pass = pass && frac >= 0.8 && frac <= 1.1;
    ladder << fmt(" cap %.0e: %.4f", x.cap, frac);
  }
  c.pass = pass;
  c.detail = "m(r=1e-3)/8pi at detection," + ladder.str() + " (all in [0.8, 1.1])";
  return c;
}

CriterionResult c8_scaling(PresetCache& presets) {
  CriterionResult c{8, "scaling equivariance"};
  const ScenarioResult& r = presets.get("scaling-pair");
  double l1 = 0.0, dt = 0.0;
  const bool a = verdict_pass(r, "scaling_l1", &l1);
  const bool b = verdict_pass(r, "scaling_time", &dt);
  c.pass = a && b && r.exit_code == 0;
  c.detail = fmt("lambda=2: relative L1 gap %.2e at matched times (< 1e-2); blow-up time lambda^2 t_scaled vs t "
                 "off by %.2e (< 5%%)",
                 l1, dt);
  return c;
}

CriterionResult c9_hyper(PresetCache& presets) {
  CriterionResult c{9, "hypercontractivity uniformity"};
  const ScenarioResult& r = presets.get("mollify-sweep-7pi");
  double factor = 0.0, spread = 0.0, horizon = 0.0;
  const bool a = verdict_pass(r, "hyper_factor", &factor);
  const bool b = verdict_pass(r, "peak_spread", &spread);
  const bool h = verdict_pass(r, "common_horizon", &horizon);
  c.pass = a && b && h;
  c.detail = fmt("delta in {0.4,0.2,0.1,0.05}: initial sup spread %.1fx (>= 8); sup t^(1/4)||u||_(4/3) spread %.3f "
                 "(<= 2); all reach t0 = %.2f without blow-up",
                 spread, factor, horizon);
  return c;
}

CriterionResult c10_picard(PresetCache& presets) {
  CriterionResult c{10, "mild vs stepper"};
  const ScenarioResult& r = presets.get("picard-vs-stepper");
  double conv = 0.0, ratio = 0.0, gap = 0.0, near = 0.0;
  const bool a = verdict_pass(r, "picard_converged", &conv);
  const bool b = verdict_pass(r, "picard_ratio", &ratio);
  const bool g = verdict_pass(r, "picard_agreement", &gap);
  const bool n = verdict_pass(r, "near_blowup_non_contraction", &near);
  c.pass = a && b && g && n;
  const auto it = r.metrics.find("picard_iterations");
  c.detail = fmt("M=pi, T=0.1: %s in %.0f iterations, worst ratio %.3f (< 0.5), stepper gap %.2e rel L1 (< 1e-2); "
                 "M=12pi, T=0.6: %s (ratio %.2f)",
                 a ? "converged" : "not converged", it == r.metrics.end() ? 0.0 : it->second, ratio, gap,
                 n ? "non-contraction reported" : "no non-contraction", near);
  return c;
}

CriterionResult c11_two_atoms(PresetCache& presets) {
  CriterionResult c{11, "two-atoms preset"};
  presets.ensure({"two-atoms-6pi", "mollify-sweep-7pi", "subcritical-4pi", "moment-fd-4pi"});
  const ScenarioResult& two = presets.get("two-atoms-6pi");
  const ScenarioResult& sweep = presets.get("mollify-sweep-7pi");
  double sliding = 0.0;
  const bool small = verdict_pass(two, "sliding_initial", &sliding);
  const auto t0_it = sweep.metrics.find("t0");
  const double t0 = t0_it == sweep.metrics.end() ? std::numeric_limits<double>::infinity() : t0_it->second;
  const PointSummary& p = two.points.front();
  const bool beyond = !p.fault && p.t_outcome > t0;

  bool cascade = true;
  int levels = 0;
  for (const ScenarioResult* r : {&presets.get("subcritical-4pi"), &presets.get("moment-fd-4pi")})
    for (const char* j : {"cascade_j1", "cascade_j2"}) {
      bool seen = false;
      for (const auto& v : r->checks)
        if (v.name == j) {
          seen = true;
          ++levels;
          cascade = cascade && v.pass;
        }
      cascade = cascade && seen;
    }
  c.pass = small && beyond && cascade;
  c.detail = fmt("sliding unit-ball mass at t=0 %.3f = %.3f x 8pi (< 1); run reaches t=%.3f (%s) beyond t0 = %.2f; "
                 "cascade j=1,2 verified at %d probe runs",
                 sliding, sliding / (8.0 * kPi), p.t_outcome, std::string(to_string(p.outcome)).c_str(), t0, levels);
  return c;
}

}  // namespace

std::string format_line(const CriterionResult& r) {
  return fmt("[%s] %2d %s: %s (%.1f s)", r.pass ? "PASS" : "FAIL", r.id, r.title.c_str(), r.detail.c_str(),
             r.seconds);
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt,
                                            const std::function<void(const CriterionResult&)>& report) {
  PresetCache presets(opt);
  const std::vector<std::function<CriterionResult()>> criteria = {
      [&] { return c1_mass(presets); },
      [&] { return c2_heat(); },
      [&] { return c3_poisson(); },
      [&] { return c4_moment(presets); },
      [&] { return c5_lemma_l0(opt.seed); },
      [&] { return c6_dichotomy(presets); },
      [&] { return c7_concentration(); },
      [&] { return c8_scaling(presets); },
      [&] { return c9_hyper(presets); },
      [&] { return c10_picard(presets); },
      [&] { return c11_two_atoms(presets); },
  };
  std::vector<CriterionResult> out;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), id) == opt.only.end()) continue;
    const auto t0 = Clock::now();
    CriterionResult r;
    try {
      r = criteria[k]();
    } catch (const std::exception& e) {
      r.id = id;
      r.title = "criterion " + std::to_string(id);
      r.pass = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (report) report(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ksl
