#include "ksl/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "ksl/cross_check.hpp"
#include "ksl/errors.hpp"
#include "ksl/snapshot.hpp"

namespace ksl {

namespace {

constexpr double kPi = std::numbers::pi;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    out.push_back(trim(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start)));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

double parse_number(std::string_view s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("not a number: '" + t + "'");
  return v;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s, ','))
    if (!item.empty()) out.push_back(parse_quantity(item));
  return out;
}

std::vector<Point> parse_points(const std::string& s) {
  std::vector<Point> out;
  for (const auto& item : split(s, ';')) {
    if (item.empty()) continue;
    std::istringstream in(item);
    std::string a, b, extra;
    if (!(in >> a >> b) || (in >> extra)) throw ConfigError("expected 'x y' in '" + item + "'");
    out.push_back({parse_quantity(a), parse_quantity(b)});
  }
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigError("not a boolean: '" + s + "'");
}

int parse_int(const std::string& s) {
  const double v = parse_number(s);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError("not an integer: '" + s + "'");
  return static_cast<int>(v);
}

template <class Enum>
Enum parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, Enum>> options) {
  for (const auto& [name, value] : options)
    if (s == name) return value;
  throw ConfigError("unrecognized value '" + s + "'");
}

std::string to_label(SweepAxis axis, double v) {
  std::ostringstream out;
  switch (axis) {
    case SweepAxis::none: return "base";
    case SweepAxis::delta: out << "delta_"; break;
    case SweepAxis::mass: out << "mass_"; break;
    case SweepAxis::lambda: out << "lambda_"; break;
  }
  out << v;
  return out.str();
}

std::string_view to_string(Expectation e) {
  switch (e) {
    case Expectation::completed: return "completed";
    case Expectation::blowup: return "blowup";
    case Expectation::any: break;
  }
  return "any";
}

}  // namespace

double parse_quantity(std::string_view text) {
  std::string t = trim(text);
  if (const auto slash = t.find('/'); slash != std::string::npos) {
    const double den = parse_quantity(t.substr(slash + 1));
    if (den == 0.0) throw ConfigError("division by zero in '" + t + "'");
    return parse_quantity(t.substr(0, slash)) / den;
  }
  if (t.size() >= 2 && t.compare(t.size() - 2, 2, "pi") == 0) {
    const std::string head = trim(t.substr(0, t.size() - 2));
    return (head.empty() ? 1.0 : parse_number(head)) * kPi;
  }
  return parse_number(t);
}

double InitialSpec::total_mass() const {
  if (kind == InitialKind::gaussian) return mass;
  double m = 0.0;
  for (double a : atoms.masses) m += a;
  return m;
}

Field InitialSpec::build(const GridSpec& grid) const {
  return kind == InitialKind::gaussian ? gaussian_bump(grid, center, mass, width) : mollify_atoms(grid, atoms);
}

Scenario parse_scenario(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }

  Scenario sc;
  std::vector<double> probe_radii;
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, std::map<std::string, Setter>> keys = {
      {"grid",
       {
           {"box_length", [&](const std::string& v) { sc.box_length = parse_quantity(v); }},
           {"n", [&](const std::string& v) { sc.n = parse_int(v); }},
           {"backend", [&](const std::string& v) { sc.backend = parse_backend(v); }},
       }},
      {"initial",
       {
           {"kind", [&](const std::string& v) {
              sc.initial.kind = parse_enum<InitialKind>(v, {{"gaussian", InitialKind::gaussian},
                                                            {"atoms", InitialKind::atoms}});
            }},
           {"mass", [&](const std::string& v) { sc.initial.mass = parse_quantity(v); }},
           {"width", [&](const std::string& v) { sc.initial.width = parse_quantity(v); }},
           {"center", [&](const std::string& v) {
              const auto p = parse_points(v);
              if (p.size() != 1) throw ConfigError("center takes one point");
              sc.initial.center = p.front();
            }},
           {"masses", [&](const std::string& v) { sc.initial.atoms.masses = parse_list(v); }},
           {"centers", [&](const std::string& v) { sc.initial.atoms.centers = parse_points(v); }},
           {"delta", [&](const std::string& v) { sc.initial.atoms.delta = parse_quantity(v); }},
       }},
      {"run",
       {
           {"name", [&](const std::string& v) { sc.name = v; }},
           {"description", [&](const std::string& v) { sc.description = v; }},
           {"mode", [&](const std::string& v) {
              sc.mode = parse_enum<ScenarioMode>(v, {{"evolve", ScenarioMode::evolve},
                                                     {"scaling", ScenarioMode::scaling},
                                                     {"picard", ScenarioMode::picard}});
            }},
           {"t_end", [&](const std::string& v) { sc.t_end = parse_quantity(v); }},
           {"cfl", [&](const std::string& v) { sc.cfl = parse_quantity(v); }},
           {"dt_min", [&](const std::string& v) { sc.dt_min = parse_quantity(v); }},
           {"record_every", [&](const std::string& v) { sc.record_every = parse_quantity(v); }},
           {"blowup_cap", [&](const std::string& v) { sc.blowup_cap = parse_quantity(v); }},
           {"extra_record_times", [&](const std::string& v) { sc.extra_record_times = parse_list(v); }},
           {"scheme", [&](const std::string& v) { sc.scheme = parse_scheme(v); }},
           {"order", [&](const std::string& v) { sc.order = parse_time_order(v); }},
           {"expect", [&](const std::string& v) {
              sc.expect = parse_enum<Expectation>(v, {{"any", Expectation::any},
                                                      {"completed", Expectation::completed},
                                                      {"blowup", Expectation::blowup}});
            }},
           {"snapshots", [&](const std::string& v) {
              sc.all_snapshots = parse_enum<bool>(v, {{"all", true}, {"ends", false}});
            }},
           {"compare_times", [&](const std::string& v) { sc.compare_times = parse_list(v); }},
           {"blowup_mass", [&](const std::string& v) { sc.blowup_mass = parse_quantity(v); }},
           {"picard_iterations", [&](const std::string& v) { sc.picard_iterations = parse_int(v); }},
           {"picard_nodes", [&](const std::string& v) { sc.picard_nodes = parse_int(v); }},
           {"near_blowup_mass", [&](const std::string& v) { sc.near_blowup_mass = parse_quantity(v); }},
           {"near_blowup_time", [&](const std::string& v) { sc.near_blowup_time = parse_quantity(v); }},
       }},
      {"probes",
       {
           {"centers", [&](const std::string& v) {
              sc.probes.clear();
              for (const Point& p : parse_points(v)) sc.probes.push_back({p, 1.0});
            }},
           {"radii", [&](const std::string& v) { probe_radii = parse_list(v); }},
           {"eps0", [&](const std::string& v) { sc.eps0 = parse_quantity(v); }},
           {"m0", [&](const std::string& v) { sc.m0 = parse_quantity(v); }},
           {"m", [&](const std::string& v) { sc.m = parse_quantity(v); }},
           {"rho", [&](const std::string& v) { sc.rho = parse_quantity(v); }},
           {"delta", [&](const std::string& v) { sc.delta = parse_quantity(v); }},
           {"rho1", [&](const std::string& v) { sc.rho1 = parse_quantity(v); }},
           {"pair_sum", [&](const std::string& v) { sc.pair_sum = parse_far_field(v); }},
       }},
      {"sweep",
       {
           {"axis", [&](const std::string& v) {
              sc.axis = parse_enum<SweepAxis>(v, {{"none", SweepAxis::none},
                                                  {"delta", SweepAxis::delta},
                                                  {"mass", SweepAxis::mass},
                                                  {"lambda", SweepAxis::lambda}});
            }},
           {"values", [&](const std::string& v) { sc.values = parse_list(v); }},
       }},
      {"checks",
       {
           {"mass_drift", [&](const std::string& v) { sc.checks.mass_drift = parse_quantity(v); }},
           {"envelope", [&](const std::string& v) { sc.checks.envelope = parse_bool(v); }},
           {"localization", [&](const std::string& v) { sc.checks.localization = parse_bool(v); }},
           {"moment_fd", [&](const std::string& v) { sc.checks.moment_fd = parse_quantity(v); }},
           {"radial", [&](const std::string& v) { sc.checks.radial = parse_bool(v); }},
           {"radial_mass", [&](const std::string& v) { sc.checks.radial_mass = parse_quantity(v); }},
           {"radial_time", [&](const std::string& v) { sc.checks.radial_time = parse_quantity(v); }},
           {"hyper_factor", [&](const std::string& v) { sc.checks.hyper_factor = parse_quantity(v); }},
           {"hyper_p", [&](const std::string& v) { sc.checks.hyper_p = parse_quantity(v); }},
           {"min_peak_spread", [&](const std::string& v) { sc.checks.min_peak_spread = parse_quantity(v); }},
           {"sliding_below", [&](const std::string& v) { sc.checks.sliding_below = parse_quantity(v); }},
           {"sliding_radius", [&](const std::string& v) { sc.checks.sliding_radius = parse_quantity(v); }},
           {"exists_beyond", [&](const std::string& v) { sc.checks.exists_beyond = parse_quantity(v); }},
           {"scaling_l1", [&](const std::string& v) { sc.checks.scaling_l1 = parse_quantity(v); }},
           {"scaling_time", [&](const std::string& v) { sc.checks.scaling_time = parse_quantity(v); }},
           {"picard_ratio", [&](const std::string& v) { sc.checks.picard_ratio = parse_quantity(v); }},
           {"picard_agreement", [&](const std::string& v) { sc.checks.picard_agreement = parse_quantity(v); }},
       }},
  };

  for (const auto& [section, body] : tree) {
    const auto sec = keys.find(section);
    if (sec == keys.end()) {
      if (body.empty()) throw ConfigError("key '" + section + "' outside a section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
      try {
        setter->second(trim(value.data()));
      } catch (const ConfigError& e) {
        throw ConfigError("[" + section + "] " + key + ": " + e.what());
      }
    }
  }

  if (!probe_radii.empty()) {
    if (probe_radii.size() != 1 && probe_radii.size() != sc.probes.size())
      throw ConfigError("[probes] radii must list one radius or one per center");
    for (std::size_t k = 0; k < sc.probes.size(); ++k)
      sc.probes[k].radius = probe_radii.size() == 1 ? probe_radii.front() : probe_radii[k];
  }
  if (sc.name.empty()) sc.name = "scenario";
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

namespace {

struct PointSpec {
  std::string label;
  double value = 0.0;
  InitialSpec initial;
};

std::vector<PointSpec> sweep_points(const Scenario& sc) {
  std::vector<PointSpec> out;
  if (sc.axis == SweepAxis::none || sc.axis == SweepAxis::lambda) {
    out.push_back({"base", 0.0, sc.initial});
    return out;
  }
  for (double v : sc.values) {
    PointSpec p{to_label(sc.axis, v), v, sc.initial};
    if (sc.axis == SweepAxis::delta) {
      p.initial.atoms.delta = v;
    } else if (p.initial.kind == InitialKind::gaussian) {
      p.initial.mass = v;
    } else {
      const double scale = v / sc.initial.total_mass();
      for (double& m : p.initial.atoms.masses) m *= scale;
    }
    out.push_back(std::move(p));
  }
  return out;
}

SimConfig sim_config(const Scenario& sc, const InitialSpec& init) {
  SimConfig c{.initial = init.build(sc.grid())};
  c.t_end = sc.t_end;
  c.cfl = sc.cfl;
  c.dt_min = sc.dt_min;
  c.blowup_cap = sc.blowup_cap;
  c.record_every = sc.record_every;
  c.extra_record_times = sc.extra_record_times;
  c.backend = sc.backend;
  c.scheme = sc.scheme;
  c.order = sc.order;
  return c;
}

LocalizationParams localization_params(const Scenario& sc, double total_mass) {
  return make_localization_params(total_mass, sc.eps0, sc.m0, sc.m, sc.rho, sc.delta, sc.rho1);
}

}  // namespace

void Scenario::validate() const {
  const GridSpec g = grid();
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (initial.kind == InitialKind::gaussian) {
    if (!(initial.mass >= 0.0)) throw ConfigError("mass must be nonnegative");
    if (!(initial.width > 0.0)) throw ConfigError("width must be positive");
  } else {
    if (initial.atoms.masses.empty()) throw ConfigError("atoms need at least one mass");
    if (initial.atoms.masses.size() != initial.atoms.centers.size())
      throw ConfigError("atoms need one center per mass");
    if (!(initial.atoms.delta > 0.0)) throw ConfigError("atoms need delta > 0");
    for (double m : initial.atoms.masses)
      if (!(m >= 0.0)) throw ConfigError("atom masses must be nonnegative");
  }
  if (axis == SweepAxis::delta && initial.kind != InitialKind::atoms)
    throw ConfigError("a delta sweep needs atomic initial data");
  if (axis == SweepAxis::lambda && mode != ScenarioMode::scaling)
    throw ConfigError("a lambda sweep is only meaningful in scaling mode");
  if (axis != SweepAxis::none && values.empty()) throw ConfigError("sweep values missing");
  for (double v : values)
    if (!(v > 0.0)) throw ConfigError("sweep values must be positive");
  if (mode == ScenarioMode::evolve && axis == SweepAxis::mass && initial.total_mass() <= 0.0 &&
      initial.kind == InitialKind::atoms)
    throw ConfigError("a mass sweep over atoms needs positive base mass");
  for (double t : compare_times)
    if (!(t > 0.0 && t <= t_end)) throw ConfigError("compare_times must lie in (0, t_end]");
  if (mode == ScenarioMode::scaling && compare_times.empty()) throw ConfigError("scaling mode needs compare_times");
  if (mode == ScenarioMode::picard) {
    if (picard_iterations < 2) throw ConfigError("picard_iterations must be at least 2");
    if (picard_nodes < 2) throw ConfigError("picard_nodes must be at least 2");
    if (near_blowup_mass > 0.0 && !(near_blowup_time > 0.0))
      throw ConfigError("near_blowup_time must be positive");
  }
  if (checks.hyper_factor > 0.0 && !(checks.hyper_p > 1.0)) throw ConfigError("hyper_p must exceed 1");

  for (const PointSpec& p : sweep_points(*this)) {
    const SimConfig c = sim_config(*this, p.initial);
    c.validate();
  }
  if (!probes.empty()) {
    localization_params(*this, initial.total_mass());
    for (const Probe& p : probes) {
      try {
        build_psi(g, p.center, p.radius);
      } catch (const ResolutionError& e) {
        throw ConfigError(std::string("probe: ") + e.what());
      } catch (const DomainError& e) {
        throw ConfigError(std::string("probe: ") + e.what());
      }
    }
  }
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

bool ScenarioResult::checks_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckVerdict& c) { return c.pass; });
}

const CheckVerdict* ScenarioResult::find(std::string_view check, std::string_view point) const {
  for (const auto& c : checks)
    if (c.name == check && (point.empty() || c.point == point)) return &c;
  return nullptr;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct PointOutput {
  PointSummary summary;
  std::vector<CheckVerdict> checks;
  std::vector<std::filesystem::path> files;
  double hyper_sup = 0.0;
  std::vector<std::pair<double, double>> hyper_samples;
};

void add_check(std::vector<CheckVerdict>& out, std::string name, std::string point, double value, double threshold,
               bool pass) {
  out.push_back({std::move(name), std::move(point), value, threshold, pass});
}

void write_snapshots(const Trajectory& traj, bool all, const std::filesystem::path& dir, const std::string& prefix,
                     std::vector<std::filesystem::path>& files) {
  auto one = [&](std::size_t k, const std::string& tag) {
    const std::filesystem::path rel = prefix + "snapshot_" + tag + ".ksf";
    write_snapshot(dir / rel, traj.snapshots[k], traj.times[k]);
    files.push_back(rel);
  };
  if (traj.snapshots.empty()) return;
  if (all) {
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
      std::ostringstream tag;
      tag << std::setw(4) << std::setfill('0') << k;
      one(k, tag.str());
    }
  } else {
    one(0, "initial");
    if (traj.snapshots.size() > 1) one(traj.snapshots.size() - 1, "final");
  }
}

double outcome_code(Outcome o) {
  switch (o) {
    case Outcome::completed: return 0.0;
    case Outcome::blowup: return 1.0;
    case Outcome::dt_underflow: return 2.0;
  }
  return -1.0;
}

PointOutput run_evolve_point(const Scenario& sc, const PointSpec& p, const std::filesystem::path& out_dir,
                             const std::string& prefix, std::uint64_t seed) {
  PointOutput out;
  PointSummary& s = out.summary;
  s.label = p.label;
  s.sweep_value = p.value;
  s.t_end = sc.t_end;

  const SimConfig config = sim_config(sc, p.initial);
  s.initial_sup = config.initial.max();
  const auto t0 = Clock::now();
  Trajectory traj;
  try {
    traj = run(config);
  } catch (const IntegrationFault& fault) {
    traj = fault.partial;
    s.fault = true;
  }
  s.seconds = seconds_since(t0);
  s.outcome = traj.outcome;
  s.t_outcome = traj.t_outcome;
  s.mass_drift = traj.step_log.empty() ? 0.0 : traj.max_mass_drift();

  write_step_log_csv(out_dir / (prefix + "step_log.csv"), traj);
  out.files.push_back(prefix + "step_log.csv");
  write_snapshots(traj, sc.all_snapshots, out_dir, prefix, out.files);

  const std::string& pt = p.label;
  const ScenarioChecks& ck = sc.checks;
  if (s.fault) add_check(out.checks, "integration", pt, s.t_outcome, sc.t_end, false);

  if (sc.expect != Expectation::any) {
    const Outcome want = sc.expect == Expectation::completed ? Outcome::completed : Outcome::blowup;
    add_check(out.checks, "outcome", pt, outcome_code(s.outcome), outcome_code(want), !s.fault && s.outcome == want);
  }
  if (ck.mass_drift > 0.0 && s.outcome == Outcome::completed && !s.fault)
    add_check(out.checks, "mass_drift", pt, s.mass_drift, ck.mass_drift, s.mass_drift < ck.mass_drift);
  if (ck.sliding_below > 0.0) {
    const double slide = sliding_ball_mass(config.initial, ck.sliding_radius).value;
    add_check(out.checks, "sliding_initial", pt, slide, ck.sliding_below, slide < ck.sliding_below);
  }
  if (ck.exists_beyond > 0.0)
    add_check(out.checks, "exists_beyond", pt, s.t_outcome, ck.exists_beyond,
              !s.fault && s.t_outcome > ck.exists_beyond);

  if (!sc.probes.empty() && (ck.envelope || ck.localization || ck.moment_fd > 0.0)) {
    const LocalizationParams params = localization_params(sc, p.initial.total_mass());
    s.localization = monitor_localization(traj, params, sc.probes, sc.pair_sum, seed);
    for (std::size_t k = 0; k < s.localization.probes.size(); ++k) {
      const std::filesystem::path rel = prefix + "probe_" + std::to_string(k) + ".csv";
      write_moment_csv(out_dir / rel, s.localization.probes[k], params);
      out.files.push_back(rel);
    }
    const auto& probes = s.localization.probes;
    if (ck.envelope) {
      double worst = -std::numeric_limits<double>::infinity();
      bool pass = true;
      for (const auto& pr : probes) {
        worst = std::max(worst, pr.worst_envelope_ratio);
        pass = pass && pr.envelope_pass;
      }
      add_check(out.checks, "envelope", pt, worst, 1.0, pass);
    }
    if (ck.localization) {
      bool l1 = true, l3 = true, conclusive = true;
      for (const auto& pr : probes) {
        l1 = l1 && pr.l1_pass;
        l3 = l3 && pr.l3_pass;
        conclusive = conclusive && !pr.inconclusive;
      }
      add_check(out.checks, "lemma_L1", pt, l1 ? 1.0 : 0.0, 1.0, l1);
      add_check(out.checks, "lemma_L3", pt, l3 ? 1.0 : 0.0, 1.0, l3);
      add_check(out.checks, "record_spacing", pt, conclusive ? 1.0 : 0.0, 1.0, conclusive);
      std::size_t levels = 0;
      for (const auto& pr : probes) levels = std::max(levels, pr.cascade.size());
      for (std::size_t j = 0; j < levels; ++j) {
        bool pass = true;
        double worst = 0.0;
        for (const auto& pr : probes) {
          if (j >= pr.cascade.size()) continue;
          const CascadeLevel& c = pr.cascade[j];
          pass = pass && c.checked && c.pass;
          for (const auto& smp : pr.samples)
            if (smp.t >= c.t_from) worst = std::max(worst, smp.cascade_mass[j] / c.bound);
        }
        add_check(out.checks, "cascade_j" + std::to_string(j + 1), pt, worst, 1.0, pass);
      }
    }
    if (ck.moment_fd > 0.0) {
      double err = 0.0;
      for (const auto& pr : probes) {
        std::vector<double> formula;
        for (const auto& smp : pr.samples) formula.push_back(smp.derivative);
        err = std::max(err, fd_relative_error(formula, pr.derivative_fd));
      }
      add_check(out.checks, "moment_fd", pt, err, ck.moment_fd, err < ck.moment_fd);
    }
  }

  if (ck.radial) {
    if (p.initial.kind != InitialKind::gaussian || p.initial.center.x != 0.0 || p.initial.center.y != 0.0)
      throw ConfigError("the radial comparison needs a centred Gaussian");
    CrossCheckSetup setup;
    setup.mass = p.initial.mass;
    setup.width = p.initial.width;
    setup.t_end = sc.t_end;
    setup.blowup_cap = sc.blowup_cap;
    for (std::size_t k = 1; k < traj.times.size(); ++k) setup.compare_times.push_back(traj.times[k]);
    const CrossCheckReport rep = compare_to_radial(traj, setup);
    std::ofstream csv(out_dir / (prefix + "radial_compare.csv"));
    csv << "t,r,mass_2d,mass_radial,discrepancy\n" << std::setprecision(17);
    for (const auto& row : rep.rows)
      csv << row.t << ',' << row.r << ',' << row.mass_2d << ',' << row.mass_radial << ',' << row.discrepancy << '\n';
    out.files.push_back(prefix + "radial_compare.csv");
    if (rep.both_blow_up()) {
      add_check(out.checks, "radial_time", pt, rep.blowup_discrepancy, ck.radial_time,
                rep.blowup_discrepancy < ck.radial_time);
    } else {
      const bool same = (rep.outcome_2d == Outcome::blowup) == (rep.outcome_radial == RadialOutcome::blowup);
      add_check(out.checks, "radial_outcome", pt, same ? 1.0 : 0.0, 1.0, same);
      if (rep.outcome_2d != Outcome::blowup && rep.outcome_radial != RadialOutcome::blowup)
        add_check(out.checks, "radial_mass", pt, rep.max_discrepancy, ck.radial_mass,
                  rep.max_discrepancy < ck.radial_mass);
    }
  }

  if (ck.hyper_factor > 0.0) {
    const HyperNormRecord rec = hyper_norm_series(traj, ck.hyper_p);
    out.hyper_sup = rec.sup_value;
    out.hyper_samples = rec.samples;
  }
  return out;
}

void write_verdicts(const std::filesystem::path& path, const std::vector<CheckVerdict>& checks) {
  std::ofstream out(path);
  out << "check,point,value,threshold,pass\n" << std::setprecision(17);
  for (const auto& c : checks)
    out << c.name << ',' << c.point << ',' << c.value << ',' << c.threshold << ',' << (c.pass ? 1 : 0) << '\n';
}

void run_evolve(const Scenario& sc, const RunContext& ctx, ScenarioResult& result) {
  const std::vector<PointSpec> points = sweep_points(sc);
  std::vector<PointOutput> outputs(points.size());
  const bool single = points.size() == 1;
  parallel_for(points.size(), ctx.threads, [&](std::size_t k) {
    const std::string prefix = single ? "" : points[k].label + "/";
    if (!single) std::filesystem::create_directories(result.out_dir / points[k].label);
    outputs[k] = run_evolve_point(sc, points[k], result.out_dir, prefix, ctx.seed);
  });

  for (auto& o : outputs) {
    result.points.push_back(o.summary);
    result.checks.insert(result.checks.end(), o.checks.begin(), o.checks.end());
    result.files.insert(result.files.end(), o.files.begin(), o.files.end());
  }

  double t0 = std::numeric_limits<double>::infinity();
  for (const auto& s : result.points) t0 = std::min(t0, s.t_outcome);
  result.metrics["t_min_outcome"] = t0;

  const ScenarioChecks& ck = sc.checks;
  if (ck.hyper_factor > 0.0) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    double sup_lo = lo, sup_hi = 0.0;
    bool all_complete = true;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      lo = std::min(lo, outputs[k].hyper_sup);
      hi = std::max(hi, outputs[k].hyper_sup);
      sup_lo = std::min(sup_lo, outputs[k].summary.initial_sup);
      sup_hi = std::max(sup_hi, outputs[k].summary.initial_sup);
      all_complete = all_complete && outputs[k].summary.outcome == Outcome::completed && !outputs[k].summary.fault;
    }
    const double factor = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    add_check(result.checks, "hyper_factor", "", factor, ck.hyper_factor, factor <= ck.hyper_factor);
    if (ck.min_peak_spread > 0.0)
      add_check(result.checks, "peak_spread", "", sup_hi / sup_lo, ck.min_peak_spread,
                sup_hi / sup_lo >= ck.min_peak_spread);
    add_check(result.checks, "common_horizon", "", t0, sc.t_end, all_complete);
    result.metrics["t0"] = all_complete ? sc.t_end : t0;
    result.metrics["hyper_sup_min"] = lo;
    result.metrics["hyper_sup_max"] = hi;

    std::ofstream csv(result.out_dir / "hyper_norm.csv");
    csv << "point,t,value\n" << std::setprecision(17);
    for (const auto& o : outputs)
      for (const auto& [t, v] : o.hyper_samples) csv << o.summary.label << ',' << t << ',' << v << '\n';
    result.files.push_back("hyper_norm.csv");
  }
}

void run_scaling(const Scenario& sc, const RunContext& ctx, ScenarioResult& result) {
  std::vector<double> lambdas = sc.values;
  if (lambdas.empty()) lambdas.push_back(2.0);
  struct Item {
    double lambda;
    bool blowup;
  };
  std::vector<Item> items;
  for (double l : lambdas) {
    items.push_back({l, false});
    if (sc.blowup_mass > 0.0) items.push_back({l, true});
  }
  std::vector<double> gaps(items.size()), seconds(items.size());
  std::vector<BlowupScaling> pairs(items.size());
  parallel_for(items.size(), ctx.threads, [&](std::size_t k) {
    const auto t0 = Clock::now();
    if (!items[k].blowup) {
      gaps[k] = scaling_equivariance_check(sim_config(sc, sc.initial), items[k].lambda, sc.compare_times,
                                           ScalingGrid::same);
    } else {
      InitialSpec init = sc.initial;
      init.kind = InitialKind::gaussian;
      init.mass = sc.blowup_mass;
      SimConfig c = sim_config(sc, init);
      c.t_end = std::max(sc.t_end, 4.0);
      c.record_every = c.t_end;
      pairs[k] = blowup_time_scaling(c, items[k].lambda, ScalingGrid::zoomed);
    }
    seconds[k] = seconds_since(t0);
  });

  std::ofstream csv(result.out_dir / "scaling.csv");
  csv << "lambda,kind,value,t_base,t_scaled\n" << std::setprecision(17);
  for (std::size_t k = 0; k < items.size(); ++k) {
    const std::string label = to_label(SweepAxis::lambda, items[k].lambda);
    if (!items[k].blowup) {
      add_check(result.checks, "scaling_l1", label, gaps[k], sc.checks.scaling_l1, gaps[k] < sc.checks.scaling_l1);
      csv << items[k].lambda << ",l1_gap," << gaps[k] << ",,\n";
      result.metrics["scaling_l1_" + label] = gaps[k];
    } else {
      const BlowupScaling& b = pairs[k];
      const bool both = b.base.outcome == Outcome::blowup && b.scaled.outcome == Outcome::blowup;
      add_check(result.checks, "scaling_blowup", label, both ? 1.0 : 0.0, 1.0, both);
      add_check(result.checks, "scaling_time", label, b.relative_error, sc.checks.scaling_time,
                both && b.relative_error < sc.checks.scaling_time);
      csv << items[k].lambda << ",blowup_time_error," << b.relative_error << ',' << b.base.t_outcome << ','
          << b.scaled.t_outcome << '\n';
      result.metrics["scaling_time_" + label] = b.relative_error;
      const std::string stem = label + "_";
      write_step_log_csv(result.out_dir / (stem + "base_step_log.csv"), b.base);
      write_step_log_csv(result.out_dir / (stem + "scaled_step_log.csv"), b.scaled);
      result.files.push_back(stem + "base_step_log.csv");
      result.files.push_back(stem + "scaled_step_log.csv");
      PointSummary base{label + "_base", items[k].lambda, b.base.outcome, b.base.t_outcome,
                        b.base.times.empty() ? 0.0 : b.base.times.back(), b.base.max_mass_drift(), seconds[k]};
      result.points.push_back(base);
    }
  }
  result.files.push_back("scaling.csv");
}

void run_picard(const Scenario& sc, const RunContext& ctx, ScenarioResult& result) {
  MildOptions opt;
  opt.nodes = sc.picard_nodes;
  opt.backend = sc.backend;
  std::optional<PicardResult> small_run, near_run;
  Trajectory stepper;
  const bool with_near = sc.near_blowup_mass > 0.0;
  parallel_for(with_near ? 3 : 2, ctx.threads, [&](std::size_t k) {
    if (k == 0) {
      small_run = picard(sc.initial.build(sc.grid()), sc.t_end, sc.picard_iterations, opt);
    } else if (k == 1) {
      SimConfig c = sim_config(sc, sc.initial);
      c.record_every = sc.t_end;
      stepper = run(c);
    } else {
      InitialSpec init = sc.initial;
      init.kind = InitialKind::gaussian;
      init.mass = sc.near_blowup_mass;
      near_run = picard(init.build(sc.grid()), sc.near_blowup_time, sc.picard_iterations, opt);
    }
  });

  const PicardResult& small = *small_run;
  const ScenarioChecks& ck = sc.checks;
  add_check(result.checks, "picard_converged", "", small.status == PicardStatus::converged ? 1.0 : 0.0, 1.0,
            small.status == PicardStatus::converged);
  add_check(result.checks, "picard_ratio", "", small.max_ratio, ck.picard_ratio, small.max_ratio < ck.picard_ratio);
  const double gap = relative_l1(small.solution.fields.back(), stepper.at(sc.t_end));
  add_check(result.checks, "picard_agreement", "", gap, ck.picard_agreement, gap < ck.picard_agreement);
  result.metrics["picard_iterations"] = static_cast<double>(small.log.size());
  result.metrics["picard_max_ratio"] = small.max_ratio;
  result.metrics["picard_agreement"] = gap;
  write_convergence_csv(result.out_dir / "picard_convergence.csv", small);
  result.files.push_back("picard_convergence.csv");
  write_step_log_csv(result.out_dir / "step_log.csv", stepper);
  result.files.push_back("step_log.csv");
  if (with_near) {
    const PicardResult& near = *near_run;
    const bool nc = near.status == PicardStatus::non_contraction;
    add_check(result.checks, "near_blowup_non_contraction", "", near.max_ratio, 1.0, nc);
    result.metrics["near_blowup_max_ratio"] = near.max_ratio;
    write_convergence_csv(result.out_dir / "near_blowup_convergence.csv", near);
    result.files.push_back("near_blowup_convergence.csv");
  }
}

void write_points(const std::filesystem::path& path, const std::vector<PointSummary>& points) {
  std::ofstream out(path);
  out << "point,sweep_value,outcome,t_outcome,mass_drift,initial_sup\n" << std::setprecision(17);
  for (const auto& p : points)
    out << p.label << ',' << p.sweep_value << ',' << (p.fault ? "fault" : to_string(p.outcome)) << ',' << p.t_outcome
        << ',' << p.mass_drift << ',' << p.initial_sup << '\n';
}

void write_manifest(const ScenarioResult& r, const RunContext& ctx, double seconds) {
  nlohmann::json m;
  m["scenario"] = r.name;
  m["description"] = r.scenario.description;
  m["mode"] = r.scenario.mode == ScenarioMode::evolve    ? "evolve"
              : r.scenario.mode == ScenarioMode::scaling ? "scaling"
                                                          : "picard";
  m["expect"] = std::string(to_string(r.scenario.expect));
  m["seed"] = ctx.seed;
  m["threads"] = ctx.threads;
  m["exit_code"] = r.exit_code;
  m["seconds"] = seconds;
  if (!r.error.empty()) m["error"] = r.error;
  m["checks_pass"] = r.checks_pass();
  for (const auto& p : r.points)
    m["points"].push_back({{"label", p.label},
                           {"outcome", p.fault ? "fault" : std::string(to_string(p.outcome))},
                           {"t_outcome", p.t_outcome},
                           {"mass_drift", p.mass_drift},
                           {"seconds", p.seconds}});
  for (const auto& [k, v] : r.metrics) m["metrics"][k] = v;
  for (const auto& c : r.checks)
    m["checks"].push_back(
        {{"check", c.name}, {"point", c.point}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
  for (const auto& f : r.files)
    m["files"].push_back({{"path", f.generic_string()}, {"sha256", sha256_file(r.out_dir / f)}});
  std::ofstream out(r.out_dir / "manifest.json");
  out << m.dump(2) << '\n';
}

}  // namespace

ScenarioResult run_scenario(const Scenario& scenario, const RunContext& ctx) {
  ScenarioResult result;
  result.name = scenario.name;
  result.scenario = scenario;
  result.out_dir = ctx.out_root / scenario.name;
  const auto t0 = Clock::now();
  try {
    try {
      scenario.validate();
    } catch (const ResolutionError& e) {
      throw ConfigError(e.what());
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    std::filesystem::create_directories(result.out_dir);
    switch (scenario.mode) {
      case ScenarioMode::evolve: run_evolve(scenario, ctx, result); break;
      case ScenarioMode::scaling: run_scaling(scenario, ctx, result); break;
      case ScenarioMode::picard: run_picard(scenario, ctx, result); break;
    }
  } catch (const IntegrationFault& e) {
    result.exit_code = 3;
    result.error = e.what();
  } catch (const ConfigError& e) {
    result.exit_code = 2;
    result.error = e.what();
  } catch (const std::exception& e) {
    result.exit_code = 3;
    result.error = e.what();
  }
  if (result.exit_code == 0) {
    const bool fault = std::any_of(result.points.begin(), result.points.end(), [](auto& p) { return p.fault; });
    result.exit_code = fault ? 3 : result.checks_pass() ? 0 : 1;
  }
  if (result.exit_code != 2) {
    write_verdicts(result.out_dir / "verdicts.csv", result.checks);
    write_points(result.out_dir / "points.csv", result.points);
    result.files.push_back("verdicts.csv");
    result.files.push_back("points.csv");
    write_manifest(result, ctx, seconds_since(t0));
  }
  return result;
}

ScenarioResult run_scenario_file(const std::string& config, const RunContext& ctx) {
  try {
    const std::filesystem::path path(config);
    if (!std::filesystem::exists(path)) {
      const auto names = preset_list();
      if (std::any_of(names.begin(), names.end(), [&](const PresetInfo& p) { return p.name == config; }))
        return run_scenario(parse_scenario(preset_config(config)), ctx);
    }
    return run_scenario(load_scenario(path), ctx);
  } catch (const ConfigError& e) {
    ScenarioResult r;
    r.name = config;
    r.exit_code = 2;
    r.error = e.what();
    return r;
  }
}

}  // namespace ksl
