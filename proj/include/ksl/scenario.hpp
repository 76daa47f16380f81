#pragma once

// Batch scenarios: plain-text configs with [grid], [initial], [run], [probes],
// [sweep] and [checks] sections, built-in presets, execution over a worker
// pool, and per-scenario output directories with a checksummed manifest.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "ksl/evolution.hpp"
#include "ksl/mild.hpp"
#include "ksl/moment.hpp"

namespace ksl {

enum class InitialKind { gaussian, atoms };
enum class ScenarioMode { evolve, scaling, picard };
enum class Expectation { any, completed, blowup };
enum class SweepAxis { none, delta, mass, lambda };

struct InitialSpec {
  InitialKind kind = InitialKind::gaussian;
  double mass = 4.0 * std::numbers::pi;  // gaussian
  double width = 1.0;
  Point center;
  AtomSpec atoms;  // atoms

  double total_mass() const;
  Field build(const GridSpec& grid) const;
};

struct ScenarioChecks {
  double mass_drift = 1e-6;        // completed runs; 0 disables
  bool envelope = true;            // Lambda' below 8M/R^2 + M^2/(pi R^2) at every probe
  bool localization = false;       // Lemmas L1, L3 and the cascade at every probe
  double moment_fd = 0.0;          // Lambda' formula against finite differences of Lambda; 0 disables
  bool radial = false;             // centred Gaussian data against the radial oracle
  double radial_mass = 0.03;
  double radial_time = 0.1;
  double hyper_factor = 0.0;       // delta sweep: spread of sup t^{1-1/p}||u||_p; 0 disables
  double hyper_p = 4.0 / 3.0;
  double min_peak_spread = 0.0;    // delta sweep: required spread of initial sup-norms
  double sliding_below = 0.0;      // sliding-ball mass of the initial data; 0 disables
  double sliding_radius = 1.0;
  double exists_beyond = 0.0;      // the run must reach past this time; 0 disables
  double scaling_l1 = 0.01;
  double scaling_time = 0.05;
  double picard_ratio = 0.5;
  double picard_agreement = 0.01;
};

struct Scenario {
  std::string name;
  std::string description;

  double box_length = 16.0;
  int n = 256;
  PoissonBackend backend = PoissonBackend::free_space;

  InitialSpec initial;

  ScenarioMode mode = ScenarioMode::evolve;
  double t_end = 1.0;
  double cfl = 0.4;
  double dt_min = 1e-9;
  double record_every = 0.1;
  double blowup_cap = 1e4;
  std::vector<double> extra_record_times;
  AdvectionScheme scheme = AdvectionScheme::central;
  TimeOrder order = TimeOrder::heun;
  Expectation expect = Expectation::any;
  bool all_snapshots = false;  // otherwise only the first and last

  // scaling mode
  std::vector<double> compare_times;
  double blowup_mass = 0.0;  // 0 skips the blow-up time pair
  // picard mode
  int picard_iterations = 30;
  int picard_nodes = 12;
  double near_blowup_mass = 0.0;  // 0 skips the non-contraction run
  double near_blowup_time = 0.0;

  std::vector<Probe> probes;
  double eps0 = std::numbers::pi;
  double m0 = 0.5;
  double m = 7.0 * std::numbers::pi;
  double rho = 0.5;
  double delta = 0.5;
  double rho1 = 0.5;
  FarField pair_sum = FarField::exact;

  SweepAxis axis = SweepAxis::none;
  std::vector<double> values;

  ScenarioChecks checks;

  GridSpec grid() const { return make_grid(box_length, n); }
  void validate() const;  // throws ConfigError
};

/// Parses the key = value config text; throws ConfigError on unknown keys or bad values.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Numbers may carry a trailing "pi" factor: "12pi", "0.5 pi", "pi".
double parse_quantity(std::string_view text);

struct PresetInfo {
  std::string name;
  std::string description;
};

std::vector<PresetInfo> preset_list();
/// Config text of a preset; throws ConfigError for unknown names.
std::string preset_config(std::string_view name);

struct RunContext {
  std::filesystem::path out_root = "out";
  int threads = 1;
  std::uint64_t seed = 1;
};

struct CheckVerdict {
  std::string name;
  std::string point;  // sweep point label, empty for scenario-wide checks
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct PointSummary {
  std::string label;
  double sweep_value = 0.0;
  Outcome outcome = Outcome::completed;
  double t_outcome = 0.0;
  double t_end = 0.0;
  double mass_drift = 0.0;
  double seconds = 0.0;
  double initial_sup = 0.0;
  bool fault = false;
  LocalizationReport localization;
};

struct ScenarioResult {
  std::string name;
  int exit_code = 0;  // 0 pass, 1 check failure, 2 config error, 3 integration fault
  std::string error;
  std::filesystem::path out_dir;
  Scenario scenario;
  std::vector<PointSummary> points;
  std::vector<CheckVerdict> checks;
  std::map<std::string, double> metrics;
  std::vector<std::filesystem::path> files;  // relative to out_dir

  bool checks_pass() const;
  const CheckVerdict* find(std::string_view check, std::string_view point = {}) const;
};

ScenarioResult run_scenario(const Scenario& scenario, const RunContext& ctx);

/// Loads and runs a config file, or a preset when `config` names one and no such file exists.
ScenarioResult run_scenario_file(const std::string& config, const RunContext& ctx);

/// Runs fn(0..count-1) on up to `threads` workers; the first exception is rethrown after all finish.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace ksl
