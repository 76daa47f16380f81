#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ksl/acceptance.hpp"
#include "ksl/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Keller-Segel experiment runner"};
  app.require_subcommand(1);
  int threads = 1;
  std::string out = "out";
  std::uint64_t seed = 1;
  app.add_option("--threads", threads, "Worker threads for sweep points")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output root directory");
  app.add_option("--seed", seed, "Seed for subsampled pair sums");

  auto* run = app.add_subcommand("run", "Run a scenario config (file path or preset name)")->fallthrough();
  std::string config;
  run->add_option("config", config)->required();

  auto* presets = app.add_subcommand("presets", "List presets")->fallthrough();
  std::string show;
  presets->add_option("--show", show, "Print the config text of one preset");

  auto* accept = app.add_subcommand("accept", "Run the acceptance suite")->fallthrough();
  std::vector<int> only;
  accept->add_option("--only", only, "Criterion numbers to run");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    const ksl::ScenarioResult r = ksl::run_scenario_file(config, {out, threads, seed});
    for (const auto& c : r.checks)
      std::printf("[%s] %-28s %-12s value=%.6g threshold=%.6g\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                  c.point.c_str(), c.value, c.threshold);
    if (!r.error.empty()) std::fprintf(stderr, "error: %s\n", r.error.c_str());
    if (r.exit_code != 2) std::printf("output: %s\n", r.out_dir.string().c_str());
    std::printf("exit %d\n", r.exit_code);
    return r.exit_code;
  }
  if (*presets) {
    try {
      if (!show.empty()) {
        std::cout << ksl::preset_config(show);
        return 0;
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 2;
    }
    for (const auto& p : ksl::preset_list()) std::printf("%-20s %s\n", p.name.c_str(), p.description.c_str());
    return 0;
  }
  ksl::AcceptanceOptions opt;
  opt.out_root = std::filesystem::path(out) / "accept";
  opt.threads = threads;
  opt.seed = seed;
  opt.only = only;
  bool all = true;
  ksl::run_acceptance(opt, [&](const ksl::CriterionResult& r) {
    all = all && r.pass;
    std::cout << ksl::format_line(r) << std::endl;
  });
  return all ? 0 : 1;
}
