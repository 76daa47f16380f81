#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ksl/errors.hpp"
#include "ksl/scenario.hpp"
#include "ksl/snapshot.hpp"

using namespace ksl;
namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

namespace {

const char* kSmall = R"([grid]
box_length = 8
n = 64
backend = free-space

[initial]
kind = gaussian
mass = 2pi
width = 0.5

[run]
t_end = 0.05
record_every = 0.01
blowup_cap = 1e4
expect = completed

[probes]
centers = 0 0; 0.5 0
radii = 1

[checks]
mass_drift = 1e-6
envelope = true
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ksl_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string with(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

// exit status and stdout of a shell command
std::pair<int, std::string> shell(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

}  // namespace

TEST_CASE("quantities with a pi factor and fractions") {
  CHECK(parse_quantity("12pi") == doctest::Approx(12.0 * kPi));
  CHECK(parse_quantity("pi") == doctest::Approx(kPi));
  CHECK(parse_quantity("0.5 pi") == doctest::Approx(0.5 * kPi));
  CHECK(parse_quantity("4/3") == doctest::Approx(4.0 / 3.0));
  CHECK(parse_quantity(" 1e-6 ") == 1e-6);
  CHECK_THROWS_AS(parse_quantity("twelve"), ConfigError);
  CHECK_THROWS_AS(parse_quantity("1/0"), ConfigError);
  CHECK_THROWS_AS(parse_quantity(""), ConfigError);
}

TEST_CASE("config parsing") {
  const Scenario s = parse_scenario(kSmall);
  CHECK(s.box_length == 8.0);
  CHECK(s.n == 64);
  CHECK(s.backend == PoissonBackend::free_space);
  CHECK(s.initial.mass == doctest::Approx(2.0 * kPi));
  CHECK(s.expect == Expectation::completed);
  REQUIRE(s.probes.size() == 2);
  CHECK(s.probes[1].center.x == 0.5);
  CHECK(s.probes[1].radius == 1.0);
  CHECK_NOTHROW(s.validate());

  CHECK_THROWS_AS(parse_scenario(with(kSmall, "n = 64", "n = 64\ncolour = red")), ConfigError);
  CHECK_THROWS_AS(parse_scenario(std::string(kSmall) + "\n[extras]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(with(kSmall, "n = 64", "n = 6.5")), ConfigError);
  CHECK_THROWS_AS(parse_scenario(with(kSmall, "kind = gaussian", "kind = plume")), ConfigError);
  CHECK_THROWS_AS(parse_scenario("[grid\nn = 64\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(with(kSmall, "blowup_cap = 1e4", "blowup_cap = 1")).validate(), ConfigError);
}

TEST_CASE("preset list") {
  const auto list = preset_list();
  for (const char* name : {"subcritical-4pi", "critical-8pi", "supercritical-12pi", "two-atoms-6pi", "mollify-sweep-7pi",
                           "scaling-pair", "picard-vs-stepper"}) {
    const bool found = std::any_of(list.begin(), list.end(), [&](const PresetInfo& p) { return p.name == name; });
    CHECK_MESSAGE(found, name);
  }
  for (const PresetInfo& p : list) {
    CHECK_FALSE(p.description.empty());
    Scenario s = parse_scenario(preset_config(p.name));
    CHECK_NOTHROW(s.validate());
  }
  CHECK_THROWS_AS(preset_config("no-such-preset"), ConfigError);
}

TEST_CASE("malformed config exits with 2") {
  const fs::path dir = scratch("malformed");
  fs::create_directories(dir);
  const fs::path cfg = dir / "bad.cfg";
  std::ofstream(cfg) << "[grid]\nn = sixty-four\n";
  const ScenarioResult r = run_scenario_file(cfg.string(), {dir / "out", 1, 1});
  CHECK(r.exit_code == 2);
  CHECK_FALSE(r.error.empty());
  CHECK(run_scenario_file((dir / "missing.cfg").string(), {dir / "out", 1, 1}).exit_code == 2);
  fs::remove_all(dir);
}

TEST_CASE("failed expectation exits with 1") {
  const fs::path dir = scratch("expect");
  const ScenarioResult r = run_scenario(parse_scenario(with(kSmall, "expect = completed", "expect = blowup")), {dir, 1, 1});
  CHECK(r.exit_code == 1);
  CHECK_FALSE(r.checks_pass());
  fs::remove_all(dir);
}

TEST_CASE("identical runs give bit-identical outputs, with a complete manifest") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  Scenario s = parse_scenario(kSmall);
  s.name = "small";
  const ScenarioResult ra = run_scenario(s, {a, 1, 7});
  const ScenarioResult rb = run_scenario(s, {b, 1, 7});
  REQUIRE(ra.exit_code == 0);
  REQUIRE(rb.exit_code == 0);
  REQUIRE(ra.files == rb.files);

  std::size_t csv = 0;
  for (const fs::path& f : ra.files) {
    if (f.extension() == ".csv" || f.extension() == ".ksf") {
      CHECK_MESSAGE(slurp(ra.out_dir / f) == slurp(rb.out_dir / f), f.string());
      csv += f.extension() == ".csv";
    }
  }
  CHECK(csv >= 4);

  const auto manifest = nlohmann::json::parse(slurp(ra.out_dir / "manifest.json"));
  std::vector<std::string> listed;
  for (const auto& f : manifest["files"]) {
    listed.push_back(f["path"].get<std::string>());
    CHECK(f["sha256"].get<std::string>() == sha256_file(ra.out_dir / listed.back()));
  }
  for (const auto& entry : fs::directory_iterator(ra.out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    CHECK_MESSAGE(std::find(listed.begin(), listed.end(), name) != listed.end(), name);
  }
  CHECK(manifest["exit_code"] == 0);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("sweep results do not depend on the thread count") {
  const fs::path a = scratch("threads_a"), b = scratch("threads_b");
  Scenario s = parse_scenario(std::string(kSmall) + "\n[sweep]\naxis = mass\nvalues = pi, 2pi, 3pi\n");
  s.name = "sweep";
  const ScenarioResult ra = run_scenario(s, {a, 1, 1});
  const ScenarioResult rb = run_scenario(s, {b, 3, 1});
  REQUIRE(ra.exit_code == 0);
  REQUIRE(ra.points.size() == 3);
  for (const fs::path& f : ra.files)
    if (f.extension() == ".csv") CHECK_MESSAGE(slurp(ra.out_dir / f) == slurp(rb.out_dir / f), f.string());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("worker pool") {
  std::vector<int> hits(50, 0);
  parallel_for(hits.size(), 4, [&](std::size_t k) { hits[k] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t k) { if (k == 5) throw ConfigError("boom"); }), ConfigError);
}

TEST_CASE("command-line front end") {
  const std::string cli = KSL_CLI_PATH;
  const auto [code, listing] = shell(cli + " presets");
  CHECK(code == 0);
  CHECK(listing.find("two-atoms-6pi") != std::string::npos);
  CHECK(listing.find("mollify-sweep-7pi") != std::string::npos);

  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "small.cfg") << kSmall;
  std::ofstream(dir / "bad.cfg") << "[grid]\nbox_length = -3\n";
  const auto [ok, text] = shell(cli + " run " + (dir / "small.cfg").string() + " --out " + (dir / "out").string());
  CHECK(ok == 0);
  CHECK(text.find("[PASS] mass_drift") != std::string::npos);
  CHECK(shell(cli + " run " + (dir / "bad.cfg").string() + " --out " + (dir / "out").string()).first == 2);
  CHECK(shell(cli + " frobnicate").first != 0);
  CHECK(shell(cli + " presets --show scaling-pair").second.find("[grid]") != std::string::npos);
  fs::remove_all(dir);
}
