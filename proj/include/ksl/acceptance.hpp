#pragma once

// The acceptance suite: eleven criteria, each reduced to one pass/fail line.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ksl {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::filesystem::path out_root = "out/accept";
  int threads = 1;
  std::uint64_t seed = 1;
  std::vector<int> only;  // empty runs every criterion
};

/// Runs the criteria in order; `report` is called as each one finishes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt,
                                            const std::function<void(const CriterionResult&)>& report = {});

/// "[PASS]  3  title: detail"
std::string format_line(const CriterionResult& r);

}  // namespace ksl
