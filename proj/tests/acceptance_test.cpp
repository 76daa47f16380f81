#include <doctest.h>

#include <filesystem>
#include <iostream>

#include "ksl/acceptance.hpp"

using namespace ksl;

TEST_CASE("acceptance suite") {
  AcceptanceOptions opt;
  opt.out_root = std::filesystem::current_path() / "acceptance_out";
  std::filesystem::remove_all(opt.out_root);
  const auto results = run_acceptance(opt, [](const CriterionResult& r) { std::cout << format_line(r) << std::endl; });
  REQUIRE(results.size() == 11);
  for (const CriterionResult& r : results) {
    CHECK_MESSAGE(r.pass, format_line(r));
    CHECK(r.id >= 1);
    CHECK(r.id <= 11);
  }
}

TEST_CASE("a criterion subset runs alone") {
  AcceptanceOptions opt;
  opt.out_root = std::filesystem::current_path() / "acceptance_subset_out";
  opt.only = {5};
  const auto results = run_acceptance(opt);
  REQUIRE(results.size() == 1);
  CHECK(results[0].id == 5);
  CHECK(results[0].pass);
  CHECK(format_line(results[0]).rfind("[PASS]", 0) == 0);
}
