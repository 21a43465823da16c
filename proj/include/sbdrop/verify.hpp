#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbdrop/closedform.hpp"

namespace sbdrop::verify {

struct VerifyOptions {
  std::size_t battery_instances = 200;
  std::size_t mc_instances = 20;
  std::size_t mc_samples = 100000;
  std::size_t unbiasedness_samples = 100000;
  std::uint64_t seed = 20240501;

  // Test fixture: scales the standard-dropout penalty before the
  // enumeration comparison, so a deliberate perturbation turns the
  // corresponding check red.
  double standard_penalty_scale = 1.0;
};

struct CheckResult {
  std::string name;
  bool must_pass = true;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

// One per battery instance: how far the published three-term decomposition
// sits from the enumerated expectation. Report-only.
struct PaperGapRecord {
  std::size_t index = 0;
  double keep_prob = 0.0;
  double exact = 0.0;
  double paper_value = 0.0;
  double abs_gap = 0.0;
  double rel_gap = 0.0;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  std::vector<PaperGapRecord> paper_gaps;
  bool all_must_pass = false;
};

// Runs the enumeration / Monte Carlo / gradient oracle battery over a fixed
// seeded instance family.
VerifyReport run_verification(const VerifyOptions& options);

std::string verify_report_json(const VerifyReport& report);

// Deterministic battery instance used by the checks and tests alike.
cf::RegressionInstance make_battery_instance(std::uint64_t seed, std::size_t n,
                                             std::size_t d, double keep_prob,
                                             bool scalar_mask);

}  // namespace sbdrop::verify
