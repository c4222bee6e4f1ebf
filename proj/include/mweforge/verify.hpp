#ifndef MWEFORGE_VERIFY_HPP
#define MWEFORGE_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mweforge {

struct CheckResult {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  /// Swap the reversal layer for one that scales by +lambda; the sign checks must then fail.
  bool corrupt_grl_sign = false;
  std::uint64_t seed = 7;
  int li_trials = 1000;
  double eps = 1e-5;
};

/// Finite-difference checks of every differentiable op, of two composed models, and of the
/// lateral-inhibition and gradient-reversal laws.
std::vector<CheckResult> run_verification(const VerifyOptions& options = {});

/// One line per check: PASS/FAIL, name, error, tolerance.
std::string format_checks(const std::vector<CheckResult>& checks);

bool all_passed(const std::vector<CheckResult>& checks);

}  // namespace mweforge

#endif  // MWEFORGE_VERIFY_HPP
