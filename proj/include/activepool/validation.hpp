#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "activepool/bp.hpp"
#include "activepool/model.hpp"

namespace activepool {

// BP-versus-enumeration comparisons on small random instances.

struct BpValidationSpec {
  std::size_t instances = 100;
  std::size_t n_patients = 12;
  std::size_t n_pools = 8;
  std::size_t pool_size = 4;
  double rho = 0.1;
  NoiseModel noise{0.95, 0.05};
  /// Forest instances: every patient in at most one pool, with random
  /// N <= n_patients, rho, noise and pool sizes per instance.
  bool trees = false;
  BPConfig bp{};
  std::uint64_t seed = 1;
};

struct BpValidationResult {
  std::size_t instances = 0;
  std::size_t entries = 0;
  double max_abs_deviation = 0.0;
  double mean_abs_deviation = 0.0;
  double median_abs_deviation = 0.0;
  /// Fraction of patients whose BP MAP decision equals the exact one.
  double map_agreement = 0.0;
  std::size_t bp_unconverged = 0;
};

BpValidationResult validate_bp(const BpValidationSpec& spec);

struct ChiValidationSpec {
  std::size_t n_patients = 20;
  std::size_t pool_size = 10;
  /// M / N; M = alpha * N must give an integral patient degree.
  double alpha = 0.5;
  NoiseModel noise{0.95, 0.05};
  double rho = 0.1;
  std::size_t realizations = 20;
  BPConfig bp{};
  std::uint64_t seed = 1;
};

struct ChiValidationResult {
  std::vector<double> epsilon;  // one per realization
  double mean_epsilon = 0.0;
  double max_epsilon = 0.0;
  std::size_t bp_unconverged = 0;
};

/// Clamped-BP susceptibilities against exact ones on doubly-regular random
/// designs, summarized by the epsilon metric.
ChiValidationResult validate_chi(const ChiValidationSpec& spec);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Closed-form identities of the selection rule: P(Y=1 | q*) = 1/2, entropy
/// maximal at q*, and argmin |q - q*| agreeing with argmax entropy.
std::vector<CheckResult> analytic_selftest(std::uint64_t seed = 7);

}  // namespace activepool
