#pragma once

#include <cstdint>
#include <span>

#include "activepool/graph.hpp"
#include "activepool/random.hpp"

namespace activepool {

/// Bernoulli test channel. A truly positive pool reads positive with
/// probability p_tp, a truly negative one with probability p_fp.
struct NoiseModel {
  double p_tp = 0.9;
  double p_fp = 0.05;

  /// Throws std::invalid_argument unless 0 <= p_fp < 0.5 <= p_tp <= 1.
  void validate() const;
};

struct GroundTruth {
  BinaryVector x0;
  std::size_t n_infected = 0;
};

/// Test outcomes Y, aligned one-to-one with the pools of a design.
using OutcomeRecord = BinaryVector;

/// Exactly round(n * rho) infected patients (half away from zero), placed
/// uniformly at random.
GroundTruth generate_ground_truth(std::size_t n, double rho, Rng& rng);

/// P(Y = y | T = t) under the channel.
constexpr double outcome_likelihood(int y, int t, const NoiseModel& noise) {
  const double p = t != 0 ? noise.p_tp : noise.p_fp;
  return y != 0 ? p : 1.0 - p;
}

/// One noisy test on `pool`. Consumes exactly one uniform draw.
std::uint8_t sample_test_outcome(const GroundTruth& truth, std::span<const PatientIndex> pool,
                                 const NoiseModel& noise, Rng& rng);

/// One independent draw per pool, in pool order.
OutcomeRecord sample_outcome_vector(const GroundTruth& truth, const PoolingDesign& design,
                                    const NoiseModel& noise, Rng& rng);

}  // namespace activepool
