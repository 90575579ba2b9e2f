#include "activepool/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace activepool {

void NoiseModel::validate() const {
  if (!(p_fp >= 0.0 && p_fp < 0.5 && p_tp >= 0.5 && p_tp <= 1.0)) {
    throw std::invalid_argument("noise model requires 0 <= p_fp < 0.5 <= p_tp <= 1");
  }
}

GroundTruth generate_ground_truth(std::size_t n, double rho, Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("rho must lie in [0, 1]");
  }
  const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * rho));
  GroundTruth truth{BinaryVector(n, 0), std::min(k, n)};
  if (truth.n_infected == 0) {
    return truth;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t j = 0; j < truth.n_infected; ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, n - 1);
    std::swap(order[j], order[pick(rng)]);
    truth.x0[order[j]] = 1;
  }
  return truth;
}

std::uint8_t sample_test_outcome(const GroundTruth& truth, std::span<const PatientIndex> pool,
                                 const NoiseModel& noise, Rng& rng) {
  const int t = pool_truth(truth.x0, pool);
  return uniform01(rng) < outcome_likelihood(1, t, noise) ? 1 : 0;
}

OutcomeRecord sample_outcome_vector(const GroundTruth& truth, const PoolingDesign& design,
                                    const NoiseModel& noise, Rng& rng) {
  OutcomeRecord y;
  y.reserve(design.n_pools());
  for (std::size_t mu = 0; mu < design.n_pools(); ++mu) {
    y.push_back(sample_test_outcome(truth, design.pool(mu), noise, rng));
  }
  return y;
}

}  // namespace activepool
