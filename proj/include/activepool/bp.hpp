#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "activepool/graph.hpp"
#include "activepool/model.hpp"

namespace activepool {

/// Schedule and numerical guards for belief propagation.
struct BPConfig {
  std::size_t max_iterations = 1000;
  /// Convergence is declared when no message moved by this much in a sweep.
  double tolerance = 1e-8;
  /// Fraction of the previous message kept on each update.
  double damping = 0.0;
  /// If the run has not converged after max_iterations, it continues from
  /// the last messages for up to max_iterations more with this damping.
  /// Ignored unless larger than `damping`; 0 disables the retry.
  double fallback_damping = 0.5;
  /// Messages and marginals are clipped into [clamp_floor, 1 - clamp_floor].
  double clamp_floor = 1e-12;

  void validate() const;
};

/// Patients conditioned on being infected.
struct ClampSet {
  std::vector<PatientIndex> patients;
};

/// Messages are indexed by edge. Edges are numbered pool-major: the k-th
/// member of pool mu is edge (sum of earlier pool sizes) + k.
struct BeliefState {
  /// Patient-to-pool infection probabilities, one per edge.
  std::vector<double> theta_to_pool;
  /// Pool-to-patient infection probabilities, one per edge.
  std::vector<double> theta_from_pool;
  Eigen::VectorXd marginals;
  bool converged = false;
  std::size_t iterations_used = 0;
};

/// Loopy BP for the OR-channel group-testing posterior with a Bernoulli(rho)
/// prior. Messages start at theta_to_pool = rho, theta_from_pool = 0.5 unless
/// `warm_start` (a state for the same design) is given. Each iteration
/// updates every pool-to-patient message, then every patient-to-pool
/// message. Clamped patients keep both message directions at exactly 1 and
/// report marginal 1.
BeliefState run_bp(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                   const NoiseModel& noise, double rho, const BPConfig& config = {},
                   const ClampSet& clamps = {}, const BeliefState* warm_start = nullptr);

/// 1 where the marginal exceeds 0.5 strictly.
BinaryVector map_estimate(const Eigen::Ref<const Eigen::VectorXd>& marginals);
inline BinaryVector map_estimate(const BeliefState& state) { return map_estimate(state.marginals); }

/// BP estimate of P(X_j = 1 | X_i = 1, Y) for every j, from a run clamping i.
/// `base` (the unclamped fixed point) is used as a warm start when given.
Eigen::VectorXd conditional_marginals(const PoolingDesign& design,
                                      std::span<const std::uint8_t> outcomes,
                                      const NoiseModel& noise, double rho, const BPConfig& config,
                                      PatientIndex i, const BeliefState* base = nullptr);

double conditional_marginal(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                            const NoiseModel& noise, double rho, const BPConfig& config,
                            PatientIndex i, PatientIndex j);

/// theta_i * theta_j^{|X_i=1} - theta_i * theta_j.
double susceptibility(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                      const NoiseModel& noise, double rho, const BPConfig& config,
                      PatientIndex i, PatientIndex j);

/// All clamped-BP susceptibilities in one N x N matrix. Row i comes from the
/// run clamping i, so entry (i, j) is theta_i (theta_j^{|X_i=1} - theta_j);
/// the diagonal is zero. Not symmetrized.
Eigen::MatrixXd susceptibility_matrix(const PoolingDesign& design,
                                      std::span<const std::uint8_t> outcomes,
                                      const NoiseModel& noise, double rho,
                                      const BPConfig& config, const BeliefState& base);

}  // namespace activepool
