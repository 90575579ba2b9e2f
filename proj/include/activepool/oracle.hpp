#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

#include <Eigen/Dense>

#include "activepool/graph.hpp"
#include "activepool/model.hpp"

namespace activepool {

inline constexpr std::size_t kOracleMaxPatients = 22;

class OracleSizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Exact posterior moments obtained by summing over all 2^N patient states.
struct ExactPosterior {
  Eigen::VectorXd marginals;
  /// E[X_i X_j]; the diagonal holds the marginals.
  Eigen::MatrixXd pair_expectations;
  /// Sum of unnormalized weights after scaling the largest one to 1.
  double normalizer = 0.0;
  /// Log of the evidence P(Y).
  double log_evidence = 0.0;
};

/// Normalized posterior weight of every state; bit i of the state index is
/// X_i. Throws OracleSizeError above `max_patients`, std::domain_error if the
/// outcomes have zero probability.
Eigen::ArrayXd posterior_state_weights(const PoolingDesign& design,
                                       std::span<const std::uint8_t> outcomes,
                                       const NoiseModel& noise, double rho,
                                       std::size_t max_patients = kOracleMaxPatients,
                                       double* log_evidence = nullptr,
                                       double* normalizer = nullptr);

ExactPosterior exact_posterior(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                               const NoiseModel& noise, double rho,
                               std::size_t max_patients = kOracleMaxPatients);

/// E[X_i X_j] - theta_i theta_j.
double exact_susceptibility(const ExactPosterior& post, PatientIndex i, PatientIndex j);

/// Full exact susceptibility matrix, zero diagonal.
Eigen::MatrixXd exact_susceptibility_matrix(const ExactPosterior& post);

/// Exact posterior probability that every member of `pool` is uninfected.
double exact_pool_negative_prob(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                                const NoiseModel& noise, double rho,
                                std::span<const PatientIndex> pool,
                                std::size_t max_patients = kOracleMaxPatients);

/// Mean squared difference of the strict upper triangles (i < j).
double epsilon_metric(const Eigen::Ref<const Eigen::MatrixXd>& chi_exact,
                      const Eigen::Ref<const Eigen::MatrixXd>& chi_approx);

}  // namespace activepool
