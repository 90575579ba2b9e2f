#include "activepool/oracle.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace activepool {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// count * log(p) with the 0 * log(0) = 0 convention.
double weighted_log(std::size_t count, double p) {
  return count == 0 ? 0.0 : static_cast<double>(count) * std::log(p);
}

void check_size(const PoolingDesign& design, std::size_t max_patients) {
  const std::size_t cap = std::min<std::size_t>(max_patients, 30);
  if (design.n_patients() > cap) {
    throw OracleSizeError("exact enumeration limited to " + std::to_string(cap) +
                          " patients, got " + std::to_string(design.n_patients()));
  }
}

// Row s is the bit pattern of s over `bits` columns.
Eigen::MatrixXd bit_table(std::size_t bits) {
  const Eigen::Index rows = Eigen::Index{1} << bits;
  Eigen::MatrixXd table(rows, static_cast<Eigen::Index>(bits));
  for (Eigen::Index s = 0; s < rows; ++s) {
    for (std::size_t b = 0; b < bits; ++b) {
      table(s, static_cast<Eigen::Index>(b)) = static_cast<double>((s >> b) & 1);
    }
  }
  return table;
}

}  // namespace

Eigen::ArrayXd posterior_state_weights(const PoolingDesign& design,
                                       std::span<const std::uint8_t> outcomes,
                                       const NoiseModel& noise, double rho,
                                       std::size_t max_patients, double* log_evidence,
                                       double* normalizer) {
  check_size(design, max_patients);
  if (outcomes.size() != design.n_pools()) {
    throw std::invalid_argument("outcome record length does not match the number of pools");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("rho must lie in [0, 1]");
  }
  const std::size_t n = design.n_patients();
  const std::uint64_t n_states = std::uint64_t{1} << n;

  std::vector<std::uint32_t> masks;
  std::vector<double> log_if_positive;
  std::vector<double> log_if_negative;
  for (std::size_t mu = 0; mu < design.n_pools(); ++mu) {
    std::uint32_t m = 0;
    for (PatientIndex i : design.pool(mu)) m |= std::uint32_t{1} << i;
    masks.push_back(m);
    log_if_positive.push_back(std::log(outcome_likelihood(outcomes[mu], 1, noise)));
    log_if_negative.push_back(std::log(outcome_likelihood(outcomes[mu], 0, noise)));
  }

  std::vector<double> log_prior(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    log_prior[k] = weighted_log(k, rho) + weighted_log(n - k, 1.0 - rho);
  }

  Eigen::ArrayXd w(static_cast<Eigen::Index>(n_states));
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < n_states; ++s) {
    const auto state = static_cast<std::uint32_t>(s);
    double lw = log_prior[static_cast<std::size_t>(std::popcount(state))];
    for (std::size_t mu = 0; mu < masks.size(); ++mu) {
      lw += (state & masks[mu]) != 0 ? log_if_positive[mu] : log_if_negative[mu];
    }
    w[static_cast<Eigen::Index>(s)] = lw;
    max_log = std::max(max_log, lw);
  }
  if (!std::isfinite(max_log)) {
    throw std::domain_error("outcomes have zero probability under the model");
  }
  w = (w - max_log).exp();
  const double z = w.sum();
  if (log_evidence != nullptr) *log_evidence = max_log + std::log(z);
  if (normalizer != nullptr) *normalizer = z;
  return w / z;
}

ExactPosterior exact_posterior(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                               const NoiseModel& noise, double rho, std::size_t max_patients) {
  ExactPosterior post;
  const Eigen::ArrayXd w = posterior_state_weights(design, outcomes, noise, rho, max_patients,
                                                   &post.log_evidence, &post.normalizer);
  const std::size_t n = design.n_patients();
  // Split the state index into high and low halves so that every second
  // moment is a small matrix product over the (hi, lo) weight table.
  const std::size_t lo_bits = n - n / 2;
  const std::size_t hi_bits = n / 2;
  const auto l = static_cast<Eigen::Index>(lo_bits);
  const auto h = static_cast<Eigen::Index>(hi_bits);
  const Eigen::Map<const RowMajorMatrix> table(w.data(), Eigen::Index{1} << hi_bits,
                                               Eigen::Index{1} << lo_bits);
  const Eigen::MatrixXd lo = bit_table(lo_bits);
  const Eigen::MatrixXd hi = bit_table(hi_bits);
  const Eigen::VectorXd lo_mass = table.colwise().sum().transpose();
  const Eigen::VectorXd hi_mass = table.rowwise().sum();

  post.pair_expectations.resize(l + h, l + h);
  post.pair_expectations.topLeftCorner(l, l) = lo.transpose() * lo_mass.asDiagonal() * lo;
  post.pair_expectations.bottomRightCorner(h, h) = hi.transpose() * hi_mass.asDiagonal() * hi;
  const Eigen::MatrixXd cross = hi.transpose() * table * lo;
  post.pair_expectations.bottomLeftCorner(h, l) = cross;
  post.pair_expectations.topRightCorner(l, h) = cross.transpose();
  post.marginals = post.pair_expectations.diagonal();
  return post;
}

double exact_susceptibility(const ExactPosterior& post, PatientIndex i, PatientIndex j) {
  const auto n = static_cast<std::size_t>(post.marginals.size());
  if (i == j) throw std::invalid_argument("exact_susceptibility requires i != j");
  if (i >= n || j >= n) throw InvalidIndexError("patient index out of range");
  const auto a = static_cast<Eigen::Index>(i);
  const auto b = static_cast<Eigen::Index>(j);
  return post.pair_expectations(a, b) - post.marginals[a] * post.marginals[b];
}

Eigen::MatrixXd exact_susceptibility_matrix(const ExactPosterior& post) {
  Eigen::MatrixXd chi = post.pair_expectations - post.marginals * post.marginals.transpose();
  chi.diagonal().setZero();
  return chi;
}

double exact_pool_negative_prob(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                                const NoiseModel& noise, double rho,
                                std::span<const PatientIndex> pool, std::size_t max_patients) {
  const Eigen::ArrayXd w = posterior_state_weights(design, outcomes, noise, rho, max_patients);
  std::uint64_t mask = 0;
  for (PatientIndex i : pool) {
    if (i >= design.n_patients()) throw InvalidIndexError("patient index out of range");
    mask |= std::uint64_t{1} << i;
  }
  double q = 0.0;
  for (Eigen::Index s = 0; s < w.size(); ++s) {
    if ((static_cast<std::uint64_t>(s) & mask) == 0) q += w[s];
  }
  return q;
}

double epsilon_metric(const Eigen::Ref<const Eigen::MatrixXd>& chi_exact,
                      const Eigen::Ref<const Eigen::MatrixXd>& chi_approx) {
  if (chi_exact.rows() != chi_approx.rows() || chi_exact.cols() != chi_approx.cols() ||
      chi_exact.rows() != chi_exact.cols()) {
    throw std::invalid_argument("epsilon_metric requires equal square matrices");
  }
  const Eigen::Index n = chi_exact.rows();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (Eigen::Index j = 1; j < n; ++j) {
    sum += (chi_exact.col(j).head(j) - chi_approx.col(j).head(j)).squaredNorm();
  }
  return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

}  // namespace activepool
