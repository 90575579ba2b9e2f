#include "activepool/bp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace activepool {

void BPConfig::validate() const {
  if (!(tolerance > 0.0)) {
    throw std::invalid_argument("BP tolerance must be positive");
  }
  if (!(damping >= 0.0 && damping < 1.0)) {
    throw std::invalid_argument("BP damping must lie in [0, 1)");
  }
  if (!(fallback_damping >= 0.0 && fallback_damping < 1.0)) {
    throw std::invalid_argument("BP fallback_damping must lie in [0, 1)");
  }
  if (!(clamp_floor > 0.0 && clamp_floor < 0.5)) {
    throw std::invalid_argument("BP clamp_floor must lie in (0, 0.5)");
  }
}

namespace {

// Edge layout shared by both sweeps.
struct EdgeIndex {
  std::vector<std::size_t> pool_offset;     // n_pools + 1
  std::vector<std::size_t> edge_patient;    // n_edges
  std::vector<std::size_t> patient_offset;  // n_patients + 1
  std::vector<std::size_t> patient_edges;   // n_edges, grouped by patient

  explicit EdgeIndex(const PoolingDesign& design) {
    const std::size_t n = design.n_patients();
    pool_offset.reserve(design.n_pools() + 1);
    pool_offset.push_back(0);
    edge_patient.reserve(design.n_edges());
    for (const Pool& pool : design.pools()) {
      edge_patient.insert(edge_patient.end(), pool.begin(), pool.end());
      pool_offset.push_back(edge_patient.size());
    }
    patient_offset.assign(n + 1, 0);
    for (std::size_t i : edge_patient) ++patient_offset[i + 1];
    for (std::size_t i = 0; i < n; ++i) patient_offset[i + 1] += patient_offset[i];
    patient_edges.resize(edge_patient.size());
    std::vector<std::size_t> cursor(patient_offset.begin(), patient_offset.end() - 1);
    for (std::size_t e = 0; e < edge_patient.size(); ++e) {
      patient_edges[cursor[edge_patient[e]]++] = e;
    }
  }
};

double logistic(double log_odds) { return 1.0 / (1.0 + std::exp(-log_odds)); }

}  // namespace

BeliefState run_bp(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                   const NoiseModel& noise, double rho, const BPConfig& config,
                   const ClampSet& clamps, const BeliefState* warm_start) {
  config.validate();
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("BP requires rho in (0, 1)");
  }
  if (outcomes.size() != design.n_pools()) {
    throw std::invalid_argument("outcome record length does not match the number of pools");
  }
  const std::size_t n = design.n_patients();
  const std::size_t n_edges = design.n_edges();
  const EdgeIndex index(design);

  std::vector<char> clamped(n, 0);
  for (PatientIndex i : clamps.patients) {
    if (i >= n) throw InvalidIndexError("clamped patient out of range");
    clamped[i] = 1;
  }

  const double lo = config.clamp_floor;
  const double hi = 1.0 - config.clamp_floor;
  auto clip = [lo, hi](double v) { return std::clamp(v, lo, hi); };

  BeliefState state;
  if (warm_start != nullptr) {
    if (warm_start->theta_to_pool.size() != n_edges ||
        warm_start->theta_from_pool.size() != n_edges) {
      throw std::invalid_argument("warm-start state does not match the design");
    }
    state.theta_to_pool = warm_start->theta_to_pool;
    state.theta_from_pool = warm_start->theta_from_pool;
  } else {
    state.theta_to_pool.assign(n_edges, rho);
    state.theta_from_pool.assign(n_edges, 0.5);
  }
  for (std::size_t e = 0; e < n_edges; ++e) {
    if (clamped[index.edge_patient[e]]) {
      state.theta_to_pool[e] = 1.0;
      state.theta_from_pool[e] = 1.0;
    }
  }

  const double prior_log_odds = std::log(rho) - std::log1p(-rho);
  std::vector<double> prefix;
  std::vector<double> edge_log_odds(n_edges);

  // One synchronous sweep with damping `keep`; returns the largest change.
  auto sweep = [&](double keep) {
    double delta = 0.0;

    // Pool-to-patient: U / (U (2 - P) + W P), P = prod over other members of
    // (1 - theta_{j->mu}).
    for (std::size_t mu = 0; mu < design.n_pools(); ++mu) {
      const double y = outcomes[mu];
      const double u = noise.p_tp * y + (1.0 - noise.p_tp) * (1.0 - y);
      const double w = noise.p_fp * y + (1.0 - noise.p_fp) * (1.0 - y);
      const std::size_t begin = index.pool_offset[mu];
      const std::size_t end = index.pool_offset[mu + 1];
      prefix.assign(end - begin + 1, 1.0);
      for (std::size_t e = begin; e < end; ++e) {
        prefix[e - begin + 1] = prefix[e - begin] * (1.0 - state.theta_to_pool[e]);
      }
      double suffix = 1.0;
      for (std::size_t e = end; e-- > begin;) {
        if (!clamped[index.edge_patient[e]]) {
          const double others = prefix[e - begin] * suffix;
          const double z = std::max(u * (2.0 - others) + w * others, lo);
          double updated = clip(u / z);
          updated = (1.0 - keep) * updated + keep * state.theta_from_pool[e];
          delta = std::max(delta, std::abs(updated - state.theta_from_pool[e]));
          state.theta_from_pool[e] = updated;
        }
        suffix *= 1.0 - state.theta_to_pool[e];
      }
    }

    // Patient-to-pool, in log-odds: prior plus every other incoming message.
    for (std::size_t i = 0; i < n; ++i) {
      if (clamped[i]) continue;
      const std::size_t begin = index.patient_offset[i];
      const std::size_t end = index.patient_offset[i + 1];
      double total = prior_log_odds;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t e = index.patient_edges[k];
        const double t = state.theta_from_pool[e];
        edge_log_odds[e] = std::log(t) - std::log1p(-t);
        total += edge_log_odds[e];
      }
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t e = index.patient_edges[k];
        double updated = clip(logistic(total - edge_log_odds[e]));
        updated = (1.0 - keep) * updated + keep * state.theta_to_pool[e];
        delta = std::max(delta, std::abs(updated - state.theta_to_pool[e]));
        state.theta_to_pool[e] = updated;
      }
    }
    return delta;
  };

  auto iterate = [&](double keep) {
    for (std::size_t iter = 1; iter <= config.max_iterations; ++iter) {
      ++state.iterations_used;
      if (sweep(keep) < config.tolerance) {
        state.converged = true;
        return;
      }
    }
  };

  iterate(config.damping);
  if (!state.converged && config.fallback_damping > config.damping) {
    iterate(config.fallback_damping);
  }

  state.marginals.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (clamped[i]) {
      state.marginals[static_cast<Eigen::Index>(i)] = 1.0;
      continue;
    }
    double total = prior_log_odds;
    for (std::size_t k = index.patient_offset[i]; k < index.patient_offset[i + 1]; ++k) {
      const double t = state.theta_from_pool[index.patient_edges[k]];
      total += std::log(t) - std::log1p(-t);
    }
    state.marginals[static_cast<Eigen::Index>(i)] = clip(logistic(total));
  }
  return state;
}

BinaryVector map_estimate(const Eigen::Ref<const Eigen::VectorXd>& marginals) {
  BinaryVector x(static_cast<std::size_t>(marginals.size()));
  for (Eigen::Index i = 0; i < marginals.size(); ++i) {
    x[static_cast<std::size_t>(i)] = marginals[i] > 0.5 ? 1 : 0;
  }
  return x;
}

Eigen::VectorXd conditional_marginals(const PoolingDesign& design,
                                      std::span<const std::uint8_t> outcomes,
                                      const NoiseModel& noise, double rho, const BPConfig& config,
                                      PatientIndex i, const BeliefState* base) {
  return run_bp(design, outcomes, noise, rho, config, ClampSet{{i}}, base).marginals;
}

double conditional_marginal(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                            const NoiseModel& noise, double rho, const BPConfig& config,
                            PatientIndex i, PatientIndex j) {
  if (i == j) throw std::invalid_argument("conditional_marginal requires i != j");
  if (j >= design.n_patients()) throw InvalidIndexError("patient index out of range");
  return conditional_marginals(design, outcomes, noise, rho, config, i)[static_cast<Eigen::Index>(j)];
}

double susceptibility(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                      const NoiseModel& noise, double rho, const BPConfig& config,
                      PatientIndex i, PatientIndex j) {
  if (i == j) throw std::invalid_argument("susceptibility requires i != j");
  if (i >= design.n_patients() || j >= design.n_patients()) {
    throw InvalidIndexError("patient index out of range");
  }
  const BeliefState base = run_bp(design, outcomes, noise, rho, config);
  const Eigen::VectorXd cond = conditional_marginals(design, outcomes, noise, rho, config, i, &base);
  const auto ii = static_cast<Eigen::Index>(i);
  const auto jj = static_cast<Eigen::Index>(j);
  return base.marginals[ii] * cond[jj] - base.marginals[ii] * base.marginals[jj];
}

Eigen::MatrixXd susceptibility_matrix(const PoolingDesign& design,
                                      std::span<const std::uint8_t> outcomes,
                                      const NoiseModel& noise, double rho,
                                      const BPConfig& config, const BeliefState& base) {
  const auto n = static_cast<Eigen::Index>(design.n_patients());
  Eigen::MatrixXd chi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd cond = conditional_marginals(design, outcomes, noise, rho, config,
                                                       static_cast<PatientIndex>(i), &base);
    chi.row(i) = (base.marginals[i] * (cond - base.marginals)).transpose();
    chi(i, i) = 0.0;
  }
  return chi;
}

}  // namespace activepool
