#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>

#include <Eigen/Dense>

#include "activepool/bp.hpp"
#include "activepool/graph.hpp"
#include "activepool/model.hpp"
#include "activepool/random.hpp"

namespace activepool {

// ---------------------------------------------------------------------------
// Predictive quantities of a single prospective test. q is the posterior
// probability that the prospective pool is entirely uninfected.
// ---------------------------------------------------------------------------

/// The q at which a positive and a negative outcome are equally likely.
template <typename Scalar>
Scalar q_star(Scalar p_tp, Scalar p_fp) {
  return (p_tp - Scalar(0.5)) / (p_tp - p_fp);
}
inline double q_star(const NoiseModel& noise) { return q_star(noise.p_tp, noise.p_fp); }

/// P(Y = 1) for a pool with negative probability q.
template <typename Scalar>
Scalar predictive_probability(Scalar q, Scalar p_tp, Scalar p_fp) {
  return p_tp * (Scalar(1) - q) + p_fp * q;
}
inline double predictive_probability(double q, const NoiseModel& noise) {
  return predictive_probability(q, noise.p_tp, noise.p_fp);
}

/// Binary entropy, natural log.
template <typename Scalar>
Scalar binary_entropy(Scalar p) {
  using std::log;
  Scalar h(0);
  if (p > Scalar(0)) h -= p * log(p);
  if (p < Scalar(1)) h -= (Scalar(1) - p) * log(Scalar(1) - p);
  return h;
}

template <typename Scalar>
Scalar predictive_entropy(Scalar q, Scalar p_tp, Scalar p_fp) {
  return binary_entropy(predictive_probability(q, p_tp, p_fp));
}
inline double predictive_entropy(double q, const NoiseModel& noise) {
  return predictive_entropy(q, noise.p_tp, noise.p_fp);
}

/// prod over the pool of (1 - theta_i).
double onebody_pool_negative_prob(const Eigen::Ref<const Eigen::VectorXd>& marginals,
                                  std::span<const PatientIndex> pool);

struct CorrectedNegativeProb {
  double value = 0.0;
  /// The raw value chi + (1 - theta_i)(1 - theta_j) fell outside [0, 1].
  bool clipped = false;
};

/// Pair negative probability with the correlation term:
/// chi_ij + (1 - theta_i)(1 - theta_j), clipped into [0, 1].
CorrectedNegativeProb chi_corrected_pool_negative_prob(
    const Eigen::Ref<const Eigen::VectorXd>& marginals, double chi,
    std::span<const PatientIndex> pool);

// ---------------------------------------------------------------------------
// Pool selection
// ---------------------------------------------------------------------------

enum class PoolSpaceKind {
  singletons,    // P1
  up_to_pairs,   // P2
};

struct PoolSpace {
  PoolSpaceKind kind = PoolSpaceKind::singletons;
  /// Canonical (sorted) pools that may not be selected while
  /// SelectionPolicy::exclude_tested is set.
  std::set<Pool> exclusions;
};

enum class TieBreak {
  lowest_lexicographic,
  random,
};

struct SelectionPolicy {
  /// Score pairs with chi_corrected_pool_negative_prob instead of the
  /// one-body product.
  bool use_susceptibility = false;
  /// Never re-select a pool that is already in the design.
  bool exclude_tested = true;
  TieBreak tie_break = TieBreak::lowest_lexicographic;
};

/// Source of pairwise susceptibilities chi_ij for i < j. Values must be
/// consistent with the marginals in the sense that
/// chi_ij + (1 - theta_i)(1 - theta_j) lies in
/// [1 - theta_i - theta_j, 1 - min(theta_i, theta_j)]; the selector relies on
/// that interval to skip pairs that cannot win.
using SusceptibilitySource = std::function<double(PatientIndex, PatientIndex)>;

class EmptyCandidateSetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SelectionStats {
  std::size_t candidates_scored = 0;
  std::size_t clipped = 0;
};

/// Pool in `space` whose negative probability is closest to q*(noise).
/// Candidates are visited in lexicographic order of their sorted indices
/// ({0} < {0,1} < {0,2} < ... < {1} < {1,2} ...); with
/// TieBreak::lowest_lexicographic the first minimizer wins and `rng` is not
/// touched, with TieBreak::random one minimizer is drawn uniformly.
/// Throws EmptyCandidateSetError if every candidate is excluded.
Pool select_next_pool(const Eigen::Ref<const Eigen::VectorXd>& marginals, const PoolSpace& space,
                      const NoiseModel& noise, const SelectionPolicy& policy,
                      const SusceptibilitySource& chi, Rng& rng,
                      SelectionStats* stats = nullptr);

/// Lazily evaluated clamped-BP susceptibilities for one posterior. A pair is
/// evaluated from the run clamping its member with the larger marginal (the
/// lower index on ties); each clamped run is done once and cached.
class ClampedSusceptibilities {
 public:
  ClampedSusceptibilities(const PoolingDesign& design, std::span<const std::uint8_t> outcomes,
                          const NoiseModel& noise, double rho, const BPConfig& config,
                          const BeliefState& base);

  double operator()(PatientIndex i, PatientIndex j);

  std::size_t clamped_runs() const { return cache_.size(); }
  std::size_t unconverged_runs() const { return unconverged_; }

 private:
  const PoolingDesign& design_;
  std::span<const std::uint8_t> outcomes_;
  NoiseModel noise_;
  double rho_;
  BPConfig config_;
  const BeliefState& base_;
  std::unordered_map<PatientIndex, Eigen::VectorXd> cache_;
  std::size_t unconverged_ = 0;
};

}  // namespace activepool
