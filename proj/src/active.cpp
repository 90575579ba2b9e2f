#include "activepool/active.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace activepool {

double onebody_pool_negative_prob(const Eigen::Ref<const Eigen::VectorXd>& marginals,
                                  std::span<const PatientIndex> pool) {
  if (pool.empty()) throw std::invalid_argument("pool must be non-empty");
  double q = 1.0;
  for (PatientIndex i : pool) {
    if (i >= static_cast<std::size_t>(marginals.size())) {
      throw InvalidIndexError("patient index out of range");
    }
    q *= 1.0 - marginals[static_cast<Eigen::Index>(i)];
  }
  return q;
}

CorrectedNegativeProb chi_corrected_pool_negative_prob(
    const Eigen::Ref<const Eigen::VectorXd>& marginals, double chi,
    std::span<const PatientIndex> pool) {
  if (pool.size() != 2) throw std::invalid_argument("susceptibility correction needs a pair");
  const double raw = chi + onebody_pool_negative_prob(marginals, pool);
  CorrectedNegativeProb out;
  out.value = std::clamp(raw, 0.0, 1.0);
  out.clipped = out.value != raw;
  return out;
}

namespace {

constexpr std::size_t kNoPartner = std::numeric_limits<std::size_t>::max();

struct Candidate {
  PatientIndex first = 0;
  std::size_t second = kNoPartner;

  Pool pool() const { return second == kNoPartner ? Pool{first} : Pool{first, second}; }

  // Lexicographic order on the sorted index lists.
  friend bool operator<(const Candidate& a, const Candidate& b) {
    if (a.first != b.first) return a.first < b.first;
    if (a.second == b.second) return false;
    if (a.second == kNoPartner) return true;
    if (b.second == kNoPartner) return false;
    return a.second < b.second;
  }
};

struct Deferred {
  double lower_bound;
  Candidate candidate;
};

// Running argmin with the tie policy applied.
class BestTracker {
 public:
  explicit BestTracker(TieBreak tie) : tie_(tie) {}

  double distance() const { return best_; }
  bool empty() const { return tied_.empty(); }

  void offer(double d, const Candidate& c) {
    if (d < best_) {
      best_ = d;
      tied_.assign(1, c);
    } else if (d == best_) {
      if (tie_ == TieBreak::random) {
        tied_.push_back(c);
      } else if (c < tied_.front()) {
        tied_.front() = c;
      }
    }
  }

  Candidate pick(Rng& rng) {
    if (tie_ == TieBreak::random && tied_.size() > 1) {
      std::sort(tied_.begin(), tied_.end());
      std::uniform_int_distribution<std::size_t> u(0, tied_.size() - 1);
      return tied_[u(rng)];
    }
    return tied_.front();
  }

 private:
  TieBreak tie_;
  double best_ = std::numeric_limits<double>::infinity();
  std::vector<Candidate> tied_;
};

}  // namespace

Pool select_next_pool(const Eigen::Ref<const Eigen::VectorXd>& marginals, const PoolSpace& space,
                      const NoiseModel& noise, const SelectionPolicy& policy,
                      const SusceptibilitySource& chi, Rng& rng, SelectionStats* stats) {
  const double target = q_star(noise);
  const auto n = static_cast<std::size_t>(marginals.size());
  const bool pairs = space.kind == PoolSpaceKind::up_to_pairs;
  const bool corrected = pairs && policy.use_susceptibility;
  if (corrected && !chi) {
    throw std::invalid_argument("susceptibility-corrected selection needs a chi source");
  }

  auto excluded = [&](const Candidate& c) {
    return policy.exclude_tested && !space.exclusions.empty() && space.exclusions.count(c.pool()) != 0;
  };
  auto theta = [&](std::size_t i) { return marginals[static_cast<Eigen::Index>(i)]; };

  SelectionStats local;
  BestTracker best(policy.tie_break);
  std::vector<Deferred> deferred;

  for (std::size_t i = 0; i < n; ++i) {
    const double ti = theta(i);
    const Candidate single{i, kNoPartner};
    const double d1 = std::abs((1.0 - ti) - target);
    ++local.candidates_scored;
    if (d1 <= best.distance() && !excluded(single)) best.offer(d1, single);
    if (!pairs) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double tj = theta(j);
      const Candidate pair{i, j};
      if (corrected) {
        // Any consistent chi places q in [1 - ti - tj, 1 - min(ti, tj)].
        const double lo = std::clamp(1.0 - ti - tj, 0.0, 1.0);
        const double hi = std::clamp(1.0 - std::min(ti, tj), 0.0, 1.0);
        const double bound = target < lo ? lo - target : (target > hi ? target - hi : 0.0);
        deferred.push_back({bound, pair});
        continue;
      }
      ++local.candidates_scored;
      const double d2 = std::abs((1.0 - ti) * (1.0 - tj) - target);
      if (d2 <= best.distance() && !excluded(pair)) best.offer(d2, pair);
    }
  }

  if (!deferred.empty()) {
    std::stable_sort(deferred.begin(), deferred.end(),
                     [](const Deferred& a, const Deferred& b) { return a.lower_bound < b.lower_bound; });
    constexpr double kSlack = 1e-9;
    for (const Deferred& item : deferred) {
      if (item.lower_bound > best.distance() + kSlack) break;
      if (excluded(item.candidate)) continue;
      const Pool pool = item.candidate.pool();
      const CorrectedNegativeProb q =
          chi_corrected_pool_negative_prob(marginals, chi(pool[0], pool[1]), pool);
      ++local.candidates_scored;
      local.clipped += q.clipped ? 1 : 0;
      best.offer(std::abs(q.value - target), item.candidate);
    }
  }

  if (stats != nullptr) *stats = local;
  if (best.empty()) {
    throw EmptyCandidateSetError("every candidate pool is excluded");
  }
  return best.pick(rng).pool();
}

ClampedSusceptibilities::ClampedSusceptibilities(const PoolingDesign& design,
                                                 std::span<const std::uint8_t> outcomes,
                                                 const NoiseModel& noise, double rho,
                                                 const BPConfig& config, const BeliefState& base)
    : design_(design),
      outcomes_(outcomes),
      noise_(noise),
      rho_(rho),
      config_(config),
      base_(base) {}

double ClampedSusceptibilities::operator()(PatientIndex i, PatientIndex j) {
  if (i == j) throw std::invalid_argument("susceptibility requires i != j");
  const double ti = base_.marginals[static_cast<Eigen::Index>(i)];
  const double tj = base_.marginals[static_cast<Eigen::Index>(j)];
  const bool first = ti > tj || (ti == tj && i < j);
  const PatientIndex a = first ? i : j;
  const PatientIndex b = first ? j : i;
  auto it = cache_.find(a);
  if (it == cache_.end()) {
    BeliefState clamped = run_bp(design_, outcomes_, noise_, rho_, config_, ClampSet{{a}}, &base_);
    if (!clamped.converged) ++unconverged_;
    it = cache_.emplace(a, std::move(clamped.marginals)).first;
  }
  const double ta = base_.marginals[static_cast<Eigen::Index>(a)];
  const double tb = base_.marginals[static_cast<Eigen::Index>(b)];
  return ta * it->second[static_cast<Eigen::Index>(b)] - ta * tb;
}

}  // namespace activepool
