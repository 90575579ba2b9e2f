// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "activepool/active.hpp"
#include "activepool/bp.hpp"
#include "activepool/harness.hpp"
#include "activepool/oracle.hpp"

using namespace activepool;

namespace {

constexpr std::uint64_t kSeed = 1;
constexpr std::size_t kReplicates = 50;

// Tolerances and thresholds.
constexpr double kTreeTolerance = 1e-6;
constexpr double kTreeSeconds = 60.0;
constexpr double kLoopyMedian = 1e-2;
constexpr double kLoopyMapAgreement = 0.95;
constexpr double kEpsilonMax = 1e-2;
constexpr double kEpsilonSeconds = 600.0;
constexpr double kHalfTolerance = 1e-12;
constexpr double kTrendSeconds = 1800.0;
constexpr double kTpTarget = 0.9;
constexpr double kStandardErrors = 2.0;
constexpr double kFpCeiling = 0.05;
constexpr std::size_t kActiveBudget = 360;
constexpr std::size_t kRandomBudget = 460;
constexpr std::size_t kBudgetGap = 100;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool passed;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

OutcomeRecord draw_outcomes(const PoolingDesign& d, const GroundTruth& g, const NoiseModel& noise, Rng& rng) {
  return sample_outcome_vector(g, d, noise, rng);
}

// 1. Forests of disjoint pools: BP is exact.
Outcome tree_equivalence() {
  const auto t0 = Clock::now();
  Rng rng = make_substream(kSeed, 101);
  double worst = 0.0;
  std::size_t unconverged = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    std::vector<PatientIndex> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    PoolingDesign d(n);
    std::size_t next = 0;
    while (next < n) {
      const std::size_t size = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
      Pool p;
      for (std::size_t t = 0; t < size && next < n; ++t) p.push_back(order[next++]);
      if (uniform01(rng) < 0.8) d.append(p);  // some patients stay untested
    }
    const NoiseModel noise{0.5 + 0.5 * uniform01(rng), 0.45 * uniform01(rng)};
    const double rho = 0.01 + 0.48 * uniform01(rng);
    const GroundTruth g = generate_ground_truth(n, rho, rng);
    const OutcomeRecord y = draw_outcomes(d, g, noise, rng);
    const BeliefState s = run_bp(d, y, noise, rho);
    unconverged += !s.converged;
    const ExactPosterior exact = exact_posterior(d, y, noise, rho);
    worst = std::max(worst, (s.marginals - exact.marginals).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst <= kTreeTolerance && secs < kTreeSeconds && unconverged == 0,
          "max |theta_bp - theta_exact| = " + fmt(worst) + " (tol " + fmt(kTreeTolerance) +
              "), unconverged " + std::to_string(unconverged) + ", " + fmt(secs) + " s"};
}

// 2. Loopy instances: BP stays close to the exact posterior.
Outcome loopy_proximity() {
  Rng rng = make_substream(kSeed, 102);
  const NoiseModel noise{0.95, 0.05};
  const double rho = 0.1;
  std::vector<double> deviations;
  std::size_t agree = 0, total = 0, unconverged = 0;
  for (int k = 0; k < 100; ++k) {
    PoolingDesign d(12);
    for (int mu = 0; mu < 8; ++mu) d.append(sample_uniform_pool(12, 4, rng));
    const GroundTruth g = generate_ground_truth(12, rho, rng);
    const OutcomeRecord y = draw_outcomes(d, g, noise, rng);
    const BeliefState s = run_bp(d, y, noise, rho);
    unconverged += !s.converged;
    const ExactPosterior exact = exact_posterior(d, y, noise, rho);
    for (Eigen::Index i = 0; i < 12; ++i) {
      deviations.push_back(std::abs(s.marginals[i] - exact.marginals[i]));
      agree += (s.marginals[i] > 0.5) == (exact.marginals[i] > 0.5);
      ++total;
    }
  }
  const double med = median(deviations);
  const double agreement = static_cast<double>(agree) / static_cast<double>(total);
  return {med < kLoopyMedian && agreement >= kLoopyMapAgreement,
          "median |dev| = " + fmt(med) + " (< " + fmt(kLoopyMedian) + "), max |dev| = " +
              fmt(*std::max_element(deviations.begin(), deviations.end())) + ", MAP agreement " +
              fmt(agreement) + " (>= " + fmt(kLoopyMapAgreement) + "), unconverged " +
              std::to_string(unconverged)};
}

// 3. Clamped-BP susceptibilities against exact enumeration.
Outcome susceptibility_epsilon() {
  const auto t0 = Clock::now();
  const std::size_t n = 20, pool_size = 10;
  const double rho = 0.1;
  bool ok = true;
  std::ostringstream detail;
  std::uint64_t stream = 300;
  for (double alpha : {0.5, 1.0}) {
    for (const NoiseModel noise : {NoiseModel{0.95, 0.05}, NoiseModel{0.9, 0.1}}) {
      Rng rng = make_substream(kSeed, stream++);
      const auto m = static_cast<std::size_t>(std::lround(alpha * static_cast<double>(n)));
      double sum = 0.0;
      for (int r = 0; r < 20; ++r) {
        const GroundTruth g = generate_ground_truth(n, rho, rng);
        const PoolingDesign d = generate_random_design({n, m, pool_size}, rng);
        const OutcomeRecord y = draw_outcomes(d, g, noise, rng);
        const BeliefState base = run_bp(d, y, noise, rho);
        const Eigen::MatrixXd chi_bp = susceptibility_matrix(d, y, noise, rho, {}, base);
        const ExactPosterior exact = exact_posterior(d, y, noise, rho);
        // Exact covariance computed here from the pair expectations.
        Eigen::MatrixXd chi_exact = exact.pair_expectations - exact.marginals * exact.marginals.transpose();
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j) {
            const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
            sq += (chi_exact(a, b) - chi_bp(a, b)) * (chi_exact(a, b) - chi_bp(a, b));
          }
        sum += sq / (static_cast<double>(n * (n - 1)) / 2.0);
      }
      const double eps = sum / 20.0;
      ok = ok && eps <= kEpsilonMax;
      detail << "alpha=" << alpha << " (" << noise.p_tp << "," << noise.p_fp << "): " << fmt(eps) << "; ";
    }
  }
  const double secs = seconds_since(t0);
  detail << "bound " << fmt(kEpsilonMax) << ", " << fmt(secs) << " s";
  return {ok && secs < kEpsilonSeconds, "mean epsilon " + detail.str()};
}

// 4. Closed-form identities, checked against expressions written out here.
Outcome analytic_identities() {
  Rng rng = make_substream(kSeed, 104);
  auto h = [](double p) {
    return (p > 0 ? -p * std::log(p) : 0.0) + (p < 1 ? -(1 - p) * std::log(1 - p) : 0.0);
  };
  auto entropy_of = [&](double q, const NoiseModel& nm) { return h(nm.p_tp * (1 - q) + nm.p_fp * q); };
  auto random_noise = [&] {
    return NoiseModel{0.5 + 0.5 * uniform01(rng), 0.5 * uniform01(rng) * (1 - 1e-9)};
  };

  double worst_half = 0.0;
  std::size_t grid_failures = 0;
  for (int k = 0; k < 1000; ++k) {
    const NoiseModel nm = random_noise();
    const double qs = q_star(nm);
    worst_half = std::max(worst_half, std::abs(predictive_probability(qs, nm) - 0.5));
    if (k % 10 == 0) {
      const double top = predictive_entropy(qs, nm);
      for (int t = 0; t <= 10000; ++t) {
        const double q = t * 1e-4;
        if (predictive_entropy(q, nm) > top + 1e-15 ||
            std::abs(predictive_entropy(q, nm) - entropy_of(q, nm)) > 1e-12)
          ++grid_failures;
      }
    }
  }

  std::size_t disagreements = 0;
  for (int k = 0; k < 1000; ++k) {
    const NoiseModel nm = random_noise();
    const std::size_t n = 1 + k % 15;
    Eigen::VectorXd theta(static_cast<Eigen::Index>(n));
    for (auto& t : theta) t = (k % 4 == 0) ? std::round(uniform01(rng) * 8) / 8 : uniform01(rng);
    const bool pairs = k % 2 == 1;
    // Brute-force argmax entropy with its tie set.
    std::vector<std::pair<Pool, double>> scored;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = static_cast<Eigen::Index>(i);
      scored.push_back({{i}, entropy_of(1 - theta[a], nm)});
      if (pairs)
        for (std::size_t j = i + 1; j < n; ++j)
          scored.push_back({{i, j}, entropy_of((1 - theta[a]) * (1 - theta[static_cast<Eigen::Index>(j)]), nm)});
    }
    double best = -1.0;
    for (const auto& s : scored) best = std::max(best, s.second);
    Rng unused = make_substream(0, 0);
    const Pool chosen = select_next_pool(theta, {pairs ? PoolSpaceKind::up_to_pairs : PoolSpaceKind::singletons, {}},
                                         nm, {}, [](PatientIndex, PatientIndex) { return 0.0; }, unused);
    const auto it = std::find_if(scored.begin(), scored.end(), [&](const auto& s) { return s.first == chosen; });
    if (it == scored.end() || it->second < best - kHalfTolerance) ++disagreements;
  }
  return {worst_half <= kHalfTolerance && grid_failures == 0 && disagreements == 0,
          "max |P(Y=1 | q*) - 0.5| = " + fmt(worst_half) + ", entropy grid violations " +
              std::to_string(grid_failures) + ", selection disagreements " + std::to_string(disagreements) +
              "/1000"};
}

ExperimentConfig base_config(std::size_t n, std::size_t m_ini, std::size_t m_ada, double rho, NoiseModel noise,
                             Strategy s) {
  ExperimentConfig c;
  c.n_patients = n;
  c.m_initial = m_ini;
  c.m_adaptive = m_ada;
  c.pool_size_initial = 10;
  c.rho = rho;
  c.noise = noise;
  c.strategy = s;
  c.replications = kReplicates;
  c.seed = kSeed;
  return c;
}

double lower(const Summary& s) { return s.mean.value_or(-1) - kStandardErrors * s.std_error.value_or(0); }
double upper(const Summary& s) { return s.mean.value_or(2) + kStandardErrors * s.std_error.value_or(0); }

std::string describe(const char* name, const SweepRow& r) {
  return std::string(name) + " TP " + fmt(r.tp.mean) + "+-" + fmt(r.tp.std_error) + " FP " + fmt(r.fp.mean);
}

// 5. Active pooling beats random pooling at low prevalence.
Outcome low_prevalence_trend() {
  const auto t0 = Clock::now();
  const NoiseModel noise{0.9, 0.05};
  const SweepRow random = run_replicated(base_config(1000, 300, 100, 0.01, noise, Strategy::random)).row;
  const SweepRow p1 = run_replicated(base_config(1000, 300, 100, 0.01, noise, Strategy::active_p1)).row;
  const SweepRow p2 = run_replicated(base_config(1000, 300, 100, 0.01, noise, Strategy::active_p2)).row;
  const double secs = seconds_since(t0);
  const bool tp_ok = lower(p1.tp) > kTpTarget && lower(p2.tp) > kTpTarget && upper(random.tp) < kTpTarget;
  const double fp_random = random.fp.mean.value_or(1);
  const bool fp_ok = p1.fp.mean.value_or(1) < fp_random && p2.fp.mean.value_or(1) < fp_random &&
                     fp_random < kFpCeiling;
  return {tp_ok && fp_ok && secs < kTrendSeconds,
          describe("random", random) + "; " + describe("P1", p1) + "; " + describe("P2", p2) +
              "; TP margins " + (tp_ok ? "met" : "not met") + ", FP ordering " + (fp_ok ? "met" : "not met") +
              ", " + fmt(secs) + " s"};
}

// First number of tests at which the mean TP exceeds the target.
std::optional<std::size_t> crossing(const TrajectorySummary& t) {
  for (std::size_t k = 0; k < t.tests.size(); ++k)
    if (t.tp[k].mean && *t.tp[k].mean > kTpTarget) return t.tests[k];
  return std::nullopt;
}

// 6. Test budget needed to reach TP > 0.9.
Outcome test_budget() {
  const NoiseModel noise{0.9, 0.05};
  const ReplicatedResult active = run_replicated(base_config(1000, 300, 100, 0.02, noise, Strategy::active_p2));
  const ReplicatedResult random = run_replicated(base_config(1000, 300, 300, 0.02, noise, Strategy::random));
  const auto a = crossing(summarize_trajectories(active.trials));
  const auto r = crossing(summarize_trajectories(random.trials));
  // A curve that never crosses needs more tests than were run.
  const std::size_t a_budget = a.value_or(std::numeric_limits<std::size_t>::max());
  const std::size_t r_budget = r.value_or(std::numeric_limits<std::size_t>::max());
  const bool ok = a_budget <= kActiveBudget && r_budget >= kRandomBudget &&
                  (r_budget >= a_budget && r_budget - a_budget >= kBudgetGap);
  return {ok, "active-P2 crosses at M = " + (a ? std::to_string(*a) : std::string("never (<= 400)")) +
                  " (<= " + std::to_string(kActiveBudget) + "), random at M = " +
                  (r ? std::to_string(*r) : std::string("never (<= 600)")) + " (>= " +
                  std::to_string(kRandomBudget) + "), required gap " + std::to_string(kBudgetGap)};
}

// 7. Susceptibility-corrected pairs are not worse than one-body pairs.
Outcome correction_noninferiority() {
  const NoiseModel noise{0.9, 0.1};
  const ReplicatedResult plain = run_replicated(base_config(200, 80, 40, 0.05, noise, Strategy::active_p2));
  const ReplicatedResult corrected = run_replicated(base_config(200, 80, 40, 0.05, noise, Strategy::active_p2_chi));
  const TrajectorySummary p = summarize_trajectories(plain.trials);
  const TrajectorySummary c = summarize_trajectories(corrected.trials);
  bool ok = true;
  double worst = std::numeric_limits<double>::infinity();
  std::size_t worst_at = 0;
  for (std::size_t k = 0; k < p.tests.size(); ++k) {
    const double slack = c.tp[k].mean.value_or(0) - (p.tp[k].mean.value_or(1) - p.tp[k].std_error.value_or(0));
    if (slack < worst) {
      worst = slack;
      worst_at = p.tests[k];
    }
    ok = ok && slack >= 0.0;
  }
  std::size_t clipped = 0, clamped_failures = 0;
  for (const TrialResult& t : corrected.trials) {
    clipped += t.clipped_corrections;
    clamped_failures += t.clamped_bp_failures;
  }
  return {ok, "final TP with chi " + fmt(c.tp.back().mean) + " vs without " + fmt(p.tp.back().mean) + "+-" +
                  fmt(p.tp.back().std_error) + "; final gap " +
                  fmt(c.tp.back().mean.value_or(0) - p.tp.back().mean.value_or(0)) +
                  "; tightest margin " + fmt(worst) + " at M = " + std::to_string(worst_at) + "; clipped " +
                  std::to_string(clipped) + ", unconverged clamped runs " + std::to_string(clamped_failures)};
}

// 8. Range of false-positive rates for which TP exceeds p_tp.
Outcome error_robustness() {
  std::vector<double> active_set, random_set;
  std::ostringstream detail;
  for (double p_fp : {0.02, 0.05, 0.1}) {
    const NoiseModel noise{0.95, p_fp};
    const SweepRow a = run_replicated(base_config(1000, 300, 100, 0.02, noise, Strategy::active_p2)).row;
    const SweepRow r = run_replicated(base_config(1000, 300, 100, 0.02, noise, Strategy::random)).row;
    if (a.tp.mean.value_or(0) > noise.p_tp) active_set.push_back(p_fp);
    if (r.tp.mean.value_or(0) > noise.p_tp) random_set.push_back(p_fp);
    detail << "p_fp=" << p_fp << ": P2 " << fmt(a.tp.mean) << ", random " << fmt(r.tp.mean) << "; ";
  }
  const bool superset = std::includes(active_set.begin(), active_set.end(), random_set.begin(), random_set.end());
  const bool ok = superset && active_set.size() > random_set.size();
  detail << "TP > p_tp for " << active_set.size() << " (P2) vs " << random_set.size() << " (random) values";
  return {ok, detail.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 tree oracle equivalence", tree_equivalence},
      {"2 loopy oracle proximity", loopy_proximity},
      {"3 susceptibility epsilon", susceptibility_epsilon},
      {"4 analytic identities", analytic_identities},
      {"5 low-prevalence TP/FP trend", low_prevalence_trend},
      {"6 test budget at TP 0.9", test_budget},
      {"7 chi-corrected non-inferiority", correction_noninferiority},
      {"8 false-positive robustness", error_robustness},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %s: %s\n", o.passed ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.passed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
