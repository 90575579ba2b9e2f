#include "activepool/validation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "activepool/active.hpp"
#include "activepool/oracle.hpp"

namespace activepool {

namespace {

// Every patient joins at most one pool; some join none.
PoolingDesign random_forest(std::size_t n, Rng& rng) {
  std::vector<PatientIndex> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  PoolingDesign design(n);
  std::uniform_int_distribution<std::size_t> size_draw(1, 4);
  std::size_t k = 0;
  while (k < n) {
    if (uniform01(rng) < 0.2) {  // leave this patient untested
      ++k;
      continue;
    }
    const std::size_t size = std::min(size_draw(rng), n - k);
    design.append(Pool(order.begin() + static_cast<std::ptrdiff_t>(k),
                       order.begin() + static_cast<std::ptrdiff_t>(k + size)));
    k += size;
  }
  return design;
}

}  // namespace

BpValidationResult validate_bp(const BpValidationSpec& spec) {
  if (spec.n_patients > kOracleMaxPatients) {
    throw OracleSizeError("validation instances exceed the enumeration cap of " +
                          std::to_string(kOracleMaxPatients) + " patients");
  }
  Rng rng = make_substream(spec.seed, 0);
  BpValidationResult out;
  std::vector<double> deviations;
  std::size_t agree = 0;

  for (std::size_t k = 0; k < spec.instances; ++k) {
    std::size_t n = spec.n_patients;
    double rho = spec.rho;
    NoiseModel noise = spec.noise;
    PoolingDesign design;
    if (spec.trees) {
      n = std::uniform_int_distribution<std::size_t>(1, spec.n_patients)(rng);
      rho = 0.02 + 0.38 * uniform01(rng);
      noise.p_tp = 0.5 + 0.5 * uniform01(rng);
      noise.p_fp = 0.45 * uniform01(rng);
      design = random_forest(n, rng);
    } else {
      design = PoolingDesign(n);
      for (std::size_t mu = 0; mu < spec.n_pools; ++mu) {
        design.append(sample_uniform_pool(n, spec.pool_size, rng));
      }
    }
    const GroundTruth truth = generate_ground_truth(n, rho, rng);
    const OutcomeRecord y = sample_outcome_vector(truth, design, noise, rng);

    const BeliefState bp = run_bp(design, y, noise, rho, spec.bp);
    const ExactPosterior exact = exact_posterior(design, y, noise, rho);
    if (!bp.converged) ++out.bp_unconverged;
    const BinaryVector bp_map = map_estimate(bp);
    const BinaryVector exact_map = map_estimate(exact.marginals);
    for (std::size_t i = 0; i < n; ++i) {
      deviations.push_back(std::abs(bp.marginals[static_cast<Eigen::Index>(i)] -
                                    exact.marginals[static_cast<Eigen::Index>(i)]));
      agree += bp_map[i] == exact_map[i] ? 1 : 0;
    }
    ++out.instances;
  }

  out.entries = deviations.size();
  if (deviations.empty()) return out;
  double sum = 0.0;
  for (double d : deviations) sum += d;
  out.mean_abs_deviation = sum / static_cast<double>(deviations.size());
  out.max_abs_deviation = *std::max_element(deviations.begin(), deviations.end());
  std::vector<double> sorted = deviations;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  out.median_abs_deviation = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  out.map_agreement = static_cast<double>(agree) / static_cast<double>(m);
  return out;
}

ChiValidationResult validate_chi(const ChiValidationSpec& spec) {
  if (spec.n_patients > kOracleMaxPatients) {
    throw OracleSizeError("validation instances exceed the enumeration cap of " +
                          std::to_string(kOracleMaxPatients) + " patients");
  }
  const auto m = static_cast<std::size_t>(std::llround(spec.alpha * static_cast<double>(spec.n_patients)));
  const InitialDesignSpec design_spec{spec.n_patients, m, spec.pool_size};
  design_spec.patient_degree();

  ChiValidationResult out;
  for (std::size_t r = 0; r < spec.realizations; ++r) {
    Rng rng = make_substream(spec.seed, r);
    const GroundTruth truth = generate_ground_truth(spec.n_patients, spec.rho, rng);
    const PoolingDesign design = generate_random_design(design_spec, rng);
    const OutcomeRecord y = sample_outcome_vector(truth, design, spec.noise, rng);

    const BeliefState base = run_bp(design, y, spec.noise, spec.rho, spec.bp);
    if (!base.converged) ++out.bp_unconverged;
    const Eigen::MatrixXd chi_bp = susceptibility_matrix(design, y, spec.noise, spec.rho, spec.bp, base);
    const Eigen::MatrixXd chi_exact =
        exact_susceptibility_matrix(exact_posterior(design, y, spec.noise, spec.rho));
    out.epsilon.push_back(epsilon_metric(chi_exact, chi_bp));
  }
  if (!out.epsilon.empty()) {
    double sum = 0.0;
    for (double e : out.epsilon) sum += e;
    out.mean_epsilon = sum / static_cast<double>(out.epsilon.size());
    out.max_epsilon = *std::max_element(out.epsilon.begin(), out.epsilon.end());
  }
  return out;
}

namespace {

NoiseModel random_noise(Rng& rng) {
  NoiseModel noise;
  noise.p_tp = 0.5 + 0.5 * uniform01(rng);
  noise.p_fp = 0.499 * uniform01(rng);
  return noise;
}

}  // namespace

std::vector<CheckResult> analytic_selftest(std::uint64_t seed) {
  std::vector<CheckResult> results;
  Rng rng = make_substream(seed, 0);

  {
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const NoiseModel noise = random_noise(rng);
      worst = std::max(worst, std::abs(predictive_probability(q_star(noise), noise) - 0.5));
    }
    std::ostringstream d;
    d << "max |P(Y=1|q*) - 0.5| = " << worst << " over 1000 noise models";
    results.push_back({"predictive probability at q* is 1/2", worst <= 1e-12, d.str()});
  }

  {
    bool ok = true;
    double worst_gap = 0.0;
    for (int k = 0; k < 100 && ok; ++k) {
      const NoiseModel noise = random_noise(rng);
      const double at_star = predictive_entropy(q_star(noise), noise);
      worst_gap = std::max(worst_gap, std::abs(at_star - std::log(2.0)));
      for (int g = 0; g <= 10000; ++g) {
        const double q = g / 10000.0;
        if (predictive_entropy(q, noise) > at_star + 1e-14) ok = false;
      }
    }
    ok = ok && worst_gap <= 1e-12;
    std::ostringstream d;
    d << "entropy at q* within " << worst_gap << " of ln 2; no grid point above it";
    results.push_back({"predictive entropy is maximal at q*", ok, d.str()});
  }

  {
    std::size_t mismatches = 0;
    for (int k = 0; k < 1000; ++k) {
      const NoiseModel noise = random_noise(rng);
      const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 15)(rng);
      Eigen::VectorXd theta(static_cast<Eigen::Index>(n));
      for (auto& t : theta) t = uniform01(rng);
      PoolSpace space;
      space.kind = k % 2 == 0 ? PoolSpaceKind::singletons : PoolSpaceKind::up_to_pairs;
      const Pool chosen = select_next_pool(theta, space, noise, SelectionPolicy{}, {}, rng);

      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        best = std::max(best, predictive_entropy(1.0 - theta[static_cast<Eigen::Index>(i)], noise));
        if (space.kind == PoolSpaceKind::singletons) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
          const Pool p{i, j};
          best = std::max(best, predictive_entropy(onebody_pool_negative_prob(theta, p), noise));
        }
      }
      const double got = predictive_entropy(onebody_pool_negative_prob(theta, chosen), noise);
      if (std::abs(got - best) > 1e-12) ++mismatches;
    }
    std::ostringstream d;
    d << mismatches << " of 1000 random candidate sets disagree";
    results.push_back({"argmin |q - q*| equals argmax entropy", mismatches == 0, d.str()});
  }
  return results;
}

}  // namespace activepool
