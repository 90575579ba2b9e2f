#include "activepool/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <stdexcept>
#include <thread>

namespace activepool {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::random: return "random";
    case Strategy::active_p1: return "active-P1";
    case Strategy::active_p2: return "active-P2";
    case Strategy::active_p2_chi: return "active-P2-chi";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::random, Strategy::active_p1, Strategy::active_p2,
                     Strategy::active_p2_chi}) {
    if (name == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  if (n_patients == 0 || m_initial == 0 || pool_size_initial == 0 || replications == 0) {
    throw std::invalid_argument("n_patients, m_initial, pool_size_initial and replications must be positive");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
  noise.validate();
  bp.validate();
  if (initial_design) {
    if (initial_design->n_patients() != n_patients || initial_design->n_pools() != m_initial) {
      throw std::invalid_argument("initial design does not match n_patients / m_initial");
    }
  } else {
    InitialDesignSpec{n_patients, m_initial, pool_size_initial}.patient_degree();
  }
}

Rates compute_tp_fp(std::span<const std::uint8_t> x0, std::span<const std::uint8_t> x_hat) {
  if (x0.size() != x_hat.size()) throw std::invalid_argument("state vectors differ in length");
  std::size_t infected = 0, hits = 0, healthy = 0, false_alarms = 0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (x0[i] != 0) {
      ++infected;
      hits += x_hat[i] != 0 ? 1 : 0;
    } else {
      ++healthy;
      false_alarms += x_hat[i] != 0 ? 1 : 0;
    }
  }
  Rates r;
  if (infected > 0) r.tp = static_cast<double>(hits) / static_cast<double>(infected);
  if (healthy > 0) r.fp = static_cast<double>(false_alarms) / static_cast<double>(healthy);
  return r;
}

namespace {

void record(TrialResult& result, const GroundTruth& truth, const BeliefState& state,
            std::size_t tests) {
  const Rates r = compute_tp_fp(truth.x0, map_estimate(state));
  result.trajectory.push_back({tests, r.tp, r.fp});
}

void add_exclusion(PoolSpace& space, std::span<const PatientIndex> pool) {
  if (pool.size() <= 2) space.exclusions.emplace(pool.begin(), pool.end());
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& config, Rng& rng) {
  config.validate();
  // BP needs an interior prior; rho = 0 or 1 is pulled in by the clip floor.
  const double bp_rho = std::clamp(config.rho, config.bp.clamp_floor, 1.0 - config.bp.clamp_floor);

  TrialResult result;
  result.truth = generate_ground_truth(config.n_patients, config.rho, rng);
  result.realized_infected = result.truth.n_infected;
  result.design = config.initial_design
                      ? *config.initial_design
                      : generate_random_design(
                            {config.n_patients, config.m_initial, config.pool_size_initial}, rng);
  result.outcomes = sample_outcome_vector(result.truth, result.design, config.noise, rng);

  auto infer = [&] {
    BeliefState s = run_bp(result.design, result.outcomes, config.noise, bp_rho, config.bp);
    if (!s.converged) ++result.bp_convergence_failures;
    return s;
  };

  BeliefState state = infer();
  result.trajectory.reserve(config.m_adaptive + 1);
  record(result, result.truth, state, result.design.n_pools());

  PoolSpace space;
  space.kind = config.strategy == Strategy::active_p1 ? PoolSpaceKind::singletons
                                                      : PoolSpaceKind::up_to_pairs;
  SelectionPolicy policy = config.policy;
  policy.use_susceptibility = config.strategy == Strategy::active_p2_chi;
  if (policy.exclude_tested) {
    for (const Pool& p : result.design.pools()) add_exclusion(space, p);
  }

  std::vector<Pool> random_block;
  if (config.strategy == Strategy::random && config.random_block_design && config.m_adaptive > 0 &&
      (config.pool_size_initial * config.m_adaptive) % config.n_patients == 0) {
    random_block = generate_random_design(
                       {config.n_patients, config.m_adaptive, config.pool_size_initial}, rng)
                       .pools();
  }

  for (std::size_t step = 0; step < config.m_adaptive; ++step) {
    Pool pool;
    if (config.strategy == Strategy::random) {
      pool = random_block.empty()
                 ? sample_uniform_pool(config.n_patients, config.pool_size_initial, rng)
                 : random_block[step];
    } else if (policy.use_susceptibility) {
      ClampedSusceptibilities chi(result.design, result.outcomes, config.noise, bp_rho, config.bp,
                                  state);
      SelectionStats stats;
      pool = select_next_pool(state.marginals, space, config.noise, policy, std::ref(chi), rng,
                              &stats);
      result.clamped_bp_failures += chi.unconverged_runs();
      result.clipped_corrections += stats.clipped;
    } else {
      pool = select_next_pool(state.marginals, space, config.noise, policy, {}, rng);
    }
    result.outcomes.push_back(sample_test_outcome(result.truth, pool, config.noise, rng));
    if (policy.exclude_tested) add_exclusion(space, pool);
    result.design.append(std::move(pool));
    state = infer();
    record(result, result.truth, state, result.design.n_pools());
  }

  result.tp_rate = result.trajectory.back().tp;
  result.fp_rate = result.trajectory.back().fp;
  return result;
}

Summary summarize(std::span<const std::optional<double>> values) {
  Summary s;
  double sum = 0.0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++s.count;
    } else {
      ++s.undefined;
    }
  }
  if (s.count == 0) return s;
  const double mean = sum / static_cast<double>(s.count);
  s.mean = mean;
  if (s.count >= 2) {
    double ss = 0.0;
    for (const auto& v : values) {
      if (v) ss += (*v - mean) * (*v - mean);
    }
    const double var = ss / static_cast<double>(s.count - 1);
    s.std_error = std::sqrt(var / static_cast<double>(s.count));
  }
  return s;
}

TrajectorySummary summarize_trajectories(std::span<const TrialResult> trials) {
  TrajectorySummary out;
  if (trials.empty()) return out;
  const std::size_t steps = trials.front().trajectory.size();
  for (const TrialResult& t : trials) {
    if (t.trajectory.size() != steps) {
      throw std::invalid_argument("trajectories differ in length");
    }
  }
  std::vector<std::optional<double>> tp(trials.size());
  std::vector<std::optional<double>> fp(trials.size());
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t r = 0; r < trials.size(); ++r) {
      tp[r] = trials[r].trajectory[k].tp;
      fp[r] = trials[r].trajectory[k].fp;
    }
    out.tests.push_back(trials.front().trajectory[k].tests);
    out.tp.push_back(summarize(tp));
    out.fp.push_back(summarize(fp));
  }
  return out;
}

ReplicatedResult run_replicated(const ExperimentConfig& config, std::size_t threads) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = config.replications;
  std::vector<TrialResult> trials(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t r = next++; r < n; r = next++) {
      try {
        Rng rng = make_substream(config.seed, r);
        trials[r] = run_trial(config, rng);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, n);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ReplicatedResult out;
  out.row.config = config;
  out.row.replications = n;
  std::vector<std::optional<double>> tp;
  std::vector<std::optional<double>> fp;
  for (const TrialResult& t : trials) {
    tp.push_back(t.tp_rate);
    fp.push_back(t.fp_rate);
    out.row.bp_failures += t.bp_convergence_failures;
  }
  out.row.tp = summarize(tp);
  out.row.fp = summarize(fp);
  out.row.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.trials = std::move(trials);
  return out;
}

std::vector<SweepRow> sweep(std::span<const ExperimentConfig> grid, std::size_t threads) {
  if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (const ExperimentConfig& config : grid) {
    try {
      rows.push_back(run_replicated(config, threads).row);
    } catch (const std::exception& e) {
      SweepRow row;
      row.config = config;
      row.error = e.what();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); }

}  // namespace

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << kSweepCsvHeader << '\n';
  for (const SweepRow& row : rows) {
    const ExperimentConfig& c = row.config;
    out << to_string(c.strategy) << ',' << c.n_patients << ',' << c.m_initial << ','
        << c.m_adaptive << ',' << c.pool_size_initial << ',' << fmt(c.rho) << ','
        << fmt(c.noise.p_tp) << ',' << fmt(c.noise.p_fp) << ',' << row.replications << ','
        << fmt(row.tp.mean) << ',' << fmt(row.tp.std_error) << ',' << fmt(row.fp.mean) << ','
        << fmt(row.fp.std_error) << ',' << row.tp.undefined << ',' << row.bp_failures << '\n';
  }
}

}  // namespace activepool
