#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "activepool/active.hpp"
#include "activepool/bp.hpp"
#include "activepool/graph.hpp"
#include "activepool/model.hpp"
#include "activepool/random.hpp"

namespace activepool {

enum class Strategy {
  random,
  active_p1,
  active_p2,
  active_p2_chi,
};

std::string_view to_string(Strategy s);
/// Accepts "random", "active-P1", "active-P2", "active-P2-chi".
Strategy parse_strategy(std::string_view name);

struct ExperimentConfig {
  std::size_t n_patients = 1000;
  std::size_t m_initial = 300;
  std::size_t m_adaptive = 100;
  std::size_t pool_size_initial = 10;
  double rho = 0.02;
  NoiseModel noise{};
  Strategy strategy = Strategy::active_p1;
  BPConfig bp{};
  SelectionPolicy policy{};
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  /// Random strategy only: when pool_size_initial * m_adaptive is divisible
  /// by n_patients, draw the adaptive block as one doubly-regular design
  /// instead of independent uniform pools.
  bool random_block_design = false;
  /// Fixed initial-stage design shared by all replicates instead of a fresh
  /// random one per replicate.
  std::optional<PoolingDesign> initial_design;

  std::size_t total_tests() const { return m_initial + m_adaptive; }
  double alpha() const {
    return static_cast<double>(total_tests()) / static_cast<double>(n_patients);
  }
  /// Throws std::invalid_argument on inconsistent fields.
  void validate() const;
};

/// Undefined rates (empty denominator) are std::nullopt.
struct Rates {
  std::optional<double> tp;
  std::optional<double> fp;
};

Rates compute_tp_fp(std::span<const std::uint8_t> x0, std::span<const std::uint8_t> x_hat);

struct TrajectoryPoint {
  /// Number of tests whose outcomes the estimate uses.
  std::size_t tests = 0;
  std::optional<double> tp;
  std::optional<double> fp;
};

struct TrialResult {
  std::optional<double> tp_rate;
  std::optional<double> fp_rate;
  /// m_adaptive + 1 points; the first is the initial-stage estimate.
  std::vector<TrajectoryPoint> trajectory;
  std::size_t bp_convergence_failures = 0;
  std::size_t clamped_bp_failures = 0;
  std::size_t clipped_corrections = 0;
  std::size_t realized_infected = 0;
  GroundTruth truth;
  PoolingDesign design;
  OutcomeRecord outcomes;
};

/// One run of the two-stage procedure: ground truth, initial design and
/// outcomes, BP, then m_adaptive rounds of (choose pool, test, BP). The
/// stream is consumed in that order, so strategies sharing a stream share
/// the whole initial stage.
TrialResult run_trial(const ExperimentConfig& config, Rng& rng);

/// Mean and standard error of the defined values in a sample.
struct Summary {
  std::optional<double> mean;
  std::optional<double> std_error;
  std::size_t count = 0;
  std::size_t undefined = 0;
};

Summary summarize(std::span<const std::optional<double>> values);

struct SweepRow {
  ExperimentConfig config;
  std::size_t replications = 0;
  Summary tp;
  Summary fp;
  std::size_t bp_failures = 0;
  double seconds = 0.0;
  /// Non-empty when the grid point could not be run.
  std::string error;
};

struct ReplicatedResult {
  SweepRow row;
  std::vector<TrialResult> trials;
};

/// Per-step summaries across replicates, aligned with the trajectories.
struct TrajectorySummary {
  std::vector<std::size_t> tests;
  std::vector<Summary> tp;
  std::vector<Summary> fp;
};

TrajectorySummary summarize_trajectories(std::span<const TrialResult> trials);

/// Replicate r runs on make_substream(seed, r); the strategy does not enter
/// the stream so strategies are paired. Up to `threads` replicates run at
/// once; results are reduced in replicate order.
ReplicatedResult run_replicated(const ExperimentConfig& config, std::size_t threads = 1);

/// One row per grid point, in grid order. Failing points carry `error` and
/// the sweep continues.
std::vector<SweepRow> sweep(std::span<const ExperimentConfig> grid, std::size_t threads = 1);

inline constexpr std::string_view kSweepCsvHeader =
    "strategy,N,M_ini,M_ada,N_G,rho,p_tp,p_fp,replications,mean_tp,se_tp,mean_fp,se_fp,"
    "undefined_tp_count,bp_failures";

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace activepool
