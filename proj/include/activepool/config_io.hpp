#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "activepool/graph.hpp"
#include "activepool/harness.hpp"

namespace activepool {

/// {"n_patients": N, "pools": [[i, ...], ...]}
nlohmann::json design_to_json(const PoolingDesign& design);
PoolingDesign design_from_json(const nlohmann::json& j);

/// Experiment config keys mirror ExperimentConfig:
///
///   n_patients, m_initial, m_adaptive, pool_size_initial, rho,
///   noise: {p_tp, p_fp}, strategy,
///   bp: {max_iterations, tolerance, damping, fallback_damping, clamp_floor},
///   policy: {exclude_tested, tie_break: "lowest-lexicographic" | "random"},
///   replications, seed, random_block_design, initial_design (path)
///
/// Missing keys keep the ExperimentConfig defaults. Unknown keys are errors.
/// Parsing does not call ExperimentConfig::validate().
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Cartesian expansion of a grid file. Any scalar leaf may be replaced by
/// an array of values; axes are expanded in document order of the keys
/// (nlohmann orders object keys alphabetically), last axis fastest.
std::vector<ExperimentConfig> expand_grid(const nlohmann::json& grid);

nlohmann::json trial_to_json(const TrialResult& trial);
nlohmann::json sweep_row_to_json(const SweepRow& row);

nlohmann::json read_json_file(const std::string& path);

}  // namespace activepool
