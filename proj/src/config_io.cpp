#include "activepool/config_io.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace activepool {

using nlohmann::json;

json design_to_json(const PoolingDesign& design) {
  json pools = json::array();
  for (const Pool& p : design.pools()) pools.push_back(p);
  return {{"n_patients", design.n_patients()}, {"pools", std::move(pools)}};
}

PoolingDesign design_from_json(const json& j) {
  if (!j.is_object() || !j.contains("n_patients") || !j.contains("pools")) {
    throw std::invalid_argument("design JSON needs \"n_patients\" and \"pools\"");
  }
  PoolingDesign design(j.at("n_patients").get<std::size_t>());
  for (const json& p : j.at("pools")) design.append(p.get<Pool>());
  return design;
}

namespace {

std::string_view to_string(TieBreak t) {
  return t == TieBreak::random ? "random" : "lowest-lexicographic";
}

TieBreak parse_tie_break(const std::string& s) {
  if (s == "lowest-lexicographic") return TieBreak::lowest_lexicographic;
  if (s == "random") return TieBreak::random;
  throw std::invalid_argument("unknown tie_break '" + s + "'");
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) {
      throw std::invalid_argument("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  json j = {
      {"n_patients", c.n_patients},
      {"m_initial", c.m_initial},
      {"m_adaptive", c.m_adaptive},
      {"pool_size_initial", c.pool_size_initial},
      {"rho", c.rho},
      {"noise", {{"p_tp", c.noise.p_tp}, {"p_fp", c.noise.p_fp}}},
      {"strategy", to_string(c.strategy)},
      {"bp",
       {{"max_iterations", c.bp.max_iterations},
        {"tolerance", c.bp.tolerance},
        {"damping", c.bp.damping},
        {"fallback_damping", c.bp.fallback_damping},
        {"clamp_floor", c.bp.clamp_floor}}},
      {"policy",
       {{"exclude_tested", c.policy.exclude_tested},
        {"tie_break", to_string(c.policy.tie_break)}}},
      {"replications", c.replications},
      {"seed", c.seed},
      {"random_block_design", c.random_block_design},
  };
  if (c.initial_design) j["initial_design"] = design_to_json(*c.initial_design);
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("experiment config must be a JSON object");
  reject_unknown(j,
                 {"n_patients", "m_initial", "m_adaptive", "pool_size_initial", "rho", "noise",
                  "strategy", "bp", "policy", "replications", "seed", "random_block_design",
                  "initial_design"},
                 "experiment config");
  ExperimentConfig c;
  read(j, "n_patients", c.n_patients);
  read(j, "m_initial", c.m_initial);
  read(j, "m_adaptive", c.m_adaptive);
  read(j, "pool_size_initial", c.pool_size_initial);
  read(j, "rho", c.rho);
  read(j, "replications", c.replications);
  read(j, "seed", c.seed);
  read(j, "random_block_design", c.random_block_design);
  if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    reject_unknown(n, {"p_tp", "p_fp"}, "noise");
    read(n, "p_tp", c.noise.p_tp);
    read(n, "p_fp", c.noise.p_fp);
  }
  if (j.contains("bp")) {
    const json& b = j.at("bp");
    reject_unknown(b, {"max_iterations", "tolerance", "damping", "fallback_damping", "clamp_floor"},
                   "bp");
    read(b, "max_iterations", c.bp.max_iterations);
    read(b, "tolerance", c.bp.tolerance);
    read(b, "damping", c.bp.damping);
    read(b, "fallback_damping", c.bp.fallback_damping);
    read(b, "clamp_floor", c.bp.clamp_floor);
  }
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    reject_unknown(p, {"exclude_tested", "tie_break"}, "policy");
    read(p, "exclude_tested", c.policy.exclude_tested);
    if (p.contains("tie_break")) c.policy.tie_break = parse_tie_break(p.at("tie_break").get<std::string>());
  }
  if (j.contains("initial_design")) {
    const json& d = j.at("initial_design");
    c.initial_design = design_from_json(d.is_string() ? read_json_file(d.get<std::string>()) : d);
  }
  return c;
}

namespace {

void collect_axes(const json& node, const json::json_pointer& at,
                  std::vector<json::json_pointer>& axes) {
  if (node.is_array()) {
    if (node.empty()) throw std::invalid_argument("empty grid axis at " + at.to_string());
    axes.push_back(at);
    return;
  }
  if (!node.is_object()) return;
  for (const auto& [key, value] : node.items()) {
    if (at.empty() && key == "initial_design") continue;
    collect_axes(value, at / key, axes);
  }
}

}  // namespace

std::vector<ExperimentConfig> expand_grid(const json& grid) {
  if (!grid.is_object()) throw std::invalid_argument("grid must be a JSON object");
  std::vector<json::json_pointer> axes;
  collect_axes(grid, json::json_pointer{}, axes);

  std::vector<ExperimentConfig> out;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    json point = grid;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      point[axes[a]] = grid[axes[a]][idx[a]];
    }
    out.push_back(config_from_json(point));
    std::size_t a = axes.size();
    for (;;) {
      if (a == 0) return out;
      --a;
      if (++idx[a] < grid[axes[a]].size()) break;
      idx[a] = 0;
    }
  }
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_to_json(const Summary& s) {
  return {{"mean", opt(s.mean)},
          {"std_error", opt(s.std_error)},
          {"count", s.count},
          {"undefined", s.undefined}};
}

}  // namespace

json trial_to_json(const TrialResult& t) {
  json traj = json::array();
  for (const TrajectoryPoint& p : t.trajectory) {
    traj.push_back({{"tests", p.tests}, {"tp", opt(p.tp)}, {"fp", opt(p.fp)}});
  }
  return {{"tp_rate", opt(t.tp_rate)},
          {"fp_rate", opt(t.fp_rate)},
          {"trajectory", std::move(traj)},
          {"bp_convergence_failures", t.bp_convergence_failures},
          {"clamped_bp_failures", t.clamped_bp_failures},
          {"clipped_corrections", t.clipped_corrections},
          {"realized_infected", t.realized_infected},
          {"x0", t.truth.x0},
          {"design", design_to_json(t.design)},
          {"outcomes", t.outcomes}};
}

json sweep_row_to_json(const SweepRow& row) {
  json j = {{"config", config_to_json(row.config)},
            {"alpha", row.config.alpha()},
            {"replications", row.replications},
            {"tp", summary_to_json(row.tp)},
            {"fp", summary_to_json(row.fp)},
            {"bp_failures", row.bp_failures}};
  if (!row.error.empty()) j["error"] = row.error;
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed JSON in '" + path + "': " + e.what());
  }
}

}  // namespace activepool
