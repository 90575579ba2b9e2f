#include "activepool/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "activepool/config_io.hpp"
#include "activepool/harness.hpp"
#include "activepool/validation.hpp"

namespace activepool {

namespace {

std::size_t default_threads() {
  if (const char* env = std::getenv("ACTIVEPOOL_THREADS")) {
    try {
      return std::max<std::size_t>(1, std::stoul(env));
    } catch (const std::exception&) {
    }
  }
  return 1;
}

struct Common {
  std::string config_path;
  std::string output_path;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::size_t threads = default_threads();
};

void add_output_options(CLI::App* cmd, Common& c) {
  cmd->add_option("--out,-o", c.output_path, "Output file (default: standard output)");
  cmd->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));
}

// Writes `body` to the --out file, or to `out` when none was given.
void emit(const Common& c, const std::string& body, std::ostream& out) {
  if (c.output_path.empty()) {
    out << body;
    return;
  }
  std::ofstream file(c.output_path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write '" + c.output_path + "'");
  file << body;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

std::vector<ExperimentConfig> load_grid(const Common& c) {
  std::vector<ExperimentConfig> grid = expand_grid(read_json_file(c.config_path));
  if (c.seed) {
    for (auto& g : grid) g.seed = *c.seed;
  }
  return grid;
}

int run_trial_command(const Common& c, std::ostream& out, std::ostream& err) {
  std::vector<ExperimentConfig> grid = load_grid(c);
  if (grid.size() != 1) {
    throw std::invalid_argument("trial expects a single configuration, the file expands to " +
                                std::to_string(grid.size()) + " (use sweep)");
  }
  const ReplicatedResult result = run_replicated(grid.front(), c.threads);
  err << "trial: " << result.row.replications << " replicates, " << result.row.bp_failures
      << " BP convergence failures, " << fmt(result.row.seconds) << " s\n";
  std::ostringstream body;
  if (c.format == "json") {
    nlohmann::json j = {{"summary", sweep_row_to_json(result.row)}, {"trials", nlohmann::json::array()}};
    for (const TrialResult& t : result.trials) j["trials"].push_back(trial_to_json(t));
    body << j.dump(2) << '\n';
  } else {
    write_sweep_csv(body, std::span<const SweepRow>(&result.row, 1));
  }
  emit(c, body.str(), out);
  return 0;
}

int run_sweep_command(const Common& c, std::ostream& out, std::ostream& err) {
  const std::vector<ExperimentConfig> grid = load_grid(c);
  std::vector<SweepRow> rows;
  std::size_t failed = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    rows.push_back(sweep(std::span<const ExperimentConfig>(&grid[k], 1), c.threads).front());
    const SweepRow& row = rows.back();
    if (!row.error.empty()) {
      ++failed;
      err << "sweep: point " << k + 1 << "/" << grid.size() << " failed: " << row.error << '\n';
    } else {
      err << "sweep: point " << k + 1 << "/" << grid.size() << " done, " << row.bp_failures
          << " BP convergence failures, " << fmt(row.seconds) << " s\n";
    }
  }
  std::ostringstream body;
  if (c.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const SweepRow& row : rows) j.push_back(sweep_row_to_json(row));
    body << j.dump(2) << '\n';
  } else {
    write_sweep_csv(body, rows);
  }
  emit(c, body.str(), out);
  return failed == 0 ? 0 : 2;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> values;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) values.push_back(std::stod(item));
  return values;
}

}  // namespace

int parse_and_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Active pooling design for noisy group testing"};
  app.require_subcommand(1);

  Common common;

  auto* trial = app.add_subcommand("trial", "Run one replicated experiment configuration");
  trial->add_option("--config,-c", common.config_path, "Experiment JSON")->required();
  add_output_options(trial, common);
  trial->add_option("--seed", common.seed, "Override the configured seed");
  trial->add_option("--threads", common.threads, "Concurrent replicates (env ACTIVEPOOL_THREADS)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Expand a grid file and run every point");
  sweep_cmd->add_option("--config,-c", common.config_path, "Grid JSON")->required();
  add_output_options(sweep_cmd, common);
  sweep_cmd->add_option("--seed", common.seed, "Override the configured seed");
  sweep_cmd->add_option("--threads", common.threads, "Concurrent replicates (env ACTIVEPOOL_THREADS)");

  BpValidationSpec bp_spec;
  auto* vbp = app.add_subcommand("validate-bp", "Compare BP marginals with exact enumeration");
  vbp->add_option("--instances", bp_spec.instances);
  vbp->add_option("--n", bp_spec.n_patients, "Patients per instance");
  vbp->add_option("--m", bp_spec.n_pools, "Pools per instance");
  vbp->add_option("--pool-size", bp_spec.pool_size);
  vbp->add_option("--rho", bp_spec.rho);
  vbp->add_option("--p-tp", bp_spec.noise.p_tp);
  vbp->add_option("--p-fp", bp_spec.noise.p_fp);
  vbp->add_option("--damping", bp_spec.bp.damping);
  vbp->add_flag("--trees", bp_spec.trees, "Forest instances with randomized parameters");
  vbp->add_option("--seed", bp_spec.seed);
  add_output_options(vbp, common);

  ChiValidationSpec chi_spec;
  std::string alphas = "0.5,1.0";
  std::string noises = "0.95:0.05,0.9:0.1";
  auto* vchi = app.add_subcommand("validate-chi", "Epsilon metric of clamped-BP susceptibilities");
  vchi->add_option("--n", chi_spec.n_patients);
  vchi->add_option("--pool-size", chi_spec.pool_size);
  vchi->add_option("--alphas", alphas, "Comma-separated M/N values");
  vchi->add_option("--noise", noises, "Comma-separated p_tp:p_fp pairs");
  vchi->add_option("--rho", chi_spec.rho);
  vchi->add_option("--realizations", chi_spec.realizations);
  vchi->add_option("--seed", chi_spec.seed);
  add_output_options(vchi, common);

  std::uint64_t selftest_seed = 7;
  auto* selftest = app.add_subcommand("selftest", "Check the closed-form selection identities");
  selftest->add_option("--seed", selftest_seed);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*trial) return run_trial_command(common, out, err);
    if (*sweep_cmd) return run_sweep_command(common, out, err);

    if (*vbp) {
      bp_spec.noise.validate();
      const BpValidationResult r = validate_bp(bp_spec);
      std::ostringstream body;
      if (common.format == "json") {
        body << nlohmann::json{{"instances", r.instances},
                               {"entries", r.entries},
                               {"max_abs_deviation", r.max_abs_deviation},
                               {"mean_abs_deviation", r.mean_abs_deviation},
                               {"median_abs_deviation", r.median_abs_deviation},
                               {"map_agreement", r.map_agreement},
                               {"bp_unconverged", r.bp_unconverged}}
                    .dump(2)
             << '\n';
      } else {
        body << "instances,entries,max_abs_deviation,mean_abs_deviation,median_abs_deviation,"
                "map_agreement,bp_unconverged\n"
             << r.instances << ',' << r.entries << ',' << fmt(r.max_abs_deviation) << ','
             << fmt(r.mean_abs_deviation) << ',' << fmt(r.median_abs_deviation) << ','
             << fmt(r.map_agreement) << ',' << r.bp_unconverged << '\n';
      }
      emit(common, body.str(), out);
      return 0;
    }

    if (*vchi) {
      std::ostringstream body;
      nlohmann::json rows = nlohmann::json::array();
      body << "N,N_G,alpha,p_tp,p_fp,rho,realizations,mean_epsilon,max_epsilon,bp_unconverged\n";
      for (double alpha : parse_list(alphas)) {
        std::stringstream pairs(noises);
        std::string pair;
        while (std::getline(pairs, pair, ',')) {
          const auto colon = pair.find(':');
          if (colon == std::string::npos) throw std::invalid_argument("noise pair needs p_tp:p_fp");
          ChiValidationSpec s = chi_spec;
          s.alpha = alpha;
          s.noise = {std::stod(pair.substr(0, colon)), std::stod(pair.substr(colon + 1))};
          s.noise.validate();
          const ChiValidationResult r = validate_chi(s);
          err << "validate-chi: alpha=" << alpha << " p_tp=" << s.noise.p_tp
              << " p_fp=" << s.noise.p_fp << " mean epsilon=" << fmt(r.mean_epsilon) << '\n';
          body << s.n_patients << ',' << s.pool_size << ',' << fmt(alpha) << ','
               << fmt(s.noise.p_tp) << ',' << fmt(s.noise.p_fp) << ',' << fmt(s.rho) << ','
               << s.realizations << ',' << fmt(r.mean_epsilon) << ',' << fmt(r.max_epsilon) << ','
               << r.bp_unconverged << '\n';
          rows.push_back({{"N", s.n_patients},
                          {"N_G", s.pool_size},
                          {"alpha", alpha},
                          {"p_tp", s.noise.p_tp},
                          {"p_fp", s.noise.p_fp},
                          {"rho", s.rho},
                          {"epsilon", r.epsilon},
                          {"mean_epsilon", r.mean_epsilon},
                          {"max_epsilon", r.max_epsilon},
                          {"bp_unconverged", r.bp_unconverged}});
        }
      }
      emit(common, common.format == "json" ? rows.dump(2) + "\n" : body.str(), out);
      return 0;
    }

    if (*selftest) {
      bool ok = true;
      for (const CheckResult& r : analytic_selftest(selftest_seed)) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.passed;
      }
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace activepool
