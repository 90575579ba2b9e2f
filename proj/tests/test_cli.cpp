#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "activepool/cli.hpp"
#include "activepool/config_io.hpp"
#include "activepool/harness.hpp"

using namespace activepool;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "activepool");
  std::ostringstream out, err;
  const int code = parse_and_run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path write_temp(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "activepool_cli_test";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << body;
  return p;
}

const char* kSmall = R"({"n_patients": 60, "m_initial": 18, "m_adaptive": 4, "pool_size_initial": 10,
                         "rho": 0.05, "strategy": "active-P1", "replications": 3, "seed": 4})";

}  // namespace

TEST_CASE("trial writes one CSV row and is reproducible") {
  const fs::path cfg = write_temp("small.json", kSmall);
  const Run a = run({"trial", "--config", cfg.string()});
  const Run b = run({"trial", "--config", cfg.string()});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  std::istringstream in(a.out);
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == kSweepCsvHeader);
  CHECK(row.rfind("active-P1,60,18,4,10,0.05,", 0) == 0);
  CHECK_FALSE(std::getline(in, extra));

  const Run other = run({"trial", "--config", cfg.string(), "--seed", "99"});
  CHECK(other.code == 0);

  const fs::path out = cfg.parent_path() / "trial.json";
  const Run j = run({"trial", "--config", cfg.string(), "--format", "json", "--out", out.string()});
  CHECK(j.code == 0);
  CHECK(j.out.empty());
  std::ifstream f(out);
  const nlohmann::json parsed = nlohmann::json::parse(f);
  CHECK(parsed.at("trials").size() == 3);
  CHECK(parsed.at("trials")[0].at("trajectory").size() == 5);
}

TEST_CASE("thread count does not change output") {
  const fs::path cfg = write_temp("threads.json", kSmall);
  CHECK(run({"trial", "--config", cfg.string(), "--threads", "1"}).out ==
        run({"trial", "--config", cfg.string(), "--threads", "3"}).out);
}

TEST_CASE("sweep expands the grid") {
  const fs::path cfg = write_temp("grid.json", R"({"n_patients": 60, "m_initial": 18, "m_adaptive": 3,
      "pool_size_initial": 10, "rho": 0.05, "replications": 2,
      "strategy": ["random", "active-P1", "active-P2"]})");
  const Run r = run({"sweep", "--config", cfg.string()});
  CHECK(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 4);
  CHECK(r.out.find("\nrandom,") != std::string::npos);
  CHECK(r.out.find("\nactive-P2,") != std::string::npos);
  // A grid is not a single trial.
  CHECK(run({"trial", "--config", cfg.string()}).code == 1);
}

TEST_CASE("sweep reports failing points and still writes the rest") {
  const fs::path cfg = write_temp("bad_grid.json", R"({"n_patients": 60, "m_initial": 18, "m_adaptive": 2,
      "pool_size_initial": [10, 7], "rho": 0.05, "strategy": "random"})");
  const Run r = run({"sweep", "--config", cfg.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("failed") != std::string::npos);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
}

TEST_CASE("configuration errors") {
  const fs::path broken = write_temp("broken.json", "{\"n_patients\": ");
  const Run a = run({"trial", "--config", broken.string()});
  CHECK(a.code == 1);
  CHECK(a.err.rfind("error:", 0) == 0);

  const fs::path unknown = write_temp("unknown.json", R"({"n_patient": 10})");
  CHECK(run({"trial", "--config", unknown.string()}).code == 1);

  const fs::path infeasible = write_temp("infeasible.json", R"({"n_patients": 12, "m_initial": 8,
      "pool_size_initial": 4, "m_adaptive": 1})");
  const Run c = run({"trial", "--config", infeasible.string()});
  CHECK(c.code == 1);
  CHECK(c.err.find("error:") != std::string::npos);

  CHECK(run({"trial", "--config", "/nonexistent/x.json"}).code != 0);
  CHECK(run({"trial"}).code != 0);
  CHECK(run({}).code != 0);
}

TEST_CASE("validate-bp") {
  const Run r = run({"validate-bp", "--instances", "5", "--seed", "3"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("instances,entries,max_abs_deviation", 0) == 0);
  const Run trees = run({"validate-bp", "--instances", "5", "--trees", "--format", "json"});
  CHECK(trees.code == 0);
  const nlohmann::json j = nlohmann::json::parse(trees.out);
  CHECK(j.at("max_abs_deviation").get<double>() < 1e-6);
  // Beyond the enumeration cap.
  const Run big = run({"validate-bp", "--instances", "1", "--n", "30", "--m", "10"});
  CHECK(big.code == 1);
  CHECK(big.err.find("error:") != std::string::npos);
}

TEST_CASE("validate-chi") {
  const Run r = run({"validate-chi", "--n", "12", "--pool-size", "6", "--alphas", "0.5",
                     "--noise", "0.95:0.05", "--realizations", "2"});
  CHECK(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
  CHECK(run({"validate-chi", "--noise", "0.95-0.05"}).code == 1);
}

TEST_CASE("selftest") {
  const Run r = run({"selftest"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
}
