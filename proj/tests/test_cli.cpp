#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nlsid/cli.hpp"
#include "nlsid/pnlss.hpp"
#include "nlsid/timeseries.hpp"

namespace fs = std::filesystem;
using nlsid::cli::cli_run;

namespace {

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"nlsid"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A deliberately small pipeline so the whole chain runs in seconds.
std::string pipeline_config(int max_outer, bool resume) {
  std::ostringstream cfg;
  cfg << R"({
  "rng_seed": 11,
  "excitation": {"f0": 0.5, "n_lines": 10, "amplitude": 0.35,
                 "sample_rate": 50.0, "n_periods": 3, "n_realizations": 2},
  "vdp": {"mu": 0.3, "f_aut": 3.0, "integrator_step": 0.005,
          "output_sample_rate": 50.0},
  "bla": {"n_excited_lines": 10, "discard_periods": 1},
  "fit_linear": {"kind": "rational", "n_num": 2, "n_den": 2, "sk_iters": 5},
  "pnlss": {"state_degrees": [2, 3], "output_degrees": [2, 3]},
  "training": {"max_outer_iterations": )"
      << max_outer << R"(, "lm_steps_per_run": 6, "probe_steps": 2,
               "resume": )"
      << (resume ? "true" : "false") << R"(},
  "lockin": {"rel_freqs": [1.0], "amplitudes": [1.0],
             "settle_time": 5.0, "observe_time": 8.0}
})";
  return cfg.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string config(int max_outer = 1, bool resume = false) const {
    const fs::path p = path / "config.json";
    std::ofstream out(p);
    out << pipeline_config(max_outer, resume);
    return p.string();
  }
  std::string out() const { return (path / "out").string(); }
};

}  // namespace

TEST_CASE("excite is deterministic given the seed") {
  TempDir dir("nlsid_cli_excite");
  const std::string cfg = dir.config();
  REQUIRE(run({"excite", "--config", cfg, "--out", dir.out()}) == 0);
  const std::string first = slurp(fs::path(dir.out()) / "excite_r00.csv");
  REQUIRE(run({"excite", "--config", cfg, "--out", dir.out()}) == 0);
  CHECK(slurp(fs::path(dir.out()) / "excite_r00.csv") == first);
  CHECK_FALSE(first.empty());

  // A different seed changes the phases.
  REQUIRE(run({"excite", "--config", cfg, "--out", dir.out(), "--seed", "99"}) == 0);
  CHECK(slurp(fs::path(dir.out()) / "excite_r00.csv") != first);
}

TEST_CASE("full pipeline runs stage by stage") {
  TempDir dir("nlsid_cli_pipeline");
  const std::string cfg = dir.config();
  REQUIRE(run({"excite", "--config", cfg, "--out", dir.out()}) == 0);
  REQUIRE(run({"vdp", "--config", cfg, "--out", dir.out()}) == 0);
  REQUIRE(run({"bla", "--config", cfg, "--out", dir.out()}) == 0);
  REQUIRE(run({"fit-linear", "--config", cfg, "--out", dir.out()}) == 0);
  REQUIRE(run({"train", "--config", cfg, "--out", dir.out()}) == 0);

  CHECK(fs::exists(fs::path(dir.out()) / "bla.csv"));
  CHECK(fs::exists(fs::path(dir.out()) / "linear_model.json"));
  CHECK(fs::exists(fs::path(dir.out()) / "trained_model.json"));
  CHECK(fs::exists(fs::path(dir.out()) / "train_report.json"));
  CHECK(fs::exists(fs::path(dir.out()) / "train_manifest.json"));

  // Simulating an E=F=0 model equals the plain linear recursion.
  const std::string model_path = (fs::path(dir.out()) / "linear_model.json").string();
  const std::string data_path = (fs::path(dir.out()) / "response_r00.csv").string();
  const std::string sim_path = (fs::path(dir.out()) / "lin_sim.csv").string();
  REQUIRE(run({"simulate", "--config", cfg, "--out", dir.out(), "--model", model_path,
               "--data", data_path, "--output", sim_path}) == 0);
  const nlsid::pnlss::PnlssModel model = nlsid::pnlss::load_model(model_path);
  const nlsid::TimeSeries record = nlsid::load_timeseries_csv(data_path);
  const nlsid::TimeSeries sim = nlsid::load_timeseries_csv(sim_path);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(model.order());
  for (std::size_t t = 0; t < record.size(); ++t) {
    const double y = model.linear.c.dot(x) + model.linear.d * record.input[t];
    CHECK(sim.output[t] == doctest::Approx(y).epsilon(1e-12));
    x = (model.linear.a * x + model.linear.b * record.input[t]).eval();
  }
}

TEST_CASE("stage contract violations exit with code 2") {
  TempDir dir("nlsid_cli_contract");
  const std::string cfg = dir.config();
  // bla before its inputs exist.
  CHECK(run({"bla", "--config", cfg, "--out", dir.out()}) == 2);

  REQUIRE(run({"excite", "--config", cfg, "--out", dir.out()}) == 0);
  REQUIRE(run({"vdp", "--config", cfg, "--out", dir.out()}) == 0);

  // Tampering with a stage output invalidates the recorded hash.
  {
    std::ofstream out(fs::path(dir.out()) / "response_r00.csv", std::ios::app);
    out << "# tampered\n";
  }
  CHECK(run({"bla", "--config", cfg, "--out", dir.out()}) == 2);

  // Missing config file.
  CHECK(run({"excite", "--config", (dir.path / "nope.json").string(), "--out", dir.out()}) == 2);
}

TEST_CASE("train resumes from a checkpoint with identical results") {
  TempDir uninterrupted("nlsid_cli_train_a");
  TempDir resumed("nlsid_cli_train_b");

  for (const TempDir* dir : {&uninterrupted, &resumed}) {
    const std::string cfg = dir->config();
    REQUIRE(run({"excite", "--config", cfg, "--out", dir->out()}) == 0);
    REQUIRE(run({"vdp", "--config", cfg, "--out", dir->out()}) == 0);
    REQUIRE(run({"bla", "--config", cfg, "--out", dir->out()}) == 0);
    REQUIRE(run({"fit-linear", "--config", cfg, "--out", dir->out()}) == 0);
  }

  // One uninterrupted two-iteration run.
  REQUIRE(run({"train", "--config", uninterrupted.config(2), "--out", uninterrupted.out()}) == 0);
  // One iteration, then resume for the second.
  REQUIRE(run({"train", "--config", resumed.config(1), "--out", resumed.out()}) == 0);
  REQUIRE(run({"train", "--config", resumed.config(2, true), "--out", resumed.out()}) == 0);

  CHECK(slurp(fs::path(uninterrupted.out()) / "trained_model.json") ==
        slurp(fs::path(resumed.out()) / "trained_model.json"));
}

TEST_CASE("lockin writes the grid csv") {
  TempDir dir("nlsid_cli_lockin");
  const std::string cfg = dir.config();
  REQUIRE(run({"lockin", "--config", cfg, "--out", dir.out()}) == 0);
  const std::string grid = slurp(fs::path(dir.out()) / "lockin.csv");
  CHECK(grid.find("amplitude,1") == 0);
  CHECK(grid.find("\n1,") != std::string::npos);
}

TEST_CASE("file hash is stable and content sensitive") {
  TempDir dir("nlsid_cli_hash");
  const fs::path a = dir.path / "a.txt";
  std::ofstream(a) << "hello";
  const std::string h1 = nlsid::cli::file_hash(a.string());
  CHECK(h1 == nlsid::cli::file_hash(a.string()));
  std::ofstream(a) << "hello!";
  CHECK(h1 != nlsid::cli::file_hash(a.string()));
  CHECK_THROWS(nlsid::cli::file_hash((dir.path / "missing").string()));
}
