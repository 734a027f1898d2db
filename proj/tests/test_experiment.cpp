#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfim/experiment.hpp"
#include "kfim/stats.hpp"

using namespace kfim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("kfim_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const fs::path& path) { return json::parse(slurp(path)); }

ExperimentConfig schmidt_config(const fs::path& dir, std::uint64_t seed,
                                int realizations) {
  ExperimentConfig c;
  c.kind = ExperimentKind::SchmidtStats;
  c.sizes = {8};
  c.realizations[-1] = realizations;
  c.seed = seed;
  c.output_dir = dir.string();
  return c;
}

}  // namespace

TEST_CASE("schmidt run is reproducible byte for byte") {
  const fs::path a = fresh_dir("repro_a");
  const fs::path b = fresh_dir("repro_b");
  run_experiment(schmidt_config(a, 7, 4));
  run_experiment(schmidt_config(b, 7, 4));
  CHECK(slurp(a / "lambda_max.csv") == slurp(b / "lambda_max.csv"));
  CHECK(slurp(a / "spectrum_hist.csv") == slurp(b / "spectrum_hist.csv"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));

  const json manifest = load_json(a / "manifest.json");
  CHECK(manifest["master_seed"] == 7);
  CHECK(manifest["rng_algorithm"].get<std::string>().find("mt19937_64") == 0);
  CHECK(manifest["residue_max"]["8"].get<double>() < 1e-10);
}

TEST_CASE("summary moments match a direct recomputation from the CSV") {
  const fs::path dir = fresh_dir("moments");
  run_experiment(schmidt_config(dir, 21, 6));

  std::ifstream in(dir / "lambda_max.csv");
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> rescaled;
  while (std::getline(in, line)) {
    const auto last = line.find_last_of(',');
    rescaled.push_back(std::stod(line.substr(last + 1)));
  }
  REQUIRE(rescaled.size() > 100);

  const MomentSummary m = moment_summary(rescaled);
  const json summary = load_json(dir / "summary.json");
  const json& entry = summary["lambda_max"]["kfim"]["8"];
  CHECK(entry["count"].get<std::size_t>() == rescaled.size());
  CHECK(entry["rescaled"]["mean"].get<double>() ==
        doctest::Approx(m.mean).epsilon(1e-12));
  CHECK(entry["rescaled"]["variance"].get<double>() ==
        doctest::Approx(m.variance).epsilon(1e-12));
  CHECK(entry["ratio_R"].get<double>() ==
        doctest::Approx(ratio_R(m.mean, TwReference{})).epsilon(1e-12));
  CHECK(entry.contains("gev"));
  CHECK(entry["gev"]["scale_err"].get<double>() > 0.0);
  CHECK(std::isfinite(entry["gev"]["shape_err"].get<double>()));
}

TEST_CASE("gev-fit consumes a lambda pool and writes finite errors") {
  const fs::path produce = fresh_dir("gev_in");
  run_experiment(schmidt_config(produce, 3, 6));

  const fs::path out = fresh_dir("gev_out");
  ExperimentConfig c;
  c.kind = ExperimentKind::GevFit;
  c.input = produce.string();
  c.output_dir = out.string();
  run_experiment(c);

  const json fit = load_json(out / "gev_fit.json");
  REQUIRE(fit.contains("8"));
  CHECK(fit["8"]["scale"].get<double>() > 0.0);
  CHECK(fit["8"]["location_err"].get<double>() > 0.0);
  CHECK(std::isfinite(fit["8"]["log_likelihood"].get<double>()));
}

TEST_CASE("polfed-check reports tight agreement with the dense solver") {
  const fs::path dir = fresh_dir("polfed_check");
  ExperimentConfig c;
  c.kind = ExperimentKind::PolfedCheck;
  c.sizes = {10};
  c.realizations[-1] = 1;
  c.seed = 11;
  c.output_dir = dir.string();
  run_experiment(c);

  const json report = load_json(dir / "polfed_check.json");
  CHECK(report["10"]["max_phase_deviation"].get<double>() < 1e-10);
  CHECK(report["10"]["min_overlap"].get<double>() > 1.0 - 1e-8);
  CHECK(report["10"]["max_residue"].get<double>() < 1e-10);
}

TEST_CASE("aggregate pools disjoint runs like one concatenated pool") {
  const fs::path parent = fresh_dir("agg_parent");
  const fs::path run_a = parent / "a";
  const fs::path run_b = parent / "b";
  fs::create_directories(run_a);
  fs::create_directories(run_b);
  run_experiment(schmidt_config(run_a, 100, 3));
  run_experiment(schmidt_config(run_b, 200, 3));

  // concatenated variant: one directory holding merged CSVs
  const fs::path merged = fresh_dir("agg_merged");
  for (const char* name : {"lambda_max.csv", "spectrum_hist.csv"}) {
    std::ofstream out(merged / name);
    bool first = true;
    for (const fs::path& src : {run_a / name, run_b / name}) {
      std::ifstream in(src);
      std::string line;
      bool header = true;
      while (std::getline(in, line)) {
        if (header && !first) {
          header = false;
          continue;  // keep a single header row
        }
        header = false;
        out << line << '\n';
      }
      first = false;
    }
  }

  aggregate(parent.string(), (parent / "pooled.json").string());
  aggregate(merged.string(), (merged / "pooled.json").string());
  const json split = load_json(parent / "pooled.json");
  const json once = load_json(merged / "pooled.json");
  CHECK(split["lambda_max"] == once["lambda_max"]);
  CHECK(split["spectrum"] == once["spectrum"]);

  SUBCASE("empty input is an error") {
    const fs::path empty = fresh_dir("agg_empty");
    CHECK_THROWS_AS(aggregate(empty.string(), (empty / "s.json").string()),
                    std::invalid_argument);
  }

  SUBCASE("schema mismatch names the offending column") {
    const fs::path bad = fresh_dir("agg_bad");
    std::ofstream out(bad / "lambda_max.csv");
    out << "model,size,realization,eig_index,phase,residue,lambda_typo,"
           "lambda_rescaled\n";
    out.close();
    try {
      aggregate(bad.string(), (bad / "s.json").string());
      FAIL("expected schema error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("lambda_max") != std::string::npos);
      CHECK(std::string(e.what()).find("lambda_typo") != std::string::npos);
    }
  }
}

TEST_CASE("plot data emission") {
  const fs::path dir = fresh_dir("plots");
  run_experiment(schmidt_config(dir / "schmidt", 5, 3));

  ExperimentConfig w;
  w.kind = ExperimentKind::WishartReference;
  w.wishart_dim = 16;
  w.wishart_draws = 400;
  w.wishart_spectrum = true;
  w.seed = 5;
  w.output_dir = (dir / "wishart").string();
  run_experiment(w);

  ExperimentConfig ac;
  ac.kind = ExperimentKind::Autocorr;
  ac.sizes = {8};
  ac.realizations[-1] = 3;
  ac.t_max = 60;
  ac.seed = 5;
  ac.output_dir = (dir / "autocorr").string();
  run_experiment(ac);

  const fs::path summary = dir / "summary.json";
  aggregate(dir.string(), summary.string());
  const json s = load_json(summary);
  CHECK(s["lambda_max"]["kfim"]["8"].contains("dkl_vs_wishart"));
  CHECK(s["spectrum"]["kfim"]["8"].contains("dkl_vs_wishart"));

  SUBCASE("mp-density emits model and reference densities") {
    const fs::path csv = dir / "mp.csv";
    emit_plot_data(summary.string(), "mp-density", csv.string(),
                   "model=kfim,L=8");
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# kind: mp-density", 0) == 0);
    std::getline(in, line);
    CHECK(line == "e_rescaled,density_model,density_mp");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 100);
  }

  SUBCASE("R-vs-L emits one row per size") {
    const fs::path csv = dir / "r.csv";
    emit_plot_data(summary.string(), "R-vs-L", csv.string(), "model=kfim");
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);  // comment
    std::getline(in, line);
    CHECK(line == "L,R");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 1);  // single size present
  }

  SUBCASE("autocorr emits t, mean, stderr") {
    const fs::path csv = dir / "ac.csv";
    emit_plot_data(summary.string(), "autocorr", csv.string(), "");
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    CHECK(line == "t,mean_abs,stderr");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 61);
  }

  SUBCASE("unknown kind lists the available kinds") {
    try {
      emit_plot_data(summary.string(), "nope", (dir / "x.csv").string(), "");
      FAIL("expected error");
    } catch (const std::invalid_argument& e) {
      for (const std::string& k : plot_kinds())
        CHECK(std::string(e.what()).find(k) != std::string::npos);
    }
  }
}

TEST_CASE("config validation") {
  ExperimentConfig c;
  c.kind = ExperimentKind::SchmidtStats;
  c.sizes = {9};  // odd
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

  c.sizes = {8};
  c.bins = 1;
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
  c.bins = 100;

  c.kind = ExperimentKind::Otoc;
  c.sizes = {14};
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
  c.otoc_stochastic = true;
  CHECK_NOTHROW(validate_config(c));

  c.kind = ExperimentKind::Eth;
  c.sizes = {};
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

  const fs::path dir = fresh_dir("config");
  {
    std::ofstream out(dir / "bad_key.json");
    out << R"({"experiment": "eth", "sizes": [8], "bogus": 1})";
  }
  CHECK_THROWS_AS(load_config((dir / "bad_key.json").string()),
                  std::invalid_argument);
  {
    std::ofstream out(dir / "ok.json");
    out << R"({"experiment": "eth", "sizes": [8, 9], "realizations": {"8": 2, "9": 3},
               "seed": 42, "solver": "dense", "output_dir": "out"})";
  }
  const ExperimentConfig loaded = load_config((dir / "ok.json").string());
  CHECK(loaded.kind == ExperimentKind::Eth);
  CHECK(loaded.sizes == std::vector<int>{8, 9});
  CHECK(loaded.realizations.at(8) == 2);
  CHECK(loaded.realizations.at(9) == 3);
  CHECK(loaded.seed == 42);
  CHECK(loaded.solver == SolverKind::Dense);
}

TEST_CASE("default windows and realization counts") {
  CHECK(default_window(8) == 28);
  CHECK(default_window(10) == 60);
  CHECK(default_window(12) == 124);
  CHECK(default_window(13) == 128);  // capped
  CHECK(default_realizations(ExperimentKind::Autocorr, 8) > 0);
  CHECK(default_realizations(ExperimentKind::SchmidtStats, 12) > 0);
}
