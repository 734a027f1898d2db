#include "kfim/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "kfim/dynamics.hpp"
#include "kfim/entanglement.hpp"
#include "kfim/rmt.hpp"
#include "kfim/rng.hpp"
#include "kfim/stats.hpp"

#ifdef KFIM_HAVE_OPENMP
#include <omp.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace kfim {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int worker_count() {
#ifdef KFIM_HAVE_OPENMP
  if (const char* env = std::getenv("KFIM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Realization loop with per-index error capture; results land in
// caller-provided slots so output order never depends on scheduling.
template <typename Body>
std::vector<std::string> parallel_realizations(int n, const Body& body) {
  std::vector<std::string> errors(n);
#ifdef KFIM_HAVE_OPENMP
  openblas_set_num_threads(1);
  omp_set_num_threads(worker_count());
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
#ifdef KFIM_HAVE_OPENMP
  openblas_set_num_threads(worker_count());
#endif
  std::vector<std::string> failed;
  for (int i = 0; i < n; ++i)
    if (!errors[i].empty())
      failed.push_back("realization " + std::to_string(i) + ": " + errors[i]);
  return failed;
}

// Line-buffered CSV stream: every row is flushed whole, so an interrupted run
// leaves no partial records.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    out_ << header << '\n';
    out_.flush();
  }
  void row(const std::string& line) {
    out_ << line << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

void write_json_atomic(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

std::uint64_t realization_stream(int size, int index) {
  return (static_cast<std::uint64_t>(size) << 24) + static_cast<std::uint64_t>(index);
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::SchmidtStats: return "schmidt-stats";
    case ExperimentKind::GevFit: return "gev-fit";
    case ExperimentKind::WishartReference: return "wishart-reference";
    case ExperimentKind::Eth: return "eth";
    case ExperimentKind::Autocorr: return "autocorr";
    case ExperimentKind::Otoc: return "otoc";
    case ExperimentKind::PolfedCheck: return "polfed-check";
  }
  return "?";
}

std::string to_string(ModelKind model) {
  return model == ModelKind::Kfim ? "kfim" : "coe";
}

std::string to_string(SolverKind solver) {
  switch (solver) {
    case SolverKind::Auto: return "auto";
    case SolverKind::Dense: return "dense";
    case SolverKind::Polfed: return "polfed";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (const ExperimentKind k :
       {ExperimentKind::SchmidtStats, ExperimentKind::GevFit,
        ExperimentKind::WishartReference, ExperimentKind::Eth,
        ExperimentKind::Autocorr, ExperimentKind::Otoc,
        ExperimentKind::PolfedCheck})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown experiment kind: " + name);
}

int default_window(int sites) {
  const int half_krylov = static_cast<int>(std::floor(std::exp2(0.5 * sites + 2.0))) / 2;
  return std::clamp(half_krylov - 4, 1, 128);
}

int default_realizations(ExperimentKind kind, int sites) {
  switch (kind) {
    case ExperimentKind::SchmidtStats:
    case ExperimentKind::GevFit:
    case ExperimentKind::PolfedCheck: {
      if (kind == ExperimentKind::PolfedCheck) return 3;
      if (sites <= 9) return 100;
      if (sites <= 11) return 40;
      if (sites == 12) return 20;
      if (sites == 13) return 12;
      return 8;
    }
    case ExperimentKind::Eth: {
      if (sites <= 8) return 60;
      if (sites == 9) return 50;
      if (sites <= 11) return 30;
      if (sites == 12) return 20;
      if (sites == 13) return 12;
      return 8;
    }
    case ExperimentKind::Autocorr: {
      if (sites <= 8) return 100;
      if (sites == 9) return 80;
      if (sites == 10) return 60;
      if (sites == 11) return 50;
      if (sites == 12) return 40;
      if (sites == 13) return 20;
      return 10;
    }
    case ExperimentKind::Otoc: return 8;
    case ExperimentKind::WishartReference: return 1;
  }
  return 1;
}

namespace {

// Production eigenvector totals per size, scaled to realization counts.
int paper_realizations(ExperimentKind kind, int sites, int window) {
  static const std::map<int, long> eigvec_totals{
      {8, 1000000}, {9, 500000},  {10, 500000}, {11, 500000}, {12, 300000},
      {13, 179000}, {14, 101600}, {15, 72400},  {16, 51200},  {18, 40960}};
  static const std::map<int, int> autocorr_counts{
      {8, 10000}, {9, 5000}, {10, 2000}, {11, 1000},
      {12, 500},  {13, 100}, {14, 50}};
  switch (kind) {
    case ExperimentKind::Autocorr: {
      const auto it = autocorr_counts.find(sites);
      return it != autocorr_counts.end() ? it->second : 50;
    }
    case ExperimentKind::Otoc: return 100;
    case ExperimentKind::SchmidtStats:
    case ExperimentKind::GevFit:
    case ExperimentKind::Eth: {
      const auto it = eigvec_totals.find(sites);
      const long total = it != eigvec_totals.end() ? it->second : 40960;
      return static_cast<int>((total + window - 1) / window);
    }
    default: return default_realizations(kind, sites);
  }
}

int realizations_for(const ExperimentConfig& c, int sites) {
  if (const auto it = c.realizations.find(sites); it != c.realizations.end())
    return it->second;
  if (const auto all = c.realizations.find(-1); all != c.realizations.end())
    return all->second;
  const int window = c.eigenpairs > 0 ? c.eigenpairs : default_window(sites);
  return c.paper_scale ? paper_realizations(c.kind, sites, window)
                       : default_realizations(c.kind, sites);
}

int window_for(const ExperimentConfig& c, int sites) {
  return c.eigenpairs > 0 ? c.eigenpairs : default_window(sites);
}

FilterSpec filter_for(const ExperimentConfig& c, int sites) {
  if (c.filter_overridden) return c.filter;
  FilterSpec spec = default_filter_spec(sites);
  spec.target_phase = c.filter.target_phase;
  spec.residue_threshold = c.filter.residue_threshold;
  return spec;
}

bool use_dense(const ExperimentConfig& c, int sites) {
  switch (c.solver) {
    case SolverKind::Dense: return true;
    case SolverKind::Polfed: return false;
    case SolverKind::Auto: return sites <= 10;
  }
  return true;
}

EigenpairSet select_window(const EigenpairSet& all, double target, int count) {
  std::vector<Eigen::Index> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return phase_distance(all.phases[a], target) <
           phase_distance(all.phases[b], target);
  });
  const Eigen::Index kept = std::min<Eigen::Index>(count, order.size());
  order.resize(kept);
  std::sort(order.begin(), order.end());
  EigenpairSet out;
  out.target_phase = target;
  out.truncated = kept < count;
  out.phases.resize(kept);
  out.vectors.resize(all.vectors.rows(), kept);
  out.residues.resize(kept);
  for (Eigen::Index i = 0; i < kept; ++i) {
    out.phases[i] = all.phases[order[i]];
    out.vectors.col(i) = all.vectors.col(order[i]);
    out.residues[i] = all.residues[order[i]];
  }
  return out;
}

ChainParams chain_for(const ExperimentConfig& c, int sites, std::uint64_t seed) {
  ChainParams p = ChainParams::self_dual(sites, seed);
  p.ising_coupling = c.ising_coupling;
  p.kick_strength = c.kick_strength;
  return p;
}

// One realization's eigenpair window near the target phase.
EigenpairSet solve_window(const ExperimentConfig& c, int sites,
                          std::uint64_t seed, int count) {
  const double target = c.filter.target_phase;
  if (c.model == ModelKind::Coe)
    return select_window(dense_eig(sample_coe(1 << sites, seed)), target, count);
  const ChainParams p = chain_for(c, sites, seed);
  if (use_dense(c, sites))
    return select_window(dense_eig(build_dense_unitary(p)), target, count);
  const FilterSpec spec = filter_for(c, sites);
  return polfed(p, spec, std::min(count, spec.krylov_dim / 2));
}

struct RunClock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

json config_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.kind);
  j["model"] = to_string(c.model);
  j["sizes"] = c.sizes;
  json reals = json::object();
  for (const auto& [size, n] : c.realizations)
    reals[size < 0 ? "all" : std::to_string(size)] = n;
  j["realizations"] = reals;
  j["eigenpairs"] = c.eigenpairs;
  j["seed"] = c.seed;
  j["solver"] = to_string(c.solver);
  j["filter"] = {{"order", c.filter.order},
                 {"krylov_dim", c.filter.krylov_dim},
                 {"target_phase", c.filter.target_phase},
                 {"residue_threshold", c.filter.residue_threshold},
                 {"overridden", c.filter_overridden}};
  j["bins"] = c.bins;
  j["t_max"] = c.t_max;
  j["wishart"] = {{"dim", c.wishart_dim},
                  {"draws", c.wishart_draws},
                  {"tridiagonal", c.wishart_tridiagonal},
                  {"spectrum", c.wishart_spectrum}};
  j["otoc"] = {{"stochastic", c.otoc_stochastic}, {"probes", c.otoc_probes}};
  j["couplings"] = {{"ising", c.ising_coupling}, {"kick", c.kick_strength}};
  j["paper_scale"] = c.paper_scale;
  j["input"] = c.input;
  j["output_dir"] = c.output_dir;
  return j;
}

json manifest_skeleton(const ExperimentConfig& c) {
  json m;
  m["config"] = config_json(c);
  m["rng_algorithm"] = Rng::algorithm();
  m["seed_rule"] =
      "splitmix64(master xor (stream+1)*0x9e3779b97f4a7c15), "
      "stream = (size<<24) + realization_index";
  m["master_seed"] = c.seed;
  m["software_version"] = kVersion;
  m["workers"] = worker_count();
  return m;
}

Eigen::VectorXd spectrum_edges(int bins) {
  Eigen::VectorXd edges(bins + 1);
  for (int i = 0; i <= bins; ++i) edges[i] = 4.0 * i / bins;
  return edges;
}

// ---------------------------------------------------------------------------
// experiment drivers

struct SchmidtRealization {
  std::vector<double> phases, residues, lambdas;
  Eigen::VectorXd spectrum_counts;
};

void run_schmidt_stats(const ExperimentConfig& c, json& manifest) {
  const fs::path dir(c.output_dir);
  CsvWriter lambda_csv(dir / "lambda_max.csv",
                       "model,size,realization,eig_index,phase,residue,"
                       "lambda_max,lambda_rescaled");
  CsvWriter hist_csv(dir / "spectrum_hist.csv",
                     "model,size,bin_lo,bin_hi,count");
  const Eigen::VectorXd edges = spectrum_edges(c.bins);

  json residue_max = json::object();
  json completed = json::object();
  json failures = json::object();
  for (const int sites : c.sizes) {
    const int realizations = realizations_for(c, sites);
    const int window = window_for(c, sites);
    const int subsystem = 1 << (sites / 2);
    std::vector<SchmidtRealization> results(realizations);

    const auto failed = parallel_realizations(realizations, [&](int r) {
      const std::uint64_t seed = derive_seed(c.seed, realization_stream(sites, r));
      const EigenpairSet eigs = solve_window(c, sites, seed, window);
      SchmidtRealization& out = results[r];
      out.spectrum_counts = Eigen::VectorXd::Zero(c.bins);
      for (Eigen::Index i = 0; i < eigs.size(); ++i) {
        const SchmidtSpectrum s = schmidt_spectrum(eigs.vectors.col(i), sites);
        out.phases.push_back(eigs.phases[i]);
        out.residues.push_back(eigs.residues[i]);
        out.lambdas.push_back(lambda_max(s));
        const Eigen::VectorXd resc = rescaled_spectrum(s);
        for (Eigen::Index j = 0; j < resc.size(); ++j) {
          if (resc[j] <= 0.0 || resc[j] > 4.0) continue;
          Eigen::Index b = static_cast<Eigen::Index>(resc[j] / 4.0 * c.bins);
          if (b == c.bins) b = c.bins - 1;
          out.spectrum_counts[b] += 1.0;
        }
      }
    });

    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(c.bins);
    double worst_residue = 0.0;
    int done = 0;
    for (int r = 0; r < realizations; ++r) {
      const SchmidtRealization& res = results[r];
      if (res.lambdas.empty()) continue;
      ++done;
      pooled += res.spectrum_counts;
      for (std::size_t i = 0; i < res.lambdas.size(); ++i) {
        worst_residue = std::max(worst_residue, res.residues[i]);
        lambda_csv.row(to_string(c.model) + "," + std::to_string(sites) + "," +
                       std::to_string(r) + "," + std::to_string(i) + "," +
                       g17(res.phases[i]) + "," + g17(res.residues[i]) + "," +
                       g17(res.lambdas[i]) + "," +
                       g17(rescale_lambda_max(res.lambdas[i], subsystem)));
      }
    }
    for (int b = 0; b < c.bins; ++b)
      hist_csv.row(to_string(c.model) + "," + std::to_string(sites) + "," +
                   g17(edges[b]) + "," + g17(edges[b + 1]) + "," +
                   g17(pooled[b]));

    const std::string key = std::to_string(sites);
    residue_max[key] = worst_residue;
    completed[key] = done;
    failures[key] = failed;
    for (const auto& f : failed) std::cerr << "[kfim] " << f << '\n';
  }
  manifest["residue_max"] = residue_max;
  manifest["realizations_completed"] = completed;
  manifest["failures"] = failures;
}

void run_wishart_reference(const ExperimentConfig& c, json& manifest) {
  const fs::path dir(c.output_dir);
  CsvWriter lambda_csv(dir / "wishart_lambda_max.csv",
                       "dim,draw,method,lambda_max,lambda_rescaled");
  const int dim = c.wishart_dim;
  const long draws = c.wishart_draws;
  const std::string method = c.wishart_tridiagonal ? "tridiagonal" : "dense";
  const bool keep_spectrum = c.wishart_spectrum && !c.wishart_tridiagonal;
  if (c.wishart_spectrum && c.wishart_tridiagonal)
    throw std::invalid_argument(
        "wishart-reference: spectra need the dense method");
  if (keep_spectrum && dim > 256)
    throw std::invalid_argument(
        "wishart-reference: full spectra are limited to dim <= 256");

  std::vector<double> lambdas(draws);
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(c.bins);
  std::vector<Eigen::VectorXd> spectra;
  if (keep_spectrum) spectra.assign(draws, Eigen::VectorXd());

  const auto failed = parallel_realizations(static_cast<int>(draws), [&](int d) {
    const std::uint64_t seed = derive_seed(c.seed, realization_stream(dim, d));
    if (c.wishart_tridiagonal) {
      lambdas[d] = largest_eig_tridiag(laguerre_tridiagonal(dim, seed), true);
    } else if (keep_spectrum) {
      const WishartSample w = sample_wishart_unit_trace(dim, seed);
      lambdas[d] = w.eigenvalues[0];
      spectra[d] = w.eigenvalues;
    } else {
      lambdas[d] = wishart_largest(dim, seed, true);
    }
  });
  for (const auto& f : failed) std::cerr << "[kfim] " << f << '\n';

  for (long d = 0; d < draws; ++d) {
    lambda_csv.row(std::to_string(dim) + "," + std::to_string(d) + "," + method +
                   "," + g17(lambdas[d]) + "," +
                   g17(rescale_lambda_max(lambdas[d], dim)));
    if (keep_spectrum) {
      for (Eigen::Index j = 0; j < spectra[d].size(); ++j) {
        const double e = dim * spectra[d][j];
        if (e <= 0.0 || e > 4.0) continue;
        Eigen::Index b = static_cast<Eigen::Index>(e / 4.0 * c.bins);
        if (b == c.bins) b = c.bins - 1;
        pooled[b] += 1.0;
      }
    }
  }
  if (keep_spectrum) {
    CsvWriter hist_csv(dir / "wishart_spectrum_hist.csv",
                       "dim,bin_lo,bin_hi,count");
    const Eigen::VectorXd edges = spectrum_edges(c.bins);
    for (int b = 0; b < c.bins; ++b)
      hist_csv.row(std::to_string(dim) + "," + g17(edges[b]) + "," +
                   g17(edges[b + 1]) + "," + g17(pooled[b]));
  }
  manifest["draws_completed"] = draws - static_cast<long>(failed.size());
  manifest["failures"] = failed;
}

void run_eth(const ExperimentConfig& c, json& manifest) {
  const fs::path dir(c.output_dir);
  CsvWriter csv(dir / "eth_records.csv",
                "model,size,realization,pairs,gap_count,gap_sum,gap_max,"
                "offdiag_count,offdiag_sumsq");
  json completed = json::object();
  json failures = json::object();
  for (const int sites : c.sizes) {
    const int realizations = realizations_for(c, sites);
    const int window = window_for(c, sites);
    struct Row {
      int pairs = 0;
      std::size_t gap_count = 0;
      double gap_sum = 0, gap_max = 0, offdiag_sumsq = 0;
      std::size_t offdiag_count = 0;
    };
    std::vector<Row> rows(realizations);

    const auto failed = parallel_realizations(realizations, [&](int r) {
      const std::uint64_t seed = derive_seed(c.seed, realization_stream(sites, r));
      const EigenpairSet eigs = solve_window(c, sites, seed, window);
      const EthRecord rec = eth_record(eigs, sites);
      Row& row = rows[r];
      row.pairs = static_cast<int>(eigs.size());
      row.gap_count = rec.gaps.count;
      row.gap_sum = rec.gaps.mean_gap * static_cast<double>(rec.gaps.count);
      row.gap_max = rec.gaps.max_gap;
      row.offdiag_count = rec.offdiag_count;
      row.offdiag_sumsq =
          rec.offdiag_rms * rec.offdiag_rms * static_cast<double>(rec.offdiag_count);
    });

    int done = 0;
    for (int r = 0; r < realizations; ++r) {
      const Row& row = rows[r];
      if (row.pairs == 0) continue;
      ++done;
      csv.row(to_string(c.model) + "," + std::to_string(sites) + "," +
              std::to_string(r) + "," + std::to_string(row.pairs) + "," +
              std::to_string(row.gap_count) + "," + g17(row.gap_sum) + "," +
              g17(row.gap_max) + "," + std::to_string(row.offdiag_count) + "," +
              g17(row.offdiag_sumsq));
    }
    completed[std::to_string(sites)] = done;
    failures[std::to_string(sites)] = failed;
    for (const auto& f : failed) std::cerr << "[kfim] " << f << '\n';
  }
  manifest["realizations_completed"] = completed;
  manifest["failures"] = failures;
}

void run_autocorr(const ExperimentConfig& c, json& manifest) {
  const fs::path dir(c.output_dir);
  CsvWriter csv(dir / "autocorr.csv", "model,size,realization,t,re,im,abs");
  json completed = json::object();
  json failures = json::object();
  for (const int sites : c.sizes) {
    const int realizations = realizations_for(c, sites);
    std::vector<CorrelationSeries> series(realizations);

    const auto failed = parallel_realizations(realizations, [&](int r) {
      const std::uint64_t seed = derive_seed(c.seed, realization_stream(sites, r));
      const EigenpairSet eigs = solve_window(c, sites, seed, 1);
      if (eigs.size() == 0) throw std::runtime_error("no eigenstate in window");
      if (c.model == ModelKind::Coe) {
        const DenseUnitary u = sample_coe(1 << sites, seed);
        const UnitaryApply step = [&u](StateVector& s) { s = u * s; };
        series[r] = autocorrelation(step, eigs.phases[0], eigs.vectors.col(0),
                                    c.t_max, sites, sites);
      } else {
        series[r] = autocorrelation(chain_for(c, sites, seed), eigs.phases[0],
                                    eigs.vectors.col(0), c.t_max);
      }
    });

    int done = 0;
    for (int r = 0; r < realizations; ++r) {
      if (series[r].values.empty()) continue;
      ++done;
      for (std::size_t t = 0; t < series[r].values.size(); ++t) {
        const std::complex<double> v = series[r].values[t];
        csv.row(to_string(c.model) + "," + std::to_string(sites) + "," +
                std::to_string(r) + "," + std::to_string(t) + "," +
                g17(v.real()) + "," + g17(v.imag()) + "," + g17(std::abs(v)));
      }
    }
    completed[std::to_string(sites)] = done;
    failures[std::to_string(sites)] = failed;
    for (const auto& f : failed) std::cerr << "[kfim] " << f << '\n';
  }
  manifest["realizations_completed"] = completed;
  manifest["failures"] = failures;
}

void run_otoc(const ExperimentConfig& c, json& manifest) {
  const fs::path dir(c.output_dir);
  CsvWriter csv(dir / "otoc.csv", "model,size,realization,t,value");
  json completed = json::object();
  json failures = json::object();
  for (const int sites : c.sizes) {
    const int realizations = realizations_for(c, sites);
    std::vector<CorrelationSeries> series(realizations);

    const auto failed = parallel_realizations(realizations, [&](int r) {
      const std::uint64_t seed = derive_seed(c.seed, realization_stream(sites, r));
      OtocOptions opt;
      opt.t_max = c.t_max;
      opt.stochastic_trace = c.otoc_stochastic;
      opt.probes = c.otoc_probes;
      opt.probe_seed = derive_seed(seed, 0x70726f6265ULL);
      if (c.model == ModelKind::Coe)
        series[r] = otoc_dense_unitary(sample_coe(1 << sites, seed),
                                       center_site(sites), sites, opt.t_max);
      else
        series[r] = otoc(chain_for(c, sites, seed), opt);
    });

    int done = 0;
    for (int r = 0; r < realizations; ++r) {
      if (series[r].values.empty()) continue;
      ++done;
      for (std::size_t t = 0; t < series[r].values.size(); ++t)
        csv.row(to_string(c.model) + "," + std::to_string(sites) + "," +
                std::to_string(r) + "," + std::to_string(t) + "," +
                g17(series[r].values[t].real()));
    }
    completed[std::to_string(sites)] = done;
    failures[std::to_string(sites)] = failed;
    for (const auto& f : failed) std::cerr << "[kfim] " << f << '\n';
  }
  manifest["realizations_completed"] = completed;
  manifest["failures"] = failures;
}

void run_polfed_check(const ExperimentConfig& c, json& manifest) {
  json report = json::object();
  for (const int sites : c.sizes) {
    const int realizations = realizations_for(c, sites);
    const FilterSpec spec = filter_for(c, sites);
    const int count = std::min(window_for(c, sites), spec.krylov_dim / 2);
    double max_phase_dev = 0.0, max_residue = 0.0, min_overlap = 1.0;
    int matched = 0;
    for (int r = 0; r < realizations; ++r) {
      const std::uint64_t seed = derive_seed(c.seed, realization_stream(sites, r));
      const ChainParams p = chain_for(c, sites, seed);
      const EigenpairSet fast = polfed(p, spec, count);
      const EigenpairSet dense = dense_eig(build_dense_unitary(p));
      for (Eigen::Index i = 0; i < fast.size(); ++i) {
        Eigen::Index best = 0;
        double best_dist = 10.0;
        for (Eigen::Index j = 0; j < dense.size(); ++j) {
          const double d = phase_distance(fast.phases[i], dense.phases[j]);
          if (d < best_dist) {
            best_dist = d;
            best = j;
          }
        }
        max_phase_dev = std::max(max_phase_dev, best_dist);
        min_overlap = std::min(
            min_overlap,
            std::abs(dense.vectors.col(best).dot(fast.vectors.col(i))));
        max_residue = std::max(max_residue, fast.residues[i]);
        ++matched;
      }
    }
    json entry;
    entry["realizations"] = realizations;
    entry["pairs_checked"] = matched;
    entry["max_phase_deviation"] = max_phase_dev;
    entry["min_overlap"] = min_overlap;
    entry["max_residue"] = max_residue;
    report[std::to_string(sites)] = entry;
    std::cout << "polfed-check size " << sites << ": max phase deviation "
              << max_phase_dev << ", min overlap " << min_overlap
              << ", max residue " << max_residue << '\n';
  }
  write_json_atomic(fs::path(c.output_dir) / "polfed_check.json", report);
  manifest["report"] = report;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path,
                                               const std::string& expect_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty CSV: " + path.string());
  if (line != expect_header) {
    // name the first offending column for the diagnostic
    std::istringstream got(line), want(expect_header);
    std::string g, w;
    while (std::getline(want, w, ',')) {
      g.clear();
      if (!std::getline(got, g, ',') || g != w)
        throw std::runtime_error("schema mismatch in " + path.string() +
                                 ": expected column '" + w + "', found '" + g +
                                 "'");
    }
    throw std::runtime_error("schema mismatch in " + path.string() +
                             ": extra columns");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

void run_gev_fit(const ExperimentConfig& c, json& manifest) {
  fs::path input(c.input);
  if (input.empty()) throw std::invalid_argument("gev-fit: input CSV required");
  if (fs::is_directory(input)) input /= "lambda_max.csv";
  const auto rows = read_csv(input,
                             "model,size,realization,eig_index,phase,residue,"
                             "lambda_max,lambda_rescaled");
  std::map<int, std::vector<double>> pools;
  for (const auto& row : rows) {
    const int size = std::stoi(row[1]);
    if (!c.sizes.empty() &&
        std::find(c.sizes.begin(), c.sizes.end(), size) == c.sizes.end())
      continue;
    pools[size].push_back(std::stod(row[6]));
  }
  if (pools.empty()) throw std::invalid_argument("gev-fit: no matching samples");
  json out = json::object();
  for (const auto& [size, samples] : pools) {
    const GevFit fit = fit_gev(samples);
    out[std::to_string(size)] = {
        {"location", fit.location},       {"scale", fit.scale},
        {"shape", fit.shape},             {"location_err", fit.location_err},
        {"scale_err", fit.scale_err},     {"shape_err", fit.shape_err},
        {"log_likelihood", fit.log_likelihood},
        {"count", fit.count}};
  }
  write_json_atomic(fs::path(c.output_dir) / "gev_fit.json", out);
  manifest["fits"] = out;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  in >> j;

  static const std::vector<std::string> known{
      "experiment", "model",  "sizes",   "realizations", "eigenpairs",
      "seed",       "solver", "filter",  "bins",         "t_max",
      "wishart",    "otoc",   "couplings", "paper_scale", "input",
      "output_dir"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("config: unknown key '" + key + "'");

  ExperimentConfig c;
  c.kind = experiment_kind_from_string(j.at("experiment").get<std::string>());
  if (j.contains("model")) {
    const std::string m = j["model"].get<std::string>();
    if (m == "kfim")
      c.model = ModelKind::Kfim;
    else if (m == "coe")
      c.model = ModelKind::Coe;
    else
      throw std::invalid_argument("config: unknown model '" + m + "'");
  }
  if (j.contains("sizes")) c.sizes = j["sizes"].get<std::vector<int>>();
  if (j.contains("realizations")) {
    if (j["realizations"].is_number_integer()) {
      c.realizations[-1] = j["realizations"].get<int>();
    } else {
      for (const auto& [key, value] : j["realizations"].items())
        c.realizations[std::stoi(key)] = value.get<int>();
    }
  }
  if (j.contains("eigenpairs")) c.eigenpairs = j["eigenpairs"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("solver")) {
    const std::string s = j["solver"].get<std::string>();
    if (s == "auto")
      c.solver = SolverKind::Auto;
    else if (s == "dense")
      c.solver = SolverKind::Dense;
    else if (s == "polfed")
      c.solver = SolverKind::Polfed;
    else
      throw std::invalid_argument("config: unknown solver '" + s + "'");
  }
  if (j.contains("filter")) {
    const json& f = j["filter"];
    if (f.contains("order")) c.filter.order = f["order"].get<int>();
    if (f.contains("krylov_dim")) c.filter.krylov_dim = f["krylov_dim"].get<int>();
    if (f.contains("target_phase"))
      c.filter.target_phase = f["target_phase"].get<double>();
    if (f.contains("residue_threshold"))
      c.filter.residue_threshold = f["residue_threshold"].get<double>();
    c.filter_overridden = f.contains("order") && f.contains("krylov_dim");
  }
  if (j.contains("bins")) c.bins = j["bins"].get<int>();
  if (j.contains("t_max")) c.t_max = j["t_max"].get<int>();
  if (j.contains("wishart")) {
    const json& w = j["wishart"];
    if (w.contains("dim")) c.wishart_dim = w["dim"].get<int>();
    if (w.contains("draws")) c.wishart_draws = w["draws"].get<long>();
    if (w.contains("tridiagonal"))
      c.wishart_tridiagonal = w["tridiagonal"].get<bool>();
    if (w.contains("spectrum")) c.wishart_spectrum = w["spectrum"].get<bool>();
  }
  if (j.contains("otoc")) {
    const json& o = j["otoc"];
    if (o.contains("stochastic")) c.otoc_stochastic = o["stochastic"].get<bool>();
    if (o.contains("probes")) c.otoc_probes = o["probes"].get<int>();
  }
  if (j.contains("couplings")) {
    const json& cp = j["couplings"];
    if (cp.contains("ising")) c.ising_coupling = cp["ising"].get<double>();
    if (cp.contains("kick")) c.kick_strength = cp["kick"].get<double>();
  }
  if (j.contains("paper_scale")) c.paper_scale = j["paper_scale"].get<bool>();
  if (j.contains("input")) c.input = j["input"].get<std::string>();
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  return c;
}

void validate_config(const ExperimentConfig& c) {
  const bool needs_sizes = c.kind != ExperimentKind::WishartReference &&
                           c.kind != ExperimentKind::GevFit;
  if (needs_sizes && c.sizes.empty())
    throw std::invalid_argument("config: sizes must not be empty");
  for (const int sites : c.sizes) {
    if (sites < 2 || sites > 24)
      throw std::invalid_argument("config: size out of range: " +
                                  std::to_string(sites));
    if ((c.kind == ExperimentKind::SchmidtStats ||
         c.kind == ExperimentKind::GevFit) &&
        sites % 2 != 0)
      throw std::invalid_argument(
          "config: schmidt statistics are defined for even sizes only");
    if (c.kind == ExperimentKind::Otoc && sites > 12 && !c.otoc_stochastic)
      throw std::invalid_argument(
          "config: otoc beyond 12 sites needs otoc.stochastic");
    if (c.kind == ExperimentKind::PolfedCheck && (sites < 8 || sites > 14))
      throw std::invalid_argument(
          "config: polfed-check needs sizes in [8, 14] (dense oracle)");
    if (c.kind == ExperimentKind::PolfedCheck && c.model != ModelKind::Kfim)
      throw std::invalid_argument("config: polfed-check runs on the kfim model");
    const bool dense = c.model == ModelKind::Coe || use_dense(c, sites);
    if (dense && sites > 14)
      throw std::invalid_argument(
          "config: dense solve beyond 14 sites; use solver=polfed");
    if (!dense && sites < 8 && c.model == ModelKind::Kfim &&
        !c.filter_overridden)
      throw std::invalid_argument(
          "config: the production filter needs sizes >= 8; use solver=dense");
  }
  if (c.bins < 2) throw std::invalid_argument("config: bins must be >= 2");
  if (c.t_max < 1) throw std::invalid_argument("config: t_max must be >= 1");
  if (c.kind == ExperimentKind::WishartReference) {
    if (c.wishart_dim < 2)
      throw std::invalid_argument("config: wishart.dim must be >= 2");
    if (c.wishart_draws < 1)
      throw std::invalid_argument("config: wishart.draws must be >= 1");
  }
  for (const auto& [size, n] : c.realizations)
    if (n < 1) throw std::invalid_argument("config: realizations must be >= 1");
  if (c.eigenpairs < 0)
    throw std::invalid_argument("config: eigenpairs must be >= 0");
  if (c.kind == ExperimentKind::GevFit && c.input.empty())
    throw std::invalid_argument("config: gev-fit needs an input sample CSV");
  if (c.output_dir.empty())
    throw std::invalid_argument("config: output_dir must not be empty");
}

void run_experiment(const ExperimentConfig& c) {
  validate_config(c);
  fs::create_directories(c.output_dir);
  RunClock clock;
  json manifest = manifest_skeleton(c);

  switch (c.kind) {
    case ExperimentKind::SchmidtStats: run_schmidt_stats(c, manifest); break;
    case ExperimentKind::WishartReference: run_wishart_reference(c, manifest); break;
    case ExperimentKind::Eth: run_eth(c, manifest); break;
    case ExperimentKind::Autocorr: run_autocorr(c, manifest); break;
    case ExperimentKind::Otoc: run_otoc(c, manifest); break;
    case ExperimentKind::PolfedCheck: run_polfed_check(c, manifest); break;
    case ExperimentKind::GevFit: run_gev_fit(c, manifest); break;
  }

  manifest["wall_clock_seconds"] = clock.seconds();
  write_json_atomic(fs::path(c.output_dir) / "manifest.json", manifest);
  // run-level summary over whatever this run produced (the check and fit
  // kinds already wrote their reports directly)
  if (c.kind != ExperimentKind::PolfedCheck && c.kind != ExperimentKind::GevFit)
    aggregate(c.output_dir, (fs::path(c.output_dir) / "summary.json").string());
}

// ---------------------------------------------------------------------------
// aggregation

namespace {

struct LambdaPool {
  std::vector<double> lambda, rescaled;
};

struct EthPool {
  double gap_sum = 0, gap_max = 0, offdiag_sumsq = 0;
  std::size_t gap_count = 0, offdiag_count = 0, realizations = 0;
};

struct SeriesPool {
  // per time step: sum of |C|, sum of |C|^2, sum of complex C, count
  std::vector<double> abs_sum, abs_sumsq;
  std::vector<std::complex<double>> mean_sum;
  std::vector<long> count;
  void accumulate(int t, std::complex<double> v) {
    if (static_cast<std::size_t>(t) >= abs_sum.size()) {
      abs_sum.resize(t + 1, 0.0);
      abs_sumsq.resize(t + 1, 0.0);
      mean_sum.resize(t + 1, 0.0);
      count.resize(t + 1, 0);
    }
    abs_sum[t] += std::abs(v);
    abs_sumsq[t] += std::abs(v) * std::abs(v);
    mean_sum[t] += v;
    count[t] += 1;
  }
};

// Bin-keyed accumulator so pools from several runs add up instead of
// concatenating; edges must agree across files.
struct HistPool {
  std::map<std::pair<double, double>, double> bins;  // (lo, hi) -> count

  void add(double lo, double hi, double count) { bins[{lo, hi}] += count; }

  Histogram histogram() const {
    Histogram h;
    h.edges.resize(bins.size() + 1);
    h.counts.resize(bins.size());
    Eigen::Index i = 0;
    double prev_hi = 0.0;
    for (const auto& [edge, count] : bins) {
      if (i > 0 && edge.first != prev_hi)
        throw std::invalid_argument(
            "aggregate: incompatible histogram edges across input files");
      h.edges[i] = edge.first;
      h.counts[i] = count;
      prev_hi = edge.second;
      ++i;
    }
    h.edges[i] = prev_hi;
    return h;
  }
};

json moments_json(const MomentSummary& m) {
  return {{"mean", m.mean},
          {"variance", m.variance},
          {"skewness", m.skewness},
          {"count", m.count}};
}

json hist_json(const Histogram& h) {
  return {{"edges", std::vector<double>(h.edges.data(), h.edges.data() + h.edges.size())},
          {"counts", std::vector<double>(h.counts.data(), h.counts.data() + h.counts.size())}};
}

json fit_json(const ScalingFit& f) {
  return {{"prefactor", f.prefactor},
          {"decay", f.decay},
          {"prefactor_err", f.prefactor_err},
          {"decay_err", f.decay_err}};
}

}  // namespace

void aggregate(const std::string& dir, const std::string& out_path) {
  if (!fs::exists(dir)) throw std::invalid_argument("aggregate: no such directory " + dir);

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::map<std::pair<std::string, int>, LambdaPool> lambda_pools;
  std::map<int, std::pair<std::string, LambdaPool>> wishart_pools;  // dim -> method, pool
  std::map<std::pair<std::string, int>, HistPool> spectrum_pools;
  std::map<int, HistPool> wishart_spectrum_pools;
  std::map<std::pair<std::string, int>, EthPool> eth_pools;
  std::map<std::pair<std::string, int>, SeriesPool> autocorr_pools;
  std::map<std::pair<std::string, int>, SeriesPool> otoc_pools;
  std::map<std::pair<std::string, int>, std::set<int>> autocorr_reals, otoc_reals;

  bool any = false;
  for (const fs::path& file : files) {
    const std::string name = file.filename().string();
    if (name == "lambda_max.csv") {
      any = true;
      for (const auto& row :
           read_csv(file,
                    "model,size,realization,eig_index,phase,residue,lambda_max,"
                    "lambda_rescaled")) {
        LambdaPool& pool = lambda_pools[{row[0], std::stoi(row[1])}];
        pool.lambda.push_back(std::stod(row[6]));
        pool.rescaled.push_back(std::stod(row[7]));
      }
    } else if (name == "wishart_lambda_max.csv") {
      any = true;
      for (const auto& row :
           read_csv(file, "dim,draw,method,lambda_max,lambda_rescaled")) {
        auto& [method, pool] = wishart_pools[std::stoi(row[0])];
        method = row[2];
        pool.lambda.push_back(std::stod(row[3]));
        pool.rescaled.push_back(std::stod(row[4]));
      }
    } else if (name == "spectrum_hist.csv") {
      any = true;
      for (const auto& row : read_csv(file, "model,size,bin_lo,bin_hi,count"))
        spectrum_pools[{row[0], std::stoi(row[1])}].add(
            std::stod(row[2]), std::stod(row[3]), std::stod(row[4]));
    } else if (name == "wishart_spectrum_hist.csv") {
      any = true;
      for (const auto& row : read_csv(file, "dim,bin_lo,bin_hi,count"))
        wishart_spectrum_pools[std::stoi(row[0])].add(
            std::stod(row[1]), std::stod(row[2]), std::stod(row[3]));
    } else if (name == "eth_records.csv") {
      any = true;
      for (const auto& row :
           read_csv(file,
                    "model,size,realization,pairs,gap_count,gap_sum,gap_max,"
                    "offdiag_count,offdiag_sumsq")) {
        EthPool& pool = eth_pools[{row[0], std::stoi(row[1])}];
        pool.realizations += 1;
        pool.gap_count += std::stoul(row[4]);
        pool.gap_sum += std::stod(row[5]);
        pool.gap_max = std::max(pool.gap_max, std::stod(row[6]));
        pool.offdiag_count += std::stoul(row[7]);
        pool.offdiag_sumsq += std::stod(row[8]);
      }
    } else if (name == "autocorr.csv") {
      any = true;
      for (const auto& row :
           read_csv(file, "model,size,realization,t,re,im,abs")) {
        const auto key = std::make_pair(row[0], std::stoi(row[1]));
        autocorr_pools[key].accumulate(
            std::stoi(row[3]), {std::stod(row[4]), std::stod(row[5])});
        autocorr_reals[key].insert(std::stoi(row[2]));
      }
    } else if (name == "otoc.csv") {
      any = true;
      for (const auto& row : read_csv(file, "model,size,realization,t,value")) {
        const auto key = std::make_pair(row[0], std::stoi(row[1]));
        otoc_pools[key].accumulate(std::stoi(row[3]), std::stod(row[4]));
        otoc_reals[key].insert(std::stoi(row[2]));
      }
    }
  }
  if (!any)
    throw std::invalid_argument("aggregate: no recognized CSV files under " + dir);

  json summary;
  summary["software_version"] = kVersion;

  // wishart pools first so model pools can reference them
  json wishart = json::object();
  for (const auto& [dim, entry] : wishart_pools) {
    const auto& [method, pool] = entry;
    json w;
    w["method"] = method;
    w["count"] = pool.lambda.size();
    if (pool.rescaled.size() >= 3) {
      const MomentSummary m = moment_summary(pool.rescaled);
      w["rescaled"] = moments_json(m);
      w["ratio_R"] = ratio_R(m.mean, TwReference{});
      w["hist"] = hist_json(make_histogram(pool.rescaled, 100));
    }
    wishart[std::to_string(dim)] = w;
  }
  if (!wishart.empty()) summary["wishart"] = wishart;

  json lambda = json::object();
  for (const auto& [key, pool] : lambda_pools) {
    const auto& [model, size] = key;
    json entry;
    entry["count"] = pool.lambda.size();
    if (pool.rescaled.size() >= 3) {
      const MomentSummary m = moment_summary(pool.rescaled);
      entry["rescaled"] = moments_json(m);
      entry["ratio_R"] = ratio_R(m.mean, TwReference{});
      entry["hist"] = hist_json(make_histogram(pool.rescaled, 100));
      entry["hist_lambda"] = hist_json(make_histogram(pool.lambda, 100));
      entry["lambda"] = moments_json(moment_summary(pool.lambda));
      // distance to the finite-size reference at the matching subsystem dim
      if (size % 2 == 0) {
        const int dim = 1 << (size / 2);
        const auto ref = wishart_pools.find(dim);
        if (ref != wishart_pools.end() && ref->second.second.rescaled.size() >= 3) {
          const auto& ref_pool = ref->second.second.rescaled;
          const auto [lo_m, hi_m] =
              std::minmax_element(pool.rescaled.begin(), pool.rescaled.end());
          const auto [lo_r, hi_r] =
              std::minmax_element(ref_pool.begin(), ref_pool.end());
          const double lo = std::min(*lo_m, *lo_r);
          const double hi = std::max(*hi_m, *hi_r);
          Eigen::VectorXd edges(101);
          for (int i = 0; i <= 100; ++i) edges[i] = lo + (hi - lo) * i / 100.0;
          entry["dkl_vs_wishart"] =
              kl_divergence(make_histogram(ref_pool, edges),
                            make_histogram(pool.rescaled, edges));
          entry["wishart_dim"] = dim;
        }
      }
    }
    if (pool.lambda.size() >= 100) {
      try {
        const GevFit fit = fit_gev(pool.lambda);
        entry["gev"] = {{"location", fit.location},
                        {"scale", fit.scale},
                        {"shape", fit.shape},
                        {"location_err", fit.location_err},
                        {"scale_err", fit.scale_err},
                        {"shape_err", fit.shape_err},
                        {"log_likelihood", fit.log_likelihood},
                        {"count", fit.count}};
      } catch (const std::exception& e) {
        entry["gev_error"] = e.what();
      }
    }
    lambda[model][std::to_string(size)] = entry;
  }
  if (!lambda.empty()) summary["lambda_max"] = lambda;

  json spectrum = json::object();
  for (const auto& [key, pool] : spectrum_pools) {
    const auto& [model, size] = key;
    const Histogram q = pool.histogram();
    json entry = hist_json(q);
    if (size % 2 == 0) {
      const int dim = 1 << (size / 2);
      const auto ref = wishart_spectrum_pools.find(dim);
      if (ref != wishart_spectrum_pools.end()) {
        const Histogram p = ref->second.histogram();
        if (p.edges.size() == q.edges.size() &&
            (p.edges - q.edges).cwiseAbs().maxCoeff() == 0.0) {
          entry["dkl_vs_wishart"] = kl_divergence(p, q);
          entry["wishart_dim"] = dim;
        }
      }
    }
    spectrum[model][std::to_string(size)] = entry;
  }
  for (const auto& [dim, pool] : wishart_spectrum_pools)
    spectrum["wishart"][std::to_string(dim)] = hist_json(pool.histogram());
  if (!spectrum.empty()) summary["spectrum"] = spectrum;

  // pool ETH per model, then fit the three decay laws across sizes
  std::map<std::string, json> eth_by_model;
  std::map<std::string, std::vector<std::pair<double, double>>> mean_pts, max_pts,
      off_pts;
  for (const auto& [key, pool] : eth_pools) {
    const auto& [model, size] = key;
    const double mean_gap = pool.gap_sum / static_cast<double>(pool.gap_count);
    const double off_rms =
        std::sqrt(pool.offdiag_sumsq / static_cast<double>(pool.offdiag_count));
    eth_by_model[model]["per_size"][std::to_string(size)] = {
        {"mean_gap", mean_gap},
        {"max_gap", pool.gap_max},
        {"offdiag_rms", off_rms},
        {"gap_count", pool.gap_count},
        {"offdiag_count", pool.offdiag_count},
        {"realizations", pool.realizations}};
    mean_pts[model].emplace_back(size, mean_gap);
    max_pts[model].emplace_back(size, pool.gap_max);
    off_pts[model].emplace_back(size, off_rms);
  }
  for (auto& [model, entry] : eth_by_model) {
    if (mean_pts[model].size() >= 3) {
      entry["fits"] = {{"mean_gap", fit_json(fit_exponential_scaling(mean_pts[model]))},
                       {"max_gap", fit_json(fit_exponential_scaling(max_pts[model]))},
                       {"offdiag", fit_json(fit_exponential_scaling(off_pts[model]))}};
    }
    summary["eth"][model] = entry;
  }

  const auto series_json = [](const SeriesPool& pool, int realizations) {
    json entry;
    std::vector<int> times;
    std::vector<double> mean_abs, stderr_abs, abs_mean;
    for (std::size_t t = 0; t < pool.count.size(); ++t) {
      const double n = static_cast<double>(pool.count[t]);
      if (n == 0) continue;
      times.push_back(static_cast<int>(t));
      const double mean = pool.abs_sum[t] / n;
      mean_abs.push_back(mean);
      const double var = std::max(pool.abs_sumsq[t] / n - mean * mean, 0.0);
      stderr_abs.push_back(n > 1 ? std::sqrt(var / (n - 1)) : 0.0);
      abs_mean.push_back(std::abs(pool.mean_sum[t]) / n);
    }
    entry["t"] = times;
    entry["mean_abs"] = mean_abs;
    entry["stderr_abs"] = stderr_abs;
    entry["abs_mean"] = abs_mean;
    entry["realizations"] = realizations;
    return entry;
  };
  for (const auto& [key, pool] : autocorr_pools)
    summary["autocorr"][key.first][std::to_string(key.second)] =
        series_json(pool, static_cast<int>(autocorr_reals[key].size()));
  for (const auto& [key, pool] : otoc_pools)
    summary["otoc"][key.first][std::to_string(key.second)] =
        series_json(pool, static_cast<int>(otoc_reals[key].size()));

  write_json_atomic(out_path, summary);
}

// ---------------------------------------------------------------------------
// plot data

namespace {

std::map<std::string, std::string> parse_series(const std::string& series) {
  std::map<std::string, std::string> out;
  std::istringstream ss(series);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("plot-data: series items must be key=value");
    std::string key = item.substr(0, eq);
    if (key == "L" || key == "dim") key = "size";
    out[key] = item.substr(eq + 1);
  }
  return out;
}

// Picks the unique (model, size) entry matching the series selector, or
// errors listing what is available.
std::pair<std::string, std::string> pick_entry(
    const json& tree, const std::map<std::string, std::string>& sel,
    const std::string& size_key = "size") {
  std::vector<std::pair<std::string, std::string>> available;
  for (const auto& [model, sizes] : tree.items())
    for (const auto& [size, entry] : sizes.items()) available.push_back({model, size});
  std::vector<std::pair<std::string, std::string>> matching;
  for (const auto& [model, size] : available) {
    if (const auto it = sel.find("model"); it != sel.end() && it->second != model)
      continue;
    if (const auto it = sel.find(size_key); it != sel.end() && it->second != size)
      continue;
    matching.push_back({model, size});
  }
  if (matching.size() == 1) return matching.front();
  std::string listing;
  for (const auto& [model, size] : available)
    listing += " model=" + model + "," + size_key + "=" + size;
  if (matching.empty())
    throw std::invalid_argument("plot-data: no series matches; available:" + listing);
  throw std::invalid_argument("plot-data: ambiguous series; available:" + listing);
}

}  // namespace

std::vector<std::string> plot_kinds() {
  return {"mp-density", "lambda-max-hist", "gev-fit",  "R-vs-L",
          "dkl-vs-L",   "eth-scaling",     "autocorr", "otoc"};
}

void emit_plot_data(const std::string& summary_path, const std::string& kind,
                    const std::string& out_csv, const std::string& series) {
  std::ifstream in(summary_path);
  if (!in) throw std::runtime_error("cannot open summary " + summary_path);
  json summary;
  in >> summary;
  const auto sel = series.empty() ? std::map<std::string, std::string>{}
                                  : parse_series(series);

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot open " + out_csv);

  const auto densities = [](const json& hist) {
    const auto edges = hist["edges"].get<std::vector<double>>();
    const auto counts = hist["counts"].get<std::vector<double>>();
    double total = 0;
    for (const double c : counts) total += c;
    std::vector<double> x, d;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      x.push_back(0.5 * (edges[i] + edges[i + 1]));
      const double width = edges[i + 1] - edges[i];
      d.push_back(total > 0 ? counts[i] / total / width : 0.0);
    }
    return std::make_pair(x, d);
  };

  if (kind == "mp-density") {
    if (!summary.contains("spectrum"))
      throw std::invalid_argument("plot-data: summary has no spectrum section");
    const auto [model, size] = pick_entry(summary["spectrum"], sel);
    const json& entry = summary["spectrum"][model][size];
    const auto [x, d] = densities(entry);
    out << "# kind: mp-density; series: model=" << model << ",size=" << size
        << "; x: rescaled schmidt coefficient; reference: marchenko-pastur\n";
    out << "e_rescaled,density_model,density_mp\n";
    for (std::size_t i = 0; i < x.size(); ++i)
      out << g17(x[i]) << ',' << g17(d[i]) << ',' << g17(mp_density(x[i])) << '\n';
  } else if (kind == "lambda-max-hist" || kind == "gev-fit") {
    if (!summary.contains("lambda_max"))
      throw std::invalid_argument("plot-data: summary has no lambda_max section");
    const auto [model, size] = pick_entry(summary["lambda_max"], sel);
    const json& entry = summary["lambda_max"][model][size];
    if (kind == "lambda-max-hist") {
      const auto [x, d] = densities(entry["hist"]);
      out << "# kind: lambda-max-hist; series: model=" << model << ",size=" << size
          << "; x: rescaled largest schmidt coefficient\n";
      out << "lambda_rescaled,density\n";
      for (std::size_t i = 0; i < x.size(); ++i)
        out << g17(x[i]) << ',' << g17(d[i]) << '\n';
    } else {
      if (!entry.contains("gev"))
        throw std::invalid_argument("plot-data: no extreme-value fit in summary");
      const auto [x, d] = densities(entry["hist_lambda"]);
      const double loc = entry["gev"]["location"], scale = entry["gev"]["scale"],
                   shape = entry["gev"]["shape"];
      out << "# kind: gev-fit; series: model=" << model << ",size=" << size
          << "; x: largest schmidt coefficient; fit: location " << g17(loc)
          << " scale " << g17(scale) << " shape " << g17(shape) << "\n";
      out << "lambda_max,density_data,density_fit\n";
      for (std::size_t i = 0; i < x.size(); ++i)
        out << g17(x[i]) << ',' << g17(d[i]) << ','
            << g17(gev_density((x[i] - loc) / scale, shape) / scale) << '\n';
    }
  } else if (kind == "R-vs-L" || kind == "dkl-vs-L") {
    if (!summary.contains("lambda_max"))
      throw std::invalid_argument("plot-data: summary has no lambda_max section");
    std::string model;
    if (const auto it = sel.find("model"); it != sel.end()) model = it->second;
    const json& tree = summary["lambda_max"];
    if (model.empty()) {
      if (tree.size() == 1)
        model = tree.items().begin().key();
      else
        throw std::invalid_argument(
            "plot-data: several models present; pass --series model=<name>");
    }
    if (!tree.contains(model))
      throw std::invalid_argument("plot-data: no such model " + model);
    const char* field = kind == "R-vs-L" ? "ratio_R" : "dkl_vs_wishart";
    out << "# kind: " << kind << "; model: " << model
        << "; x: chain length; y: " << field << "\n";
    out << "L," << (kind == "R-vs-L" ? "R" : "dkl") << "\n";
    std::map<int, double> rows;
    for (const auto& [size, entry] : tree[model].items())
      if (entry.contains(field)) rows[std::stoi(size)] = entry[field];
    for (const auto& [size, value] : rows)
      out << size << ',' << g17(value) << '\n';
  } else if (kind == "eth-scaling") {
    if (!summary.contains("eth"))
      throw std::invalid_argument("plot-data: summary has no eth section");
    std::string model = sel.count("model") ? sel.at("model") : "";
    if (model.empty()) {
      if (summary["eth"].size() == 1)
        model = summary["eth"].items().begin().key();
      else
        throw std::invalid_argument(
            "plot-data: several models present; pass --series model=<name>");
    }
    const std::string metric = sel.count("metric") ? sel.at("metric") : "mean_gap";
    if (metric != "mean_gap" && metric != "max_gap" && metric != "offdiag_rms")
      throw std::invalid_argument(
          "plot-data: metric must be mean_gap, max_gap, or offdiag_rms");
    const json& entry = summary["eth"][model];
    const std::string fit_key =
        metric == "offdiag_rms" ? "offdiag" : metric;
    double prefactor = 0, decay = 0;
    if (entry.contains("fits")) {
      prefactor = entry["fits"][fit_key]["prefactor"];
      decay = entry["fits"][fit_key]["decay"];
    }
    out << "# kind: eth-scaling; model: " << model << "; metric: " << metric
        << "; fit: prefactor " << g17(prefactor) << " decay " << g17(decay)
        << "\n";
    out << "L,value,fit\n";
    std::map<int, double> rows;
    for (const auto& [size, e] : entry["per_size"].items())
      rows[std::stoi(size)] = e[metric];
    for (const auto& [size, value] : rows)
      out << size << ',' << g17(value) << ','
          << g17(prefactor * std::exp2(-double(size) / decay)) << '\n';
  } else if (kind == "autocorr" || kind == "otoc") {
    if (!summary.contains(kind))
      throw std::invalid_argument("plot-data: summary has no " + kind + " section");
    const auto [model, size] = pick_entry(summary[kind], sel);
    const json& entry = summary[kind][model][size];
    out << "# kind: " << kind << "; series: model=" << model << ",size=" << size
        << "; x: kick periods; y: ensemble mean magnitude with standard error\n";
    out << "t,mean_abs,stderr\n";
    const auto t = entry["t"].get<std::vector<int>>();
    const auto mean = entry["mean_abs"].get<std::vector<double>>();
    const auto err = entry["stderr_abs"].get<std::vector<double>>();
    for (std::size_t i = 0; i < t.size(); ++i)
      out << t[i] << ',' << g17(mean[i]) << ',' << g17(err[i]) << '\n';
  } else {
    std::string listing;
    for (const auto& k : plot_kinds()) listing += " " + k;
    throw std::invalid_argument("plot-data: unknown kind '" + kind +
                                "'; available:" + listing);
  }
}

}  // namespace kfim
