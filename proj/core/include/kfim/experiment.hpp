#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kfim/spectral.hpp"

namespace kfim {

enum class ExperimentKind {
  SchmidtStats,
  GevFit,
  WishartReference,
  Eth,
  Autocorr,
  Otoc,
  PolfedCheck,
};

enum class ModelKind { Kfim, Coe };
enum class SolverKind { Auto, Dense, Polfed };

std::string to_string(ExperimentKind kind);
std::string to_string(ModelKind model);
std::string to_string(SolverKind solver);
ExperimentKind experiment_kind_from_string(const std::string& name);

/// One orchestrated run: what to compute, at which sizes, how many disorder
/// realizations, and where results go. Defaults mirror the production
/// choices (couplings pi/4, extraction window at pi/2).
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::SchmidtStats;
  ModelKind model = ModelKind::Kfim;
  std::vector<int> sizes;
  std::map<int, int> realizations;  // per size; empty -> desk-scale defaults
  int eigenpairs = 0;               // per realization; 0 -> default window
  std::uint64_t seed = 1;
  SolverKind solver = SolverKind::Auto;
  FilterSpec filter;                 // target phase / residue threshold
  bool filter_overridden = false;    // use `filter` order/krylov_dim as given
  int bins = 100;
  int t_max = 100;

  int wishart_dim = 512;
  long wishart_draws = 100000;
  bool wishart_tridiagonal = false;
  bool wishart_spectrum = false;  // keep full spectra (dense, dim <= 256)

  bool otoc_stochastic = false;
  int otoc_probes = 16;

  double ising_coupling = pi / 4;
  double kick_strength = pi / 4;

  bool paper_scale = false;  // production realization counts instead of desk scale

  std::string input;  // sample CSV consumed by gev-fit
  std::string output_dir = "kfim-out";
};

ExperimentConfig load_config(const std::string& path);
void validate_config(const ExperimentConfig& config);

/// Number of eigenpairs kept per realization when the config does not pin
/// one: half the production Krylov dimension, capped at 128.
int default_window(int sites);

/// Desk-scale realization count for a given experiment and size.
int default_realizations(ExperimentKind kind, int sites);

/// Runs the experiment, writing per-realization CSV streams, a summary JSON,
/// and a manifest into config.output_dir. Re-running with the same config and
/// seed reproduces the CSV and summary bytes.
void run_experiment(const ExperimentConfig& config);

/// Pools every recognized CSV under `dir` into a summary JSON at `out_path`.
void aggregate(const std::string& dir, const std::string& out_path);

/// Writes one plot-ready CSV for the given kind from an aggregate summary.
/// `series` selects among multiple (model, size) series when present.
void emit_plot_data(const std::string& summary_path, const std::string& kind,
                    const std::string& out_csv, const std::string& series = "");

std::vector<std::string> plot_kinds();

}  // namespace kfim
