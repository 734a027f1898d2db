#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kfim/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kicked-chain spectral statistics toolkit"};
  app.require_subcommand(1);

  std::string config_path, output_override;
  CLI::App* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--output-dir", output_override, "override the config output directory");

  std::string agg_dir, agg_out = "summary.json";
  CLI::App* agg = app.add_subcommand("aggregate", "pool result CSVs into a summary JSON");
  agg->add_option("dir", agg_dir, "directory to scan recursively")->required();
  agg->add_option("-o,--output", agg_out, "summary file to write");

  std::string summary_path, kind, plot_out = "plot.csv", series;
  CLI::App* plot = app.add_subcommand("plot-data", "emit a plot-ready CSV from a summary");
  plot->add_option("summary", summary_path, "aggregate summary JSON")->required();
  plot->add_option("--kind", kind, "what to emit")->required();
  plot->add_option("-o,--output", plot_out, "CSV file to write");
  plot->add_option("--series", series,
                   "series selector, e.g. model=kfim,L=12 or metric=mean_gap");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      kfim::ExperimentConfig config = kfim::load_config(config_path);
      if (!output_override.empty()) config.output_dir = output_override;
      kfim::run_experiment(config);
      std::cout << "results written to " << config.output_dir << '\n';
    } else if (agg->parsed()) {
      kfim::aggregate(agg_dir, agg_out);
      std::cout << "summary written to " << agg_out << '\n';
    } else if (plot->parsed()) {
      kfim::emit_plot_data(summary_path, kind, plot_out, series);
      std::cout << "plot data written to " << plot_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
