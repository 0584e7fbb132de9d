#include "budgetcl/commands.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <sstream>

namespace {

std::vector<long long> parse_values(const std::string& csv) {
  std::vector<long long> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(std::stoll(item));
  }
  return out;
}

std::vector<std::filesystem::path> split_paths(const std::string& csv) {
  std::vector<std::filesystem::path> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"budgetcl: compute-budgeted continual learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out;

  auto* run = app.add_subcommand("run", "Run one experiment and write run.csv + model.ckpt");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output directory")->required();

  std::string axis, values;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per value along an axis");
  sweep->add_option("--config", config_path, "Base experiment config (JSON)")->required();
  sweep->add_option("--axis", axis, "time_steps | budget")->required()->check(CLI::IsMember({"time_steps", "budget"}));
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", out, "Output directory")->required();

  std::string runs;
  auto* report = app.add_subcommand("report", "Render run CSVs as an SVG");
  report->add_option("--runs", runs, "Comma-separated run directories or CSV files")->required();
  report->add_option("--out", out, "Output SVG file")->required();

  budgetcl::SyntheticSpec spec;
  auto* synth = app.add_subcommand("synth", "Write a synthetic Gaussian dataset and its held-out test split");
  synth->add_option("--classes", spec.num_classes, "Number of classes");
  synth->add_option("--per-class", spec.per_class, "Samples per class");
  synth->add_option("--dim", spec.feature_dim, "Feature dimension");
  synth->add_option("--mean-scale", spec.class_mean_scale, "Scale of the class means");
  synth->add_option("--noise", spec.noise_sigma, "Per-feature noise standard deviation");
  synth->add_option("--drift", spec.drift_per_unit_time, "Drift magnitude over the full time range");
  synth->add_option("--seed", spec.seed, "Generator seed");
  synth->add_option("--out", out, "Output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run) return budgetcl::cmd_run(config_path, out, std::cerr);
  if (*sweep) {
    std::vector<long long> parsed;
    try {
      parsed = parse_values(values);
    } catch (const std::exception&) {
      std::cerr << "budgetcl sweep: --values must be comma-separated integers\n";
      return 1;
    }
    return budgetcl::cmd_sweep(config_path, budgetcl::parse_sweep_axis(axis), parsed, out, std::cerr);
  }
  if (*report) return budgetcl::cmd_report(split_paths(runs), out, std::cerr);
  if (*synth) return budgetcl::cmd_synth(spec, out, std::cerr);
  return 1;
}
