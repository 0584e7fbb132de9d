#include "budgetcl/commands.hpp"

#include "budgetcl/report.hpp"
#include "budgetcl/runner.hpp"

#include <cstdlib>
#include <future>
#include <ostream>

namespace budgetcl {

namespace fs = std::filesystem;

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "time_steps") return SweepAxis::time_steps;
  if (s == "budget") return SweepAxis::budget;
  throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base, SweepAxis axis,
                                            const std::vector<long long>& values) {
  if (values.empty()) throw std::invalid_argument("sweep: no values given");
  const long long total = base.iterations_per_step * base.stream.num_steps;
  std::vector<ExperimentConfig> out;
  for (const long long v : values) {
    if (v < 1) throw std::invalid_argument("sweep: values must be positive");
    ExperimentConfig c = base;
    if (axis == SweepAxis::time_steps) {
      if (total % v != 0) {
        throw std::invalid_argument("sweep: T=" + std::to_string(v) + " does not divide T*C=" + std::to_string(total));
      }
      c.stream.num_steps = static_cast<int>(v);
      c.iterations_per_step = total / v;
      c.name = base.name + "_T" + std::to_string(v);
    } else {
      c.iterations_per_step = v;
      c.name = base.name + "_C" + std::to_string(v);
    }
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

void run_into(const ExperimentConfig& config, const fs::path& out_dir) {
  const RunResult result = run_experiment(config);
  fs::create_directories(out_dir);
  save_checkpoint(result.model, out_dir / "model.ckpt");
  write_text_atomic(out_dir / "run.csv", run_csv_text(result.log));
}

ExperimentConfig load_with_env(const fs::path& config_path) {
  ExperimentConfig config = load_config(config_path);
  apply_seed_override(config, std::getenv(kSeedEnvVar));
  return config;
}

}  // namespace

int cmd_run(const fs::path& config_path, const fs::path& out_dir, std::ostream& err) {
  try {
    run_into(load_with_env(config_path), out_dir);
    return 0;
  } catch (const std::exception& e) {
    err << "budgetcl run: " << e.what() << '\n';
    return 1;
  }
}

int cmd_sweep(const fs::path& config_path, SweepAxis axis, const std::vector<long long>& values, const fs::path& out_dir,
              std::ostream& err) {
  try {
    const auto configs = sweep_configs(load_with_env(config_path), axis, values);
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const std::string dir = (axis == SweepAxis::time_steps ? "time_steps_" : "budget_") + std::to_string(values[i]);
      jobs.push_back(std::async(std::launch::async, [&, i, dir] { run_into(configs[i], out_dir / dir); }));
    }
    int status = 0;
    for (auto& j : jobs) {
      try {
        j.get();
      } catch (const std::exception& e) {
        err << "budgetcl sweep: " << e.what() << '\n';
        status = 1;
      }
    }
    return status;
  } catch (const std::exception& e) {
    err << "budgetcl sweep: " << e.what() << '\n';
    return 1;
  }
}

int cmd_report(const std::vector<fs::path>& runs, const fs::path& out_svg, std::ostream& err) {
  std::vector<RunCsv> loaded;
  for (const auto& r : runs) {
    try {
      loaded.push_back(read_run_csv(r));
    } catch (const std::exception& e) {
      err << "budgetcl report: skipping " << r.string() << ": " << e.what() << '\n';
    }
  }
  if (loaded.empty()) {
    err << "budgetcl report: no readable runs\n";
    return 1;
  }
  try {
    write_text_atomic(out_svg, render_svg(loaded));
  } catch (const std::exception& e) {
    err << "budgetcl report: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

fs::path synth_test_path(const fs::path& out_path) {
  return out_path.parent_path() / (out_path.stem().string() + "_test" + out_path.extension().string());
}

int cmd_synth(const SyntheticSpec& spec, const fs::path& out_path, std::ostream& err) {
  try {
    const Dataset ds = generate_synthetic(spec);
    auto [train, test] = holdout_split(ds, 0.1);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_csv(train, out_path);
    write_csv(test, synth_test_path(out_path));
    return 0;
  } catch (const std::exception& e) {
    err << "budgetcl synth: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace budgetcl
