#pragma once

#include "budgetcl/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace budgetcl {

enum class SweepAxis { time_steps, budget };
SweepAxis parse_sweep_axis(const std::string& s);

/// Member configs of a sweep. time_steps rescales C so that T * C stays at
/// the base value (values that do not divide it are rejected); budget sets C
/// and keeps T.
std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base, SweepAxis axis,
                                            const std::vector<long long>& values);

// Each command returns a process exit code and reports failures on `err`.
int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_dir, std::ostream& err);
int cmd_sweep(const std::filesystem::path& config_path, SweepAxis axis, const std::vector<long long>& values,
              const std::filesystem::path& out_dir, std::ostream& err);
int cmd_report(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out_svg, std::ostream& err);
/// Writes the dataset to `out_path` minus a 10%-per-class held-out test
/// split, which goes to `<stem>_test<ext>` beside it.
int cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& out_path, std::ostream& err);

std::filesystem::path synth_test_path(const std::filesystem::path& out_path);

}  // namespace budgetcl
