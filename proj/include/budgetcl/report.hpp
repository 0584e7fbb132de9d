#pragma once

#include "budgetcl/runner.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace budgetcl {

inline constexpr const char* kRunCsvHeader =
    "step,overall_acc,pretrain_acc,stream_acc,iters,units_train_fwd,units_train_bwd,units_teacher_fwd,"
    "units_select_fwd,units_calib_fwd";

/// Shortest decimal form that parses back to the same double; "nan" for NaN.
std::string format_real(double v);
double parse_real(const std::string& text);

/// Commented config echo lines followed by the header and one row per step.
std::string run_csv_text(const RunLog& log);
/// Writes through a temporary file so a failed run never leaves a partial CSV.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

struct RunCsv {
  std::string name;
  std::vector<std::string> comments;
  std::vector<MetricsRow> rows;

  double average_acc() const;
};

/// Accepts a run directory (reads run.csv inside it) or a CSV path.
RunCsv read_run_csv(const std::filesystem::path& path);

/// Three panels (overall / pretrain / stream accuracy per step), one polyline
/// per run per panel, a legend, and each run's average accuracy.
std::string render_svg(const std::vector<RunCsv>& runs);

}  // namespace budgetcl
