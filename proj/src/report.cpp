#include "budgetcl/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace budgetcl {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_real(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw DataError("cannot parse number '" + text + "'");
  return v;
}

std::string run_csv_text(const RunLog& log) {
  std::ostringstream out;
  out << "# budgetcl run log\n";
  out << "# config: " << log.config_echo.dump() << '\n';
  out << "# method_class: " << log.method_class << '\n';
  out << "# budget_mode: " << log.budget_mode << '\n';
  out << "# allotted_iterations: " << log.allotted_iterations << '\n';
  out << kRunCsvHeader << '\n';
  for (const auto& r : log.rows) {
    out << r.step << ',' << format_real(r.overall_acc) << ',' << format_real(r.pretrain_acc) << ','
        << format_real(r.stream_acc) << ',' << r.iterations;
    for (const double u : r.units) out << ',' << format_real(u);
    out << '\n';
  }
  return out.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("cannot write '" + tmp.string() + "'");
    f << text;
    if (!f) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

double RunCsv::average_acc() const {
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : rows) total += r.overall_acc;
  return total / static_cast<double>(rows.size());
}

RunCsv read_run_csv(const std::filesystem::path& path) {
  std::filesystem::path file = path;
  RunCsv run;
  if (std::filesystem::is_directory(path)) {
    file = path / "run.csv";
    run.name = path.filename().string();
    if (run.name.empty()) run.name = path.parent_path().filename().string();
  } else {
    run.name = path.stem().string();
  }
  std::ifstream in(file);
  if (!in) throw DataError("cannot open run log '" + file.string() + "'");
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      run.comments.push_back(line);
      continue;
    }
    if (!header_seen) {
      if (line != kRunCsvHeader) throw DataError(file.string() + ": unexpected header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw DataError(file.string() + ": expected 10 columns");
    MetricsRow r;
    r.step = std::stoi(f[0]);
    r.overall_acc = parse_real(f[1]);
    r.pretrain_acc = parse_real(f[2]);
    r.stream_acc = parse_real(f[3]);
    r.iterations = std::stoll(f[4]);
    for (std::size_t c = 0; c < kNumCategories; ++c) r.units[c] = parse_real(f[5 + c]);
    run.rows.push_back(r);
  }
  if (!header_seen) throw DataError(file.string() + ": missing header");
  return run;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (const char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string render_svg(const std::vector<RunCsv>& runs) {
  constexpr double panel_w = 360, panel_h = 260, margin = 50, gap = 30;
  const double legend_h = 24.0 * static_cast<double>(runs.size()) + 20;
  const double width = margin * 2 + panel_w * 3 + gap * 2;
  const double height = margin * 2 + panel_h + legend_h;
  int max_step = 1;
  for (const auto& r : runs) {
    for (const auto& row : r.rows) max_step = std::max(max_step, row.step);
  }

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  const char* titles[] = {"Overall accuracy", "Pretrain-class accuracy", "Stream-class accuracy"};
  for (int p = 0; p < 3; ++p) {
    const double x0 = margin + p * (panel_w + gap);
    const double y0 = margin;
    svg << "<g class=\"panel\">\n";
    svg << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << y0 - 12 << "\" text-anchor=\"middle\">" << titles[p]
        << "</text>\n";
    svg << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << panel_w << "\" height=\"" << panel_h
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
      const double y = y0 + panel_h * (1.0 - tick / 4.0);
      svg << "<text x=\"" << x0 - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << tick * 25 << "</text>\n";
    }
    svg << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << y0 + panel_h + 18 << "\" text-anchor=\"middle\">step (1.."
        << max_step << ")</text>\n";
    for (std::size_t r = 0; r < runs.size(); ++r) {
      svg << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[r % 10] << "\" points=\"";
      bool first = true;
      for (const auto& row : runs[r].rows) {
        const double v = p == 0 ? row.overall_acc : p == 1 ? row.pretrain_acc : row.stream_acc;
        if (std::isnan(v)) continue;
        const double x = max_step > 1 ? x0 + panel_w * (row.step - 1) / (max_step - 1) : x0 + panel_w / 2;
        const double y = y0 + panel_h * (1.0 - v);
        svg << (first ? "" : " ") << x << ',' << y;
        first = false;
      }
      svg << "\"/>\n";
    }
    svg << "</g>\n";
  }

  svg << "<g class=\"legend\">\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const double y = margin + panel_h + 40 + 24.0 * static_cast<double>(r);
    char avg[32];
    std::snprintf(avg, sizeof(avg), "%.4f", runs[r].average_acc());
    svg << "<line x1=\"" << margin << "\" y1=\"" << y - 4 << "\" x2=\"" << margin + 24 << "\" y2=\"" << y - 4
        << "\" stroke=\"" << kPalette[r % 10] << "\" stroke-width=\"3\"/>\n";
    svg << "<text class=\"legend-entry\" x=\"" << margin + 32 << "\" y=\"" << y << "\">" << xml_escape(runs[r].name)
        << "</text>\n";
    svg << "<text class=\"average-acc\" x=\"" << margin + 360 << "\" y=\"" << y << "\">average_acc "
        << xml_escape(runs[r].name) << " = " << avg << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

}  // namespace budgetcl
