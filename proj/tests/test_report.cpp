#include "budgetcl/report.hpp"

#include "doctest.h"
#include "toy.hpp"
#include "xml_check.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

using namespace budgetcl;
namespace fs = std::filesystem;

namespace {

RunLog sample_log() {
  RunLog log;
  log.config_echo = {{"name", "demo"}};
  log.method_class = "naive";
  log.budget_mode = "paper";
  log.allotted_iterations = 7;
  for (int s = 1; s <= 3; ++s) {
    MetricsRow r;
    r.step = s;
    r.overall_acc = 0.1 * s + 1.0 / 3.0;
    r.pretrain_acc = s == 1 ? std::numeric_limits<double>::quiet_NaN() : 0.123456789012345678;
    r.stream_acc = 1e-17 * s;
    r.iterations = 7;
    r.units = {21.0 * s, 42.0 * s, 0.0, 3.0, 0.5};
    log.rows.push_back(r);
  }
  return log;
}

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / "budgetcl_test_report";
  fs::create_directories(d);
  return d;
}

bool same_real(double a, double b) { return (std::isnan(a) && std::isnan(b)) || std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("real formatting round-trips bit-exactly") {
  for (double v : {0.0, 1.0 / 3.0, 0.1, 1e-300, 123456.789, -2.5}) CHECK(parse_real(format_real(v)) == v);
  CHECK(std::isnan(parse_real(format_real(std::nan("")))));
  CHECK_THROWS(parse_real("0.5x"));
}

TEST_CASE("CSV text layout") {
  const std::string text = run_csv_text(sample_log());
  CHECK(text.rfind("# budgetcl run log\n# config: {\"name\":\"demo\"}\n", 0) == 0);
  CHECK(text.find(std::string(kRunCsvHeader) + "\n") != std::string::npos);
  CHECK(text.find("\n1,") != std::string::npos);
  CHECK(xml_check::count(text, "\n") == 5 + 1 + 3);
}

TEST_CASE("parsed CSV values equal the in-memory rows exactly") {
  const RunLog log = sample_log();
  const fs::path dir = scratch() / "run_a";
  fs::create_directories(dir);
  write_text_atomic(dir / "run.csv", run_csv_text(log));
  const RunCsv back = read_run_csv(dir);
  CHECK(back.name == "run_a");
  CHECK(back.comments.size() == 5);
  REQUIRE(back.rows.size() == log.rows.size());
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    const auto& a = log.rows[i];
    const auto& b = back.rows[i];
    CHECK(a.step == b.step);
    CHECK(a.iterations == b.iterations);
    CHECK(same_real(a.overall_acc, b.overall_acc));
    CHECK(same_real(a.pretrain_acc, b.pretrain_acc));
    CHECK(same_real(a.stream_acc, b.stream_acc));
    for (std::size_t c = 0; c < kNumCategories; ++c) CHECK(same_real(a.units[c], b.units[c]));
  }
  CHECK(back.average_acc() == doctest::Approx(log.average_acc()));
}

TEST_CASE("real run logs round-trip through the reader") {
  const RunResult r = run_experiment(toy::tiny(2));
  const fs::path file = scratch() / "tiny.csv";
  write_text_atomic(file, run_csv_text(r.log));
  const RunCsv back = read_run_csv(file);
  CHECK(back.name == "tiny");
  REQUIRE(back.rows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(same_real(back.rows[i].overall_acc, r.log.rows[i].overall_acc));
    CHECK(back.rows[i].units == r.log.rows[i].units);
  }
}

TEST_CASE("malformed run logs are rejected") {
  const fs::path f = scratch() / "bad.csv";
  write_text_atomic(f, "step,overall_acc\n1,0.5\n");
  CHECK_THROWS(read_run_csv(f));
  write_text_atomic(f, std::string(kRunCsvHeader) + "\n1,0.5,0.5\n");
  CHECK_THROWS(read_run_csv(f));
  CHECK_THROWS(read_run_csv(scratch() / "nope"));
}

TEST_CASE("SVG has one polyline per run per panel and a legend") {
  RunCsv a{"alpha", {}, {}}, b{"beta & co", {}, {}};
  for (const auto& r : sample_log().rows) {
    a.rows.push_back(r);
    b.rows.push_back(r);
  }
  const std::string one = render_svg({a});
  const auto check_one = xml_check::well_formed(one);
  CHECK_MESSAGE(check_one.ok, check_one.error);
  CHECK(xml_check::count(one, "<polyline") == 3);

  const std::string two = render_svg({a, b});
  const auto check_two = xml_check::well_formed(two);
  CHECK_MESSAGE(check_two.ok, check_two.error);
  CHECK(xml_check::count(two, "<polyline") == 6);
  CHECK(xml_check::count(two, "class=\"legend-entry\"") == 2);
  CHECK(two.find("beta &amp; co") != std::string::npos);

  char expected[64];
  std::snprintf(expected, sizeof expected, "average_acc alpha = %.4f", a.average_acc());
  CHECK(two.find(expected) != std::string::npos);
}

TEST_CASE("the XML checker itself rejects broken documents") {
  CHECK(xml_check::well_formed("<a><b/></a>").ok);
  CHECK_FALSE(xml_check::well_formed("<a><b></a>").ok);
  CHECK_FALSE(xml_check::well_formed("<a x=1/>").ok);
  CHECK_FALSE(xml_check::well_formed("<a>&bogus;</a>").ok);
  CHECK_FALSE(xml_check::well_formed("<a/><b/>").ok);
}
