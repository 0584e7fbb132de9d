#include "budgetcl/stream.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace budgetcl {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

template <typename T>
T parse_number(const std::string& text, const std::string& where) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw DataError(where + ": cannot parse '" + text + "'");
  return value;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

bool Dataset::has_timestamps() const {
  return !samples.empty() &&
         std::all_of(samples.begin(), samples.end(), [](const Sample& s) { return s.timestamp.has_value(); });
}

void Dataset::validate() const {
  std::unordered_set<std::uint64_t> ids;
  for (const auto& s : samples) {
    if (s.features.size() != feature_dim) {
      throw DataError("sample " + std::to_string(s.id) + ": feature dimension " +
                      std::to_string(s.features.size()) + " != " + std::to_string(feature_dim));
    }
    if (s.label < 0 || s.label >= num_classes) {
      throw DataError("sample " + std::to_string(s.id) + ": label " + std::to_string(s.label) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
    if (!s.features.allFinite()) throw DataError("sample " + std::to_string(s.id) + ": non-finite feature");
    if (!ids.insert(s.id).second) throw DataError("duplicate sample id " + std::to_string(s.id));
  }
}

Ordering parse_ordering(const std::string& s) {
  if (s == "class_incremental") return Ordering::class_incremental;
  if (s == "data_incremental") return Ordering::data_incremental;
  if (s == "time_incremental") return Ordering::time_incremental;
  throw std::invalid_argument("unknown stream ordering '" + s + "'");
}

std::string to_string(Ordering o) {
  switch (o) {
    case Ordering::class_incremental: return "class_incremental";
    case Ordering::data_incremental: return "data_incremental";
    case Ordering::time_incremental: return "time_incremental";
  }
  return "?";
}

Dataset load_csv(const std::filesystem::path& path, std::optional<int> num_classes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  auto header = split_fields(line);
  for (auto& h : header) h = trim(h);

  if (header.size() < 2 || header[0] != "id") throw DataError(path.string() + ": header must start with 'id'");
  const bool has_ts = header[1] == "timestamp";
  const std::size_t label_col = has_ts ? 2 : 1;
  if (header.size() <= label_col || header[label_col] != "label") {
    throw DataError(path.string() + ": missing 'label' column");
  }
  const std::size_t first_feature = label_col + 1;
  const int dim = static_cast<int>(header.size() - first_feature);
  for (int j = 0; j < dim; ++j) {
    if (header[first_feature + j] != "f" + std::to_string(j)) {
      throw DataError(path.string() + ": expected column f" + std::to_string(j));
    }
  }

  Dataset ds;
  ds.feature_dim = dim;
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    Sample s;
    s.id = parse_number<std::uint64_t>(trim(fields[0]), where);
    if (has_ts) s.timestamp = parse_number<std::int64_t>(trim(fields[1]), where);
    s.label = parse_number<int>(trim(fields[label_col]), where);
    if (s.label < 0) throw DataError(where + ": negative label");
    if (num_classes && s.label >= *num_classes) {
      throw DataError(where + ": label " + std::to_string(s.label) + " out of range");
    }
    s.features.resize(dim);
    for (int j = 0; j < dim; ++j) s.features(j) = parse_number<double>(trim(fields[first_feature + j]), where);
    max_label = std::max(max_label, s.label);
    ds.samples.push_back(std::move(s));
  }
  ds.num_classes = num_classes.value_or(max_label + 1);
  ds.validate();
  return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  const bool has_ts = ds.has_timestamps();
  std::string out = has_ts ? "id,timestamp,label" : "id,label";
  for (int j = 0; j < ds.feature_dim; ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (const auto& s : ds.samples) {
    out += std::to_string(s.id);
    if (has_ts) out += "," + std::to_string(*s.timestamp);
    out += "," + std::to_string(s.label);
    for (Eigen::Index j = 0; j < s.features.size(); ++j) {
      out += ',';
      append_double(out, s.features(j));
    }
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << out;
  if (!f) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<Sample> order_stream(const Dataset& ds, const StreamSpec& spec) {
  std::vector<Sample> out = ds.samples;
  switch (spec.ordering) {
    case Ordering::class_incremental:
      std::sort(out.begin(), out.end(),
                [](const Sample& a, const Sample& b) { return std::tie(a.label, a.id) < std::tie(b.label, b.id); });
      break;
    case Ordering::data_incremental: {
      // Canonical id order first, so the permutation depends only on content and seed.
      std::sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) { return a.id < b.id; });
      std::mt19937_64 rng(spec.seed);
      for (std::size_t i = out.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(out[i - 1], out[pick(rng)]);
      }
      break;
    }
    case Ordering::time_incremental:
      if (!ds.has_timestamps()) throw DataError("time_incremental ordering requires timestamps on every sample");
      std::sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) {
        return std::tie(*a.timestamp, a.id) < std::tie(*b.timestamp, b.id);
      });
      break;
  }
  return out;
}

std::vector<StepBatch> partition_steps(const std::vector<Sample>& ordered, int num_steps) {
  if (num_steps < 1) throw std::invalid_argument("partition_steps: need at least one step");
  const std::size_t n = ordered.size();
  const auto steps = static_cast<std::size_t>(num_steps);
  if (steps > n) {
    throw std::invalid_argument("partition_steps: " + std::to_string(steps) + " steps for " + std::to_string(n) +
                                " samples");
  }
  const std::size_t base = n / steps;
  const std::size_t extra = n % steps;
  std::vector<StepBatch> out(steps);
  std::size_t pos = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t len = base + (t < extra ? 1 : 0);
    out[t].step_index = static_cast<int>(t);
    out[t].samples.assign(ordered.begin() + static_cast<std::ptrdiff_t>(pos),
                          ordered.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

namespace {

void check_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 1 || spec.per_class < 1 || spec.feature_dim < 1) {
    throw std::invalid_argument("synthetic spec: classes, per_class and feature_dim must be positive");
  }
  if (!(spec.noise_sigma > 0)) throw std::invalid_argument("synthetic spec: noise_sigma must be positive");
  if (!std::isfinite(spec.class_mean_scale) || !std::isfinite(spec.drift_per_unit_time)) {
    throw std::invalid_argument("synthetic spec: non-finite scale");
  }
}

SyntheticGeometry draw_geometry(const SyntheticSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SyntheticGeometry g;
  g.class_means.resize(spec.num_classes, spec.feature_dim);
  for (Eigen::Index i = 0; i < g.class_means.size(); ++i) {
    g.class_means.data()[i] = normal(rng) * spec.class_mean_scale;
  }
  g.drift_direction.resize(spec.feature_dim);
  do {
    for (auto& v : g.drift_direction) v = normal(rng);
  } while (g.drift_direction.norm() == 0.0);
  g.drift_direction.normalize();
  return g;
}

}  // namespace

SyntheticGeometry synthetic_geometry(const SyntheticSpec& spec) {
  check_synthetic(spec);
  std::mt19937_64 rng(spec.seed);
  return draw_geometry(spec, rng);
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  check_synthetic(spec);
  std::mt19937_64 rng(spec.seed);
  const SyntheticGeometry g = draw_geometry(spec, rng);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);

  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.feature_dim = spec.feature_dim;
  const std::size_t total = static_cast<std::size_t>(spec.num_classes) * static_cast<std::size_t>(spec.per_class);
  ds.samples.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    Sample s;
    s.id = i;
    s.label = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
    s.timestamp = static_cast<std::int64_t>(i);
    const double t_norm = total > 1 ? static_cast<double>(i) / static_cast<double>(total - 1) : 0.0;
    s.features = g.class_means.row(s.label).transpose() + spec.drift_per_unit_time * t_norm * g.drift_direction;
    for (auto& v : s.features) v += noise(rng);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::pair<Dataset, Dataset> holdout_split(const Dataset& ds, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout_split: fraction must be in [0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) by_class[ds.samples[i].label].push_back(i);

  std::vector<bool> held(ds.samples.size(), false);
  for (const auto& [label, idx] : by_class) {
    auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size())));
    if (k == 0 && fraction > 0.0 && idx.size() >= 2) k = 1;
    for (std::size_t j = idx.size() - k; j < idx.size(); ++j) held[idx[j]] = true;
  }

  Dataset keep, out;
  keep.num_classes = out.num_classes = ds.num_classes;
  keep.feature_dim = out.feature_dim = ds.feature_dim;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) (held[i] ? out : keep).samples.push_back(ds.samples[i]);
  return {std::move(keep), std::move(out)};
}

}  // namespace budgetcl
