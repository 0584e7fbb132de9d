#include "budgetcl/config.hpp"

#include <fstream>

namespace budgetcl {

using nlohmann::json;

std::string to_string(Correction c) {
  switch (c) {
    case Correction::none: return "none";
    case Correction::cosfc: return "cosfc";
    case Correction::ace: return "ace";
    case Correction::bic: return "bic";
    case Correction::wa: return "wa";
    case Correction::temperature: return "temperature";
  }
  return "?";
}

Correction parse_correction(const std::string& s) {
  for (auto c : {Correction::none, Correction::cosfc, Correction::ace, Correction::bic, Correction::wa,
                 Correction::temperature}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError("unknown correction '" + s + "'");
}

MethodClass MethodSpec::method_class() const {
  if (scope == TrainableScope::head_only) return MethodClass::linear_probe;
  if (sampling.costly()) return MethodClass::costly_sampling;
  if (loss.distill != DistillKind::none) return MethodClass::distillation;
  if (correction != Correction::none || loss.task == TaskLoss::ace) return MethodClass::fc_correction;
  return MethodClass::naive;
}

void MethodSpec::validate(Ordering ordering) const {
  loss.validate();
  const int overheads = (scope == TrainableScope::head_only) + sampling.costly() + (loss.distill != DistillKind::none);
  if (overheads > 1) {
    throw ConfigError("method combines more than one of linear probing, costly sampling and distillation");
  }
  if (correction == Correction::bic && ordering != Ordering::class_incremental) {
    throw ConfigError("bic correction is only defined for class_incremental streams");
  }
  if (sampling.kind == SamplingKind::recency && !(sampling.recency_decay > 0 && sampling.recency_decay <= 1)) {
    throw ConfigError("recency_decay must lie in (0, 1]");
  }
}

void ExperimentConfig::validate() const {
  if (iterations_per_step < 1) throw ConfigError("iterations_per_step must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (probe_lr && !(*probe_lr > 0)) throw ConfigError("probe_lr must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
  if (stream.num_steps < 1) throw ConfigError("stream.num_steps must be at least 1");
  if (!(calibration_holdout > 0 && calibration_holdout < 1)) throw ConfigError("calibration_holdout must lie in (0, 1)");
  if (!(cosine_scale > 0)) throw ConfigError("cosine_scale must be positive");
  if (data.synthetic) {
    if (data.stream || data.pretrain || data.test) throw ConfigError("data: give either synthetic or file paths");
    const auto& s = *data.synthetic;
    if (s.pretrain_classes < 0 || s.pretrain_classes >= s.spec.num_classes) {
      throw ConfigError("synthetic.pretrain_classes must leave at least one stream class");
    }
    if (!(s.test_fraction > 0 && s.test_fraction < 1)) throw ConfigError("synthetic.test_fraction must lie in (0, 1)");
  } else if (!data.stream || !data.test) {
    throw ConfigError("data: stream and test datasets are required");
  }
  method.validate(stream.ordering);
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"name", "data", "stream", "iterations_per_step", "batch_size", "lr", "probe_lr", "weight_decay",
                  "method", "budget_mode", "erm_oracle", "charge_calibration", "calibration_holdout", "model",
                  "pretrain", "seeds"},
                 "config");
  ExperimentConfig c;
  try {
    read(j, "name", c.name);
    if (auto it = j.find("data"); it != j.end()) {
      const json& d = *it;
      reject_unknown(d, {"pretrain", "stream", "test", "synthetic"}, "data");
      if (d.contains("pretrain")) c.data.pretrain = resolve(base_dir, d["pretrain"].get<std::string>());
      if (d.contains("stream")) c.data.stream = resolve(base_dir, d["stream"].get<std::string>());
      if (d.contains("test")) c.data.test = resolve(base_dir, d["test"].get<std::string>());
      if (d.contains("synthetic")) {
        const json& s = d["synthetic"];
        reject_unknown(s,
                       {"num_classes", "per_class", "feature_dim", "class_mean_scale", "noise_sigma",
                        "drift_per_unit_time", "seed", "pretrain_classes", "test_fraction"},
                       "data.synthetic");
        SyntheticSource src;
        read(s, "num_classes", src.spec.num_classes);
        read(s, "per_class", src.spec.per_class);
        read(s, "feature_dim", src.spec.feature_dim);
        read(s, "class_mean_scale", src.spec.class_mean_scale);
        read(s, "noise_sigma", src.spec.noise_sigma);
        read(s, "drift_per_unit_time", src.spec.drift_per_unit_time);
        read(s, "seed", src.spec.seed);
        read(s, "pretrain_classes", src.pretrain_classes);
        read(s, "test_fraction", src.test_fraction);
        c.data.synthetic = src;
      }
    }
    if (auto it = j.find("stream"); it != j.end()) {
      reject_unknown(*it, {"ordering", "num_steps"}, "stream");
      if (it->contains("ordering")) c.stream.ordering = parse_ordering((*it)["ordering"].get<std::string>());
      read(*it, "num_steps", c.stream.num_steps);
    }
    read(j, "iterations_per_step", c.iterations_per_step);
    read(j, "batch_size", c.batch_size);
    read(j, "lr", c.lr);
    if (j.contains("probe_lr") && !j["probe_lr"].is_null()) c.probe_lr = j["probe_lr"].get<double>();
    read(j, "weight_decay", c.weight_decay);
    if (auto it = j.find("method"); it != j.end()) {
      const json& m = *it;
      reject_unknown(m, {"sampling", "recency_decay", "task_loss", "distill", "temperature", "lambda", "correction", "scope"},
                     "method");
      if (m.contains("sampling")) c.method.sampling.kind = parse_sampling_kind(m["sampling"].get<std::string>());
      read(m, "recency_decay", c.method.sampling.recency_decay);
      if (m.contains("task_loss")) c.method.loss.task = parse_task_loss(m["task_loss"].get<std::string>());
      if (m.contains("distill")) c.method.loss.distill = parse_distill_kind(m["distill"].get<std::string>());
      read(m, "temperature", c.method.loss.temperature);
      read(m, "lambda", c.method.loss.lambda);
      if (m.contains("correction")) c.method.correction = parse_correction(m["correction"].get<std::string>());
      if (m.contains("scope")) c.method.scope = parse_scope(m["scope"].get<std::string>());
    }
    if (j.contains("budget_mode")) c.budget_mode = parse_budget_mode(j["budget_mode"].get<std::string>());
    read(j, "erm_oracle", c.erm_oracle);
    read(j, "charge_calibration", c.charge_calibration);
    read(j, "calibration_holdout", c.calibration_holdout);
    if (auto it = j.find("model"); it != j.end()) {
      reject_unknown(*it, {"hidden", "cosine_scale"}, "model");
      read(*it, "hidden", c.hidden);
      read(*it, "cosine_scale", c.cosine_scale);
    }
    if (auto it = j.find("pretrain"); it != j.end()) {
      reject_unknown(*it, {"iterations", "lr", "batch_size"}, "pretrain");
      read(*it, "iterations", c.pretrain.iterations);
      read(*it, "lr", c.pretrain.lr);
      read(*it, "batch_size", c.pretrain.batch);
    }
    if (auto it = j.find("seeds"); it != j.end()) {
      reject_unknown(*it, {"stream", "init", "sampling"}, "seeds");
      read(*it, "stream", c.seeds.stream);
      read(*it, "init", c.seeds.init);
      read(*it, "sampling", c.seeds.sampling);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.stream.seed = c.seeds.stream;
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  json d = json::object();
  if (c.data.pretrain) d["pretrain"] = c.data.pretrain->string();
  if (c.data.stream) d["stream"] = c.data.stream->string();
  if (c.data.test) d["test"] = c.data.test->string();
  if (c.data.synthetic) {
    const auto& s = *c.data.synthetic;
    d["synthetic"] = {{"num_classes", s.spec.num_classes},
                      {"per_class", s.spec.per_class},
                      {"feature_dim", s.spec.feature_dim},
                      {"class_mean_scale", s.spec.class_mean_scale},
                      {"noise_sigma", s.spec.noise_sigma},
                      {"drift_per_unit_time", s.spec.drift_per_unit_time},
                      {"seed", s.spec.seed},
                      {"pretrain_classes", s.pretrain_classes},
                      {"test_fraction", s.test_fraction}};
  }
  j["data"] = d;
  j["stream"] = {{"ordering", to_string(c.stream.ordering)}, {"num_steps", c.stream.num_steps}};
  j["iterations_per_step"] = c.iterations_per_step;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["probe_lr"] = c.probe_lr ? json(*c.probe_lr) : json(nullptr);
  j["weight_decay"] = c.weight_decay;
  j["method"] = {{"sampling", to_string(c.method.sampling.kind)},
                 {"recency_decay", c.method.sampling.recency_decay},
                 {"task_loss", to_string(c.method.loss.task)},
                 {"distill", to_string(c.method.loss.distill)},
                 {"temperature", c.method.loss.temperature},
                 {"lambda", c.method.loss.lambda},
                 {"correction", to_string(c.method.correction)},
                 {"scope", to_string(c.method.scope)}};
  j["budget_mode"] = to_string(c.budget_mode);
  j["erm_oracle"] = c.erm_oracle;
  j["charge_calibration"] = c.charge_calibration;
  j["calibration_holdout"] = c.calibration_holdout;
  j["model"] = {{"hidden", c.hidden}, {"cosine_scale", c.cosine_scale}};
  j["pretrain"] = {{"iterations", c.pretrain.iterations}, {"lr", c.pretrain.lr}, {"batch_size", c.pretrain.batch}};
  j["seeds"] = {{"stream", c.seeds.stream}, {"init", c.seeds.init}, {"sampling", c.seeds.sampling}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

void apply_seed_override(ExperimentConfig& c, const char* env_value) {
  if (env_value == nullptr || *env_value == '\0') return;
  std::uint64_t seed = 0;
  try {
    std::size_t used = 0;
    seed = std::stoull(env_value, &used);
    if (env_value[used] != '\0') throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ConfigError(std::string(kSeedEnvVar) + " must be an unsigned integer");
  }
  c.seeds = {seed, seed, seed};
  c.stream.seed = seed;
  if (c.data.synthetic) c.data.synthetic->spec.seed = seed;
}

}  // namespace budgetcl
