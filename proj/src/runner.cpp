#include "budgetcl/runner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace budgetcl {

double MetricsRow::units_spent() const { return std::accumulate(units.begin(), units.end(), 0.0); }

double RunLog::average_acc() const {
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : rows) total += r.overall_acc;
  return total / static_cast<double>(rows.size());
}

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData out;
  if (config.data.synthetic) {
    const SyntheticSource& src = *config.data.synthetic;
    const Dataset all = generate_synthetic(src.spec);
    auto [train, test] = holdout_split(all, src.test_fraction);
    const int p = src.pretrain_classes;
    out.pretrain = filter_labels(train, [p](int y) { return y < p; });
    out.stream = filter_labels(train, [p](int y) { return y >= p; });
    out.test = std::move(test);
    out.num_classes = all.num_classes;
    out.pretrain_classes = p;
    return out;
  }
  if (config.data.pretrain) out.pretrain = load_csv(*config.data.pretrain);
  out.stream = load_csv(*config.data.stream);
  out.test = load_csv(*config.data.test);
  const int dim = out.stream.feature_dim;
  if (out.test.feature_dim != dim || (!out.pretrain.empty() && out.pretrain.feature_dim != dim)) {
    throw DataError("datasets disagree on feature dimension");
  }
  out.pretrain_classes = out.pretrain.empty() ? 0 : out.pretrain.num_classes;
  out.num_classes = std::max({out.pretrain.num_classes, out.stream.num_classes, out.test.num_classes});
  out.pretrain.num_classes = out.stream.num_classes = out.test.num_classes = out.num_classes;
  if (out.pretrain.empty()) out.pretrain.feature_dim = dim;
  return out;
}

double lr_schedule(long long i, long long k_total, double lr0) {
  if (k_total < 1 || i < 0 || i > k_total) throw std::invalid_argument("lr_schedule: need 0 <= i <= k_total, k_total >= 1");
  return lr0 * (1.0 - static_cast<double>(i) / static_cast<double>(k_total));
}

Matrix Calibration::apply(const Matrix& logits) const {
  Matrix out = bic ? apply_bic(logits, *bic) : logits;
  if (temperature != 1.0) out /= temperature;
  return out;
}

EvalResult evaluate(const MlpModel& model, const Dataset& test, const ClassMask& pretrain_classes,
                    const ClassMask& seen, const Calibration& calibration) {
  std::vector<const Sample*> rows;
  for (const auto& s : test.samples) {
    const auto y = static_cast<std::size_t>(s.label);
    if (y < seen.size() && seen[y]) {
      if (s.label >= model.num_classes()) throw std::logic_error("evaluate: test class not covered by the head");
      rows.push_back(&s);
    }
  }
  if (rows.empty()) throw DataError("evaluate: no test samples for the classes seen so far");

  const TrainBatch batch = make_batch(rows);
  const Matrix logits = calibration.apply(model.logits(batch.features));
  std::size_t correct = 0, pre_correct = 0, stream_correct = 0;
  EvalResult r;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = batch.labels[static_cast<std::size_t>(i)];
    const bool hit = argmax_tiebreak(logits.row(i)) == y;
    const bool is_pre = static_cast<std::size_t>(y) < pretrain_classes.size() && pretrain_classes[static_cast<std::size_t>(y)];
    correct += hit;
    if (is_pre) {
      ++r.pretrain_count;
      pre_correct += hit;
    } else {
      ++r.stream_count;
      stream_correct += hit;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.overall = static_cast<double>(correct) / static_cast<double>(rows.size());
  r.pretrain = r.pretrain_count ? static_cast<double>(pre_correct) / static_cast<double>(r.pretrain_count) : nan;
  r.stream = r.stream_count ? static_cast<double>(stream_correct) / static_cast<double>(r.stream_count) : nan;
  return r;
}

std::mt19937_64 step_rng(std::uint64_t seed, int step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), 0x5eedu};
  return std::mt19937_64(seq);
}

MlpModel initial_model(const ExperimentConfig& config, const PreparedData& data) {
  ModelSpec spec;
  spec.input_dim = data.stream.feature_dim;
  spec.hidden = config.hidden;
  spec.num_classes = data.pretrain_classes;
  spec.head = config.method.head_kind();
  spec.cosine_scale = config.cosine_scale;
  spec.seed = config.seeds.init;
  MlpModel model(spec);
  if (!data.pretrain.empty() && config.pretrain.iterations > 0) {
    std::mt19937_64 rng = step_rng(config.seeds.init, -1);
    pretrain(model, data.pretrain, config.pretrain, rng);
  }
  return model;
}

namespace {

struct StreamState {
  std::vector<StepBatch> steps;
  ClassMask pretrain_mask;
};

StreamState build_stream(const ExperimentConfig& config, const PreparedData& data) {
  StreamSpec spec = config.stream;
  spec.seed = config.seeds.stream;
  StreamState s;
  s.steps = partition_steps(order_stream(data.stream, spec), spec.num_steps);
  s.pretrain_mask.assign(static_cast<std::size_t>(data.num_classes), false);
  for (int c = 0; c < data.pretrain_classes; ++c) s.pretrain_mask[static_cast<std::size_t>(c)] = true;
  return s;
}

int highest_seen(const ClassMask& seen) {
  for (std::size_t c = seen.size(); c-- > 0;) {
    if (seen[c]) return static_cast<int>(c);
  }
  return -1;
}

MetricsRow make_row(int step, const EvalResult& eval, long long iterations, const BudgetLedger& ledger) {
  MetricsRow row;
  row.step = step;
  row.overall_acc = eval.overall;
  row.pretrain_acc = eval.pretrain;
  row.stream_acc = eval.stream;
  row.iterations = iterations;
  for (std::size_t c = 0; c < kNumCategories; ++c) row.units[c] = ledger.spent_in(kAllCategories[c]);
  row.capacity = ledger.capacity();
  return row;
}

RunLog new_log(const ExperimentConfig& config, MethodClass mc, long long allotted) {
  RunLog log;
  log.config_echo = to_json(config);
  log.method_class = config.erm_oracle ? "erm_oracle" : to_string(mc);
  log.budget_mode = to_string(config.budget_mode);
  log.allotted_iterations = allotted;
  return log;
}

// Class-balanced draw of `count` memory samples restricted to `classes`.
std::vector<Sample> draw_from_classes(const MemoryStore& memory, const ClassMask& classes, std::size_t count,
                                      std::mt19937_64& rng) {
  std::vector<int> labels;
  for (const int c : memory.classes_present()) {
    if (static_cast<std::size_t>(c) < classes.size() && classes[static_cast<std::size_t>(c)]) labels.push_back(c);
  }
  std::vector<Sample> out;
  if (labels.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick_class(0, labels.size() - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& members = memory.class_indices(labels[pick_class(rng)]);
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    out.push_back(memory.entry(members[pick(rng)]).sample);
  }
  return out;
}

}  // namespace

RunResult run_continual(const ExperimentConfig& config, const PreparedData& data) {
  config.validate();
  const MethodSpec& method = config.method;
  const MethodClass mc = method.method_class();
  const long long allotted = equivalent_iters(mc, config.iterations_per_step, config.budget_mode);
  const std::size_t B = config.batch_size;
  const double lr0 = method.scope == TrainableScope::head_only ? config.probe_lr.value_or(config.lr) : config.lr;
  const bool needs_val = method.correction == Correction::bic || method.correction == Correction::temperature;

  StreamState stream = build_stream(config, data);
  MlpModel model = initial_model(config, data);
  model.set_scope(method.scope);

  MemoryStore memory;
  int mem_step = 0;
  if (!data.pretrain.empty()) memory.append_step({mem_step++, data.pretrain.samples});

  ClassMask seen = stream.pretrain_mask;
  RunLog log = new_log(config, mc, allotted);
  Calibration calibration;

  for (std::size_t t = 0; t < stream.steps.size(); ++t) {
    std::mt19937_64 rng = step_rng(config.seeds.sampling, static_cast<int>(t));
    const std::vector<Sample>& incoming = stream.steps[t].samples;

    // Teacher is the model as it stood at the end of the previous step.
    std::optional<MlpModel> teacher;
    if (method.loss.distill != DistillKind::none && model.num_classes() > 0) teacher = model;

    ClassMask new_classes(seen.size(), false);
    const ClassMask seen_before = seen;
    for (const auto& s : incoming) {
      const auto y = static_cast<std::size_t>(s.label);
      if (!seen[y]) new_classes[y] = true;
    }

    std::vector<Sample> train_part = incoming;
    std::vector<Sample> holdout;
    if (needs_val) {
      Dataset step_ds{incoming, data.num_classes, data.stream.feature_dim};
      auto [keep, held] = holdout_split(step_ds, config.calibration_holdout);
      train_part = std::move(keep.samples);
      holdout = std::move(held.samples);
    }
    memory.append_step({mem_step++, train_part});
    for (const auto& s : incoming) seen[static_cast<std::size_t>(s.label)] = true;
    model.expand_head(std::max(model.num_classes(), highest_seen(seen) + 1));

    ClassMask ace_mask(static_cast<std::size_t>(model.num_classes()), false);
    for (const auto& s : train_part) ace_mask[static_cast<std::size_t>(s.label)] = true;

    BudgetLedger ledger = new_ledger(config.iterations_per_step, B);

    // Calibration forwards are paid before training so the fit is never
    // starved by the iterations; training then runs on what remains.
    bool calibration_paid = !config.charge_calibration;
    if (needs_val && config.charge_calibration && !holdout.empty()) {
      bool old_in_memory = false;
      for (const int c : memory.classes_present()) old_in_memory = old_in_memory || seen_before[static_cast<std::size_t>(c)];
      calibration_paid = ledger.charge(Category::calib_fwd, holdout.size() * (old_in_memory ? 2 : 1));
    }

    const double iteration_cost = static_cast<double>(iteration_cost_factor(mc)) * static_cast<double>(B);
    long long executed = 0;
    for (long long i = 0; i < allotted; ++i) {
      if (!ledger.can_afford(iteration_cost)) break;

      std::vector<std::size_t> indices;
      std::size_t masked_rows = 0;
      if (method.sampling.costly()) {
        const auto candidates = draw_candidates(memory, B, rng);
        auto picked = costly_select(method.sampling, candidates, memory, model, ledger, rng);
        if (!picked) break;
        indices = std::move(*picked);
      } else if (method.uses_ace() && B >= 2) {
        masked_rows = B / 2;
        indices = draw_batch(memory, {SamplingKind::fifo, method.sampling.recency_decay}, masked_rows, rng);
        const auto replay = draw_batch(memory, method.sampling, B - masked_rows, rng);
        indices.insert(indices.end(), replay.begin(), replay.end());
      } else {
        indices = draw_batch(memory, method.sampling, B, rng);
      }

      std::vector<const Sample*> rows;
      rows.reserve(indices.size());
      for (const std::size_t idx : indices) rows.push_back(&memory.entry(idx).sample);
      const TrainBatch batch = make_batch(rows);
      const ForwardPass pass = model.forward(batch.features);

      Matrix teacher_logits;
      if (teacher) {
        if (!ledger.charge(Category::teacher_fwd, rows.size())) break;
        teacher_logits = teacher->logits(batch.features);
      }

      Matrix dlogits(pass.logits.rows(), pass.logits.cols());
      const auto n_rows = static_cast<double>(rows.size());
      for (Eigen::Index r = 0; r < pass.logits.rows(); ++r) {
        const Vector z = pass.logits.row(r).transpose();
        const int y = batch.labels[static_cast<std::size_t>(r)];
        LossGrad lg = task_loss_grad(z, y, static_cast<std::size_t>(r) < masked_rows ? &ace_mask : nullptr);
        if (teacher) {
          const Vector tz = teacher_logits.row(r).transpose();
          lg = combine(lg, distill_loss_grad(z, tz, method.loss.distill, method.loss.temperature), method.loss.lambda);
        }
        dlogits.row(r) = lg.grad.transpose() / n_rows;
      }
      if (!model.sgd_step(batch, pass, dlogits, lr_schedule(i, allotted, lr0), config.weight_decay, ledger)) break;
      ++executed;
    }

    // Post-hoc corrections.
    calibration = {};
    const int k_now = model.num_classes();
    ClassMask new_mask(static_cast<std::size_t>(k_now), false), old_mask(static_cast<std::size_t>(k_now), false);
    bool any_new = false, any_old = false;
    for (std::size_t c = 0; c < static_cast<std::size_t>(k_now); ++c) {
      new_mask[c] = c < new_classes.size() && new_classes[c];
      old_mask[c] = c < seen_before.size() && seen_before[c];
      any_new = any_new || new_mask[c];
      any_old = any_old || old_mask[c];
    }
    if (method.correction == Correction::wa && any_new && any_old) {
      apply_wa(model, old_mask, new_mask);
    }
    if (needs_val && !holdout.empty()) {
      Dataset val{holdout, data.num_classes, data.stream.feature_dim};
      const auto old_draw = draw_from_classes(memory, old_mask, holdout.size(), rng);
      val.samples.insert(val.samples.end(), old_draw.begin(), old_draw.end());
      if (calibration_paid) {
        if (method.correction == Correction::bic) {
          if (any_new && any_old) calibration.bic = fit_bic(model, val, new_mask);
        } else {
          calibration.temperature = fit_temperature(model, val);
        }
      }
      memory.extend_current_step(holdout);
    }

    const EvalResult eval = evaluate(model, data.test, stream.pretrain_mask, seen, calibration);
    log.rows.push_back(make_row(static_cast<int>(t) + 1, eval, executed, ledger));
  }
  return {std::move(log), std::move(model)};
}

RunResult run_erm_oracle(const ExperimentConfig& config, const PreparedData& data) {
  config.validate();
  const std::size_t B = config.batch_size;
  StreamState stream = build_stream(config, data);

  ExperimentConfig base_config = config;
  base_config.method = MethodSpec{};
  const MlpModel start = initial_model(base_config, data);

  MemoryStore memory;
  int mem_step = 0;
  if (!data.pretrain.empty()) memory.append_step({mem_step++, data.pretrain.samples});
  ClassMask seen = stream.pretrain_mask;
  RunLog log = new_log(config, MethodClass::naive, config.iterations_per_step);
  const SamplingStrategy uniform{SamplingKind::uniform, 0.5};

  MlpModel model = start;
  for (std::size_t t = 0; t < stream.steps.size(); ++t) {
    std::mt19937_64 rng = step_rng(config.seeds.sampling, static_cast<int>(t));
    memory.append_step({mem_step++, stream.steps[t].samples});
    for (const auto& s : stream.steps[t].samples) seen[static_cast<std::size_t>(s.label)] = true;

    model = start;
    model.set_scope(TrainableScope::full);
    model.expand_head(std::max(model.num_classes(), highest_seen(seen) + 1));

    const long long budget = config.iterations_per_step * static_cast<long long>(t + 1);
    BudgetLedger ledger = new_ledger(budget, B);
    const long long allotted = equivalent_iters(MethodClass::naive, budget, config.budget_mode);
    long long executed = 0;
    for (long long i = 0; i < allotted; ++i) {
      if (!ledger.can_afford(CostModel::full_iteration(B))) break;
      const auto indices = draw_batch(memory, uniform, B, rng);
      std::vector<const Sample*> rows;
      for (const std::size_t idx : indices) rows.push_back(&memory.entry(idx).sample);
      const TrainBatch batch = make_batch(rows);
      const ForwardPass pass = model.forward(batch.features);
      const Matrix dlogits = mean_ce_dlogits(pass.logits, batch.labels);
      if (!model.sgd_step(batch, pass, dlogits, lr_schedule(i, allotted, config.lr), config.weight_decay, ledger)) break;
      ++executed;
    }
    const EvalResult eval = evaluate(model, data.test, stream.pretrain_mask, seen);
    log.rows.push_back(make_row(static_cast<int>(t) + 1, eval, executed, ledger));
  }
  return {std::move(log), std::move(model)};
}

RunResult run_experiment(const ExperimentConfig& config) {
  const PreparedData data = prepare_data(config);
  return config.erm_oracle ? run_erm_oracle(config, data) : run_continual(config, data);
}

}  // namespace budgetcl
