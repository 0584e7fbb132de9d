#include "budgetcl/memory.hpp"

#include "budgetcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace budgetcl {

void MemoryStore::push(const Sample& s, int step) {
  if (s.label < 0) throw DataError("memory: negative label");
  const auto label = static_cast<std::size_t>(s.label);
  if (per_class_.size() <= label) per_class_.resize(label + 1);
  per_class_[label].push_back(entries_.size());
  entries_.push_back({s, step});
}

void MemoryStore::append_step(const StepBatch& batch) {
  const int expected = last_step() + 1;
  if (batch.step_index != expected) {
    throw std::invalid_argument("append_step: got step " + std::to_string(batch.step_index) + ", expected " +
                                std::to_string(expected));
  }
  const std::size_t begin = entries_.size();
  for (const auto& s : batch.samples) push(s, batch.step_index);
  step_ranges_.emplace_back(begin, entries_.size());
}

void MemoryStore::extend_current_step(const std::vector<Sample>& samples) {
  if (step_ranges_.empty()) throw std::logic_error("extend_current_step: no step appended yet");
  for (const auto& s : samples) push(s, last_step());
  step_ranges_.back().second = entries_.size();
}

const std::vector<std::size_t>& MemoryStore::class_indices(int label) const {
  static const std::vector<std::size_t> none;
  if (label < 0 || static_cast<std::size_t>(label) >= per_class_.size()) return none;
  return per_class_[static_cast<std::size_t>(label)];
}

std::vector<int> MemoryStore::classes_present() const {
  std::vector<int> out;
  for (std::size_t c = 0; c < per_class_.size(); ++c) {
    if (!per_class_[c].empty()) out.push_back(static_cast<int>(c));
  }
  return out;
}

std::string to_string(SamplingKind k) {
  switch (k) {
    case SamplingKind::uniform: return "uniform";
    case SamplingKind::class_balanced: return "class_balanced";
    case SamplingKind::recency: return "recency";
    case SamplingKind::fifo: return "fifo";
    case SamplingKind::max_loss: return "max_loss";
    case SamplingKind::uncertainty: return "uncertainty";
    case SamplingKind::kmeans: return "kmeans";
  }
  return "?";
}

SamplingKind parse_sampling_kind(const std::string& s) {
  for (auto k : {SamplingKind::uniform, SamplingKind::class_balanced, SamplingKind::recency, SamplingKind::fifo,
                 SamplingKind::max_loss, SamplingKind::uncertainty, SamplingKind::kmeans}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown sampling strategy '" + s + "'");
}

namespace {

std::size_t uniform_index(std::size_t begin, std::size_t end, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(begin, end - 1);
  return pick(rng);
}

}  // namespace

std::vector<std::size_t> draw_batch(const MemoryStore& store, const SamplingStrategy& strategy, std::size_t m,
                                    std::mt19937_64& rng) {
  if (strategy.costly()) throw std::invalid_argument("draw_batch: " + to_string(strategy.kind) + " is a costly strategy");
  if (store.empty()) throw std::invalid_argument("draw_batch: empty memory");
  if (m < 1) throw std::invalid_argument("draw_batch: m must be at least 1");

  std::vector<std::size_t> out(m);
  switch (strategy.kind) {
    case SamplingKind::uniform:
      for (auto& i : out) i = uniform_index(0, store.size(), rng);
      break;
    case SamplingKind::class_balanced: {
      const std::vector<int> classes = store.classes_present();
      std::uniform_int_distribution<std::size_t> pick_class(0, classes.size() - 1);
      for (auto& i : out) {
        const auto& members = store.class_indices(classes[pick_class(rng)]);
        i = members[uniform_index(0, members.size(), rng)];
      }
      break;
    }
    case SamplingKind::recency: {
      const double rho = strategy.recency_decay;
      if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("recency decay must lie in (0, 1]");
      // Pick a step with probability proportional to size * rho^age, then an entry within it.
      const int last = store.last_step();
      std::vector<double> weights(static_cast<std::size_t>(last + 1));
      for (int s = 0; s <= last; ++s) {
        const auto [b, e] = store.step_range(s);
        weights[static_cast<std::size_t>(s)] = static_cast<double>(e - b) * std::pow(rho, last - s);
      }
      std::discrete_distribution<int> pick_step(weights.begin(), weights.end());
      for (auto& i : out) {
        const auto [b, e] = store.step_range(pick_step(rng));
        i = uniform_index(b, e, rng);
      }
      break;
    }
    case SamplingKind::fifo: {
      const auto [b, e] = store.step_range(store.last_step());
      if (b == e) throw std::invalid_argument("draw_batch: fifo on an empty current step");
      for (auto& i : out) i = uniform_index(b, e, rng);
      break;
    }
    default:
      break;
  }
  return out;
}

std::vector<std::size_t> draw_candidates(const MemoryStore& store, std::size_t m, std::mt19937_64& rng) {
  if (store.empty()) throw std::invalid_argument("draw_candidates: empty memory");
  std::vector<std::size_t> out(3 * m);
  for (auto& i : out) i = uniform_index(0, store.size(), rng);
  return out;
}

std::vector<double> candidate_scores(SamplingKind kind, const Matrix& logits, const std::vector<int>& labels) {
  std::vector<double> scores(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Vector z = logits.row(i).transpose();
    if (kind == SamplingKind::max_loss) {
      scores[static_cast<std::size_t>(i)] = task_loss_grad(z, labels[static_cast<std::size_t>(i)]).loss;
    } else if (kind == SamplingKind::uncertainty) {
      scores[static_cast<std::size_t>(i)] = entropy(softmax(z));
    } else {
      throw std::invalid_argument("candidate_scores: no score for " + to_string(kind));
    }
  }
  return scores;
}

std::optional<std::vector<std::size_t>> costly_select(const SamplingStrategy& strategy,
                                                      std::span<const std::size_t> candidates,
                                                      const MemoryStore& store, const MlpModel& model,
                                                      BudgetLedger& ledger, std::mt19937_64& rng) {
  if (!strategy.costly()) throw std::invalid_argument("costly_select: " + to_string(strategy.kind) + " is inexpensive");
  if (candidates.empty() || candidates.size() % 3 != 0) {
    throw std::invalid_argument("costly_select: candidate count must be a positive multiple of 3");
  }
  const std::size_t m = candidates.size() / 3;
  if (!ledger.charge(Category::select_fwd, candidates.size())) return std::nullopt;

  std::vector<const Sample*> samples;
  samples.reserve(candidates.size());
  for (const std::size_t idx : candidates) samples.push_back(&store.entry(idx).sample);
  const TrainBatch batch = make_batch(samples);
  const ForwardPass pass = model.forward(batch.features);

  std::vector<std::size_t> positions;
  if (strategy.kind == SamplingKind::kmeans) {
    positions = kmeans_select(pass.penultimate(), m, rng);
  } else {
    const std::vector<double> scores = candidate_scores(strategy.kind, pass.logits, batch.labels);
    positions.resize(scores.size());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    std::stable_sort(positions.begin(), positions.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    positions.resize(m);
  }
  std::vector<std::size_t> out;
  out.reserve(m);
  for (const std::size_t p : positions) out.push_back(candidates[p]);
  return out;
}

std::vector<std::size_t> kmeans_select(const Matrix& features, std::size_t m, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (m < 1) throw std::invalid_argument("kmeans_select: m must be at least 1");
  if (m > n) throw std::invalid_argument("kmeans_select: m exceeds the number of points");

  auto sqdist = [&](std::size_t i, const auto& c) { return (features.row(static_cast<Eigen::Index>(i)) - c).squaredNorm(); };

  // k-means++ seeding.
  std::vector<std::size_t> seeds;
  std::vector<bool> is_seed(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  seeds.push_back(uniform_index(0, n, rng));
  is_seed[seeds.back()] = true;
  while (seeds.size() < m) {
    const auto last = features.row(static_cast<Eigen::Index>(seeds.back()));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sqdist(i, last));
      if (!is_seed[i]) total += d2[i];
    }
    std::size_t next = n;
    if (total > 0.0) {
      std::vector<double> w(n);
      for (std::size_t i = 0; i < n; ++i) w[i] = is_seed[i] ? 0.0 : d2[i];
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      next = pick(rng);
    } else {
      for (std::size_t i = 0; i < n && next == n; ++i) {
        if (!is_seed[i]) next = i;
      }
    }
    seeds.push_back(next);
    is_seed[next] = true;
  }

  Matrix centroids(static_cast<Eigen::Index>(m), features.cols());
  for (std::size_t k = 0; k < m; ++k) centroids.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(seeds[k]));

  std::vector<std::size_t> assign(n, 0);
  auto assign_all = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < m; ++k) {
        const double d = sqdist(i, centroids.row(static_cast<Eigen::Index>(k)));
        if (d < best) {
          best = d;
          assign[i] = k;
        }
      }
    }
  };

  for (int it = 0; it < kKmeansIterations; ++it) {
    assign_all();
    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(m), features.cols());
    std::vector<std::size_t> counts(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(assign[i])) += features.row(static_cast<Eigen::Index>(i));
      ++counts[assign[i]];
    }
    for (std::size_t k = 0; k < m; ++k) {
      if (counts[k] > 0) {
        centroids.row(static_cast<Eigen::Index>(k)) = sums.row(static_cast<Eigen::Index>(k)) / static_cast<double>(counts[k]);
      }
    }
  }
  assign_all();

  std::vector<std::size_t> chosen(m, n);
  std::vector<bool> taken(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = assign[i];
    const auto c = centroids.row(static_cast<Eigen::Index>(k));
    if (chosen[k] == n || sqdist(i, c) < sqdist(chosen[k], c)) chosen[k] = i;
  }
  for (const std::size_t c : chosen) {
    if (c != n) taken[c] = true;
  }
  for (std::size_t k = 0; k < m; ++k) {
    if (chosen[k] != n) continue;
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (taken[j]) nearest = std::min(nearest, sqdist(i, features.row(static_cast<Eigen::Index>(j))));
      }
      if (nearest > best_d) {
        best_d = nearest;
        best = i;
      }
    }
    chosen[k] = best;
    taken[best] = true;
  }
  return chosen;
}

}  // namespace budgetcl
