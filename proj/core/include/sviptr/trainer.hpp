#pragma once

// Training loop: AdamW with decoupled weight decay, linear warmup followed by
// a cosine learning-rate schedule, global-norm gradient clipping, CTC loss on
// synthetic glyph data, and greedy-decode exact-match evaluation.
//
// Everything is deterministic for a fixed configuration: dataset, batch
// order, dropout masks and optimizer state depend only on the seeds.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sviptr/backbone.hpp"
#include "sviptr/ctc.hpp"
#include "sviptr/data.hpp"

namespace sviptr {

struct OptimConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;  // applied to matrices/filters, not biases/norms
  double clip_norm = 5.0;
};

struct TrainConfig {
  int64_t epochs = 30;
  int64_t batch_size = 32;
  int64_t warmup_epochs = 1;
  int64_t train_samples = 5000;
  int64_t eval_samples = 500;
  int64_t height = 32;
  int64_t width = 96;
  int max_label_len = 5;
  double stop_accuracy = 0.0;  // stop once eval exact-match reaches this (0 = never)
  uint64_t data_seed = 1;
  std::string metrics_path;     // CSV lines "epoch,loss,word_acc,lr" when set
  std::string checkpoint_path;  // best-accuracy checkpoint manifest when set
};

template <typename T>
class AdamW {
 public:
  explicit AdamW(OptimConfig cfg) : cfg_(cfg) {}

  // One update over all parameters that received gradient. `lr_now` is the
  // scheduled learning rate for this step.
  void step(ParamStore<T>& store, double lr_now) {
    ++t_;
    // Global gradient norm and clip factor.
    double sq = 0.0;
    for (auto& [name, p] : store.params) {
      if (!p->has_grad) continue;
      const T* gp = p->grad.data();
      for (int64_t i = 0; i < p->grad.numel(); ++i)
        sq += static_cast<double>(gp[i]) * static_cast<double>(gp[i]);
    }
    const double norm = std::sqrt(sq);
    const double clip =
        (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : store.params) {
      if (!p->has_grad) continue;
      auto& m = state_m_[name];
      auto& v = state_v_[name];
      if (!m.defined()) {
        m = Tensor<T>(p->value.shape());
        v = Tensor<T>(p->value.shape());
      }
      const bool decay = p->value.ndim() >= 2;  // skip biases and norm affines
      T* pv = p->value.data();
      const T* gp = p->grad.data();
      T* pm = m.data();
      T* pvv = v.data();
      for (int64_t i = 0; i < p->value.numel(); ++i) {
        const double g = static_cast<double>(gp[i]) * clip;
        const double mi = cfg_.beta1 * static_cast<double>(pm[i]) + (1.0 - cfg_.beta1) * g;
        const double vi =
            cfg_.beta2 * static_cast<double>(pvv[i]) + (1.0 - cfg_.beta2) * g * g;
        pm[i] = static_cast<T>(mi);
        pvv[i] = static_cast<T>(vi);
        double upd = (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
        if (decay) upd += cfg_.weight_decay * static_cast<double>(pv[i]);
        pv[i] = static_cast<T>(static_cast<double>(pv[i]) - lr_now * upd);
      }
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  OptimConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, Tensor<T>> state_m_, state_v_;
};

// Linear warmup to `base`, then cosine decay to zero; continuous at the
// boundary. `step` is 1-based.
inline double cosine_warmup_lr(double base, int64_t step, int64_t warmup_steps,
                               int64_t total_steps) {
  if (warmup_steps > 0 && step <= warmup_steps)
    return base * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const int64_t tail = total_steps - warmup_steps;
  if (tail <= 0) return base;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(tail);
  return base * 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(1.0, progress)));
}

struct EpochMetrics {
  int64_t epoch = 0;
  double loss = 0.0;
  double word_acc = 0.0;
  double lr = 0.0;
};

template <typename T>
struct TrainResult {
  double best_accuracy = 0.0;
  int64_t best_epoch = -1;
  int64_t epochs_run = 0;
  std::vector<EpochMetrics> history;
};

namespace detail {

inline void append_number(std::string& line, double v) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  line.append(buf, end);
}

}  // namespace detail

// Locale-independent "epoch,loss,word_acc,lr" line.
inline std::string format_metrics_line(const EpochMetrics& m) {
  std::string line = std::to_string(m.epoch);
  line += ',';
  detail::append_number(line, m.loss);
  line += ',';
  detail::append_number(line, m.word_acc);
  line += ',';
  detail::append_number(line, m.lr);
  return line;
}

// Exact-match accuracy of greedy decoding over a dataset.
template <typename T>
double evaluate_exact_match(Model<T>& model, const SynthDataset<T>& ds, int64_t batch_size) {
  const int64_t n = static_cast<int64_t>(ds.images.size());
  int64_t correct = 0;
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t bs = std::min(batch_size, n - start);
    std::vector<int64_t> idx(static_cast<size_t>(bs));
    std::iota(idx.begin(), idx.end(), start);
    Graph<T> g(false);
    auto x = make_leaf<T>(ds.batch(idx), "images");
    auto out = model.forward(g, x);
    auto decoded = ctc_greedy_decode_batch(out.logits->value);
    for (int64_t b = 0; b < bs; ++b)
      if (decoded[static_cast<size_t>(b)] == ds.labels[static_cast<size_t>(start + b)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

// Runs the full loop. `on_epoch` (optional) fires after each epoch with the
// fresh metrics; `save_best` (optional) is invoked whenever eval accuracy
// improves, e.g. to write a checkpoint.
template <typename T>
TrainResult<T> train_model(Model<T>& model, const OptimConfig& optim, const TrainConfig& tc,
                           const Alphabet& alphabet,
                           const std::function<void(const EpochMetrics&)>& on_epoch = nullptr,
                           const std::function<void(const Model<T>&)>& save_best = nullptr) {
  auto train_ds = SynthDataset<T>::generate(alphabet, tc.train_samples, tc.height, tc.width,
                                            tc.data_seed, tc.max_label_len);
  auto eval_ds = SynthDataset<T>::generate(alphabet, tc.eval_samples, tc.height, tc.width,
                                           tc.data_seed + 0x5eed, tc.max_label_len);

  const int64_t steps_per_epoch = (tc.train_samples + tc.batch_size - 1) / tc.batch_size;
  const int64_t total_steps = steps_per_epoch * tc.epochs;
  const int64_t warmup_steps = steps_per_epoch * tc.warmup_epochs;

  AdamW<T> opt(optim);
  TrainResult<T> result;
  std::ofstream metrics_out;
  if (!tc.metrics_path.empty()) {
    metrics_out.open(tc.metrics_path, std::ios::trunc);
    if (!metrics_out)
      throw std::runtime_error("trainer: cannot open metrics file " + tc.metrics_path);
  }

  int64_t global_step = 0;
  for (int64_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    // Deterministic shuffle per epoch.
    std::vector<int64_t> order(static_cast<size_t>(tc.train_samples));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(tc.data_seed ^ 0xabcdef, static_cast<uint64_t>(epoch));
    for (int64_t i = tc.train_samples - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuffle_rng.below(static_cast<uint64_t>(i + 1)))]);

    double loss_sum = 0.0;
    double lr_now = 0.0;
    for (int64_t start = 0; start < tc.train_samples; start += tc.batch_size) {
      const int64_t bs = std::min(tc.batch_size, tc.train_samples - start);
      std::vector<int64_t> idx(order.begin() + start, order.begin() + start + bs);
      std::vector<std::vector<int>> targets;
      targets.reserve(static_cast<size_t>(bs));
      for (int64_t i : idx) targets.push_back(train_ds.labels[static_cast<size_t>(i)]);

      ++global_step;
      Graph<T> g(true);
      auto x = make_leaf<T>(train_ds.batch(idx), "images");
      auto out = model.forward(g, x, static_cast<uint64_t>(global_step));
      auto lp = ops::log_softmax_lastdim(g, out.logits);
      auto loss = ctc_loss_mean(g, lp, targets);
      const double loss_v = static_cast<double>(loss->value[0]);
      if (!std::isfinite(loss_v))
        throw std::runtime_error("trainer: non-finite loss (" + std::to_string(loss_v) +
                                 ") at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(global_step) +
                                 "; aborting instead of continuing with corrupt state");
      loss_sum += loss_v * static_cast<double>(bs);
      g.backward(loss);
      lr_now = cosine_warmup_lr(optim.lr, global_step, warmup_steps, total_steps);
      opt.step(model.store, lr_now);
      model.store.zero_grad();
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(tc.train_samples);
    m.word_acc = evaluate_exact_match(model, eval_ds, tc.batch_size);
    m.lr = lr_now;
    result.history.push_back(m);
    result.epochs_run = epoch;
    if (metrics_out) metrics_out << format_metrics_line(m) << '\n' << std::flush;
    if (on_epoch) on_epoch(m);
    // The first epoch always counts as the running best so a checkpoint
    // exists even when accuracy is stuck at zero.
    if (result.best_epoch < 0 || m.word_acc > result.best_accuracy) {
      result.best_accuracy = m.word_acc;
      result.best_epoch = epoch;
      if (save_best) save_best(model);
    }
    if (tc.stop_accuracy > 0.0 && m.word_acc >= tc.stop_accuracy) break;
  }
  return result;
}

}  // namespace sviptr
