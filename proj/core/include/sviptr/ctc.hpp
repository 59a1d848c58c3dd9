#pragma once

// Connectionist temporal classification: alignment-marginalised negative
// log-likelihood over per-frame label distributions, plus greedy decoding.
//
// Inputs are log-probabilities [B, T, N] with class 0 reserved for blank.
// The loss is the batch mean; a target that cannot fit in T frames yields an
// infinite loss for that item (and a zero gradient contribution) rather than
// throwing.
//
// All alpha/beta recursions run in double regardless of the tensor type.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sviptr/autograd.hpp"
#include "sviptr/ops.hpp"
#include "sviptr/tensor.hpp"

namespace sviptr {

constexpr int kCtcBlank = 0;

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

namespace detail {

// Forward-backward for one sequence. lp is [T, N] log-probs (row-major).
// Returns log P(target); alpha/beta are filled as [T, U] with the convention
// that alpha includes the emission at t and beta excludes it, so
// P = sum_s alpha_t(s) * beta_t(s) at every t.
template <typename T>
double ctc_forward_backward(const T* lp, int64_t Tn, int64_t N,
                            const std::vector<int>& target, std::vector<double>* alpha_out,
                            std::vector<double>* beta_out, std::vector<int>* ext_out) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const int64_t L = static_cast<int64_t>(target.size());
  const int64_t U = 2 * L + 1;
  std::vector<int> ext(static_cast<size_t>(U), kCtcBlank);
  for (int64_t i = 0; i < L; ++i) ext[static_cast<size_t>(2 * i + 1)] = target[static_cast<size_t>(i)];

  auto emit = [&](int64_t t, int64_t s) {
    return static_cast<double>(lp[t * N + ext[static_cast<size_t>(s)]]);
  };
  auto can_skip = [&](int64_t s) {
    return ext[static_cast<size_t>(s)] != kCtcBlank && s >= 2 &&
           ext[static_cast<size_t>(s)] != ext[static_cast<size_t>(s - 2)];
  };

  std::vector<double> alpha(static_cast<size_t>(Tn * U), kNegInf);
  alpha[0] = emit(0, 0);
  if (U > 1) alpha[1] = emit(0, 1);
  for (int64_t t = 1; t < Tn; ++t)
    for (int64_t s = 0; s < U; ++s) {
      double a = alpha[static_cast<size_t>((t - 1) * U + s)];
      if (s >= 1) a = log_add(a, alpha[static_cast<size_t>((t - 1) * U + s - 1)]);
      if (can_skip(s)) a = log_add(a, alpha[static_cast<size_t>((t - 1) * U + s - 2)]);
      alpha[static_cast<size_t>(t * U + s)] = (a == kNegInf) ? kNegInf : a + emit(t, s);
    }
  double logp = alpha[static_cast<size_t>((Tn - 1) * U + U - 1)];
  if (U > 1) logp = log_add(logp, alpha[static_cast<size_t>((Tn - 1) * U + U - 2)]);

  if (beta_out) {
    std::vector<double> beta(static_cast<size_t>(Tn * U), kNegInf);
    beta[static_cast<size_t>((Tn - 1) * U + U - 1)] = 0.0;
    if (U > 1) beta[static_cast<size_t>((Tn - 1) * U + U - 2)] = 0.0;
    for (int64_t t = Tn - 2; t >= 0; --t)
      for (int64_t s = 0; s < U; ++s) {
        double b = beta[static_cast<size_t>((t + 1) * U + s)] + emit(t + 1, s);
        if (s + 1 < U)
          b = log_add(b, beta[static_cast<size_t>((t + 1) * U + s + 1)] + emit(t + 1, s + 1));
        if (s + 2 < U && can_skip(s + 2))
          b = log_add(b, beta[static_cast<size_t>((t + 1) * U + s + 2)] + emit(t + 1, s + 2));
        beta[static_cast<size_t>(t * U + s)] = b;
      }
    *beta_out = std::move(beta);
  }
  if (alpha_out) *alpha_out = std::move(alpha);
  if (ext_out) *ext_out = std::move(ext);
  return logp;
}

}  // namespace detail

// Mean CTC loss over the batch. log_probs: [B, T, N]; targets: per-item label
// sequences drawn from [1, N).
template <typename T>
Var<T> ctc_loss_mean(Graph<T>& g, Var<T> log_probs, const std::vector<std::vector<int>>& targets) {
  const int64_t B = log_probs->value.dim(0), Tn = log_probs->value.dim(1),
                N = log_probs->value.dim(2);
  if (static_cast<int64_t>(targets.size()) != B)
    throw std::invalid_argument("ctc: one target sequence per batch item required");
  for (const auto& t : targets)
    for (int lab : t)
      if (lab <= kCtcBlank || lab >= N)
        throw std::invalid_argument("ctc: target label out of range [1, N)");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  auto grad = std::make_shared<Tensor<T>>(log_probs->value.shape());
  double total = 0.0;
  bool any_infeasible = false;

  for (int64_t b = 0; b < B; ++b) {
    const T* lp = log_probs->value.data() + b * Tn * N;
    std::vector<double> alpha, beta;
    std::vector<int> ext;
    const bool need_grad = g.recording();
    const double logp = detail::ctc_forward_backward(lp, Tn, N, targets[static_cast<size_t>(b)],
                                                     need_grad ? &alpha : nullptr,
                                                     need_grad ? &beta : nullptr,
                                                     need_grad ? &ext : nullptr);
    if (logp == kNegInf) {
      any_infeasible = true;
      continue;
    }
    total += -logp;
    if (need_grad) {
      const int64_t U = static_cast<int64_t>(ext.size());
      T* gb = grad->data() + b * Tn * N;
      std::vector<double> acc(static_cast<size_t>(N));
      for (int64_t t = 0; t < Tn; ++t) {
        std::fill(acc.begin(), acc.end(), kNegInf);
        for (int64_t s = 0; s < U; ++s) {
          const double ab = alpha[static_cast<size_t>(t * U + s)] +
                            beta[static_cast<size_t>(t * U + s)];
          if (ab == kNegInf) continue;
          auto& slot = acc[static_cast<size_t>(ext[static_cast<size_t>(s)])];
          slot = log_add(slot, ab);
        }
        for (int64_t k = 0; k < N; ++k)
          if (acc[static_cast<size_t>(k)] != kNegInf)
            gb[t * N + k] = static_cast<T>(-std::exp(acc[static_cast<size_t>(k)] - logp) /
                                           static_cast<double>(B));
      }
    }
  }

  Tensor<T> out({1});
  out[0] = any_infeasible ? std::numeric_limits<T>::infinity()
                          : static_cast<T>(total / static_cast<double>(B));
  return g.record(std::move(out), {log_probs},
                  [log_probs, grad](Node<T>& node) {
                    const T dy = node.grad[0];
                    T* gx = log_probs->ensure_grad().data();
                    const T* gsrc = grad->data();
                    for (int64_t i = 0; i < grad->numel(); ++i) gx[i] += dy * gsrc[i];
                  },
                  "ctc_loss");
}

// Best-path decoding: per-frame argmax, collapse repeats, drop blanks.
// Accepts one item's [T, N] scores (logits or log-probs; only the argmax
// matters).
template <typename T>
std::vector<int> ctc_greedy_decode(const T* scores, int64_t Tn, int64_t N) {
  std::vector<int> out;
  int prev = -1;
  for (int64_t t = 0; t < Tn; ++t) {
    const T* row = scores + t * N;
    int best = 0;
    for (int64_t k = 1; k < N; ++k)
      if (row[k] > row[best]) best = static_cast<int>(k);
    if (best != prev && best != kCtcBlank) out.push_back(best);
    prev = best;
  }
  return out;
}

template <typename T>
std::vector<std::vector<int>> ctc_greedy_decode_batch(const Tensor<T>& scores) {
  const int64_t B = scores.dim(0), Tn = scores.dim(1), N = scores.dim(2);
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<size_t>(B));
  for (int64_t b = 0; b < B; ++b)
    out.push_back(ctc_greedy_decode(scores.data() + b * Tn * N, Tn, N));
  return out;
}

}  // namespace sviptr
