#pragma once

// Recording-based reverse-mode differentiation. A Graph records every
// differentiable operation in execution order; backward() replays the tape in
// reverse, pulling each node's accumulated gradient into its parents. Leaves
// (parameters, inputs) are plain nodes that only ever receive gradient.

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sviptr/rng.hpp"
#include "sviptr/tensor.hpp"

namespace sviptr {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first use; same shape as value
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // scatters this->grad into parents
  std::string name;
  bool requires_grad = false;  // leaf that accumulates per-step gradient
  bool has_grad = false;

  Tensor<T>& ensure_grad() {
    if (!has_grad) {
      grad = Tensor<T>(value.shape());
      has_grad = true;
    }
    return grad;
  }

  void clear_grad() {
    grad = Tensor<T>();
    has_grad = false;
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
inline Var<T> make_leaf(Tensor<T> value, std::string name = "", bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->name = std::move(name);
  n->requires_grad = requires_grad;
  return n;
}

// One forward pass. `training` controls stochastic/normalization behaviour
// (dropout active, batch-norm batch statistics); recording follows it: an
// inference graph keeps no tape and no backward closures.
template <typename T>
class Graph {
 public:
  explicit Graph(bool training) : training_(training) {}

  bool training() const { return training_; }
  bool recording() const { return training_; }

  Var<T> record(Tensor<T> value, std::vector<Var<T>> parents,
                std::function<void(Node<T>&)> backward, const char* name) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->name = name;
    if (recording()) {
      n->parents = std::move(parents);
      n->backward = std::move(backward);
      tape_.push_back(n);
    }
    return n;
  }

  // Runs reverse-mode accumulation from `loss` (must be scalar).
  void backward(const Var<T>& loss) {
    if (!recording()) throw std::logic_error("backward: graph was built in inference mode");
    if (loss->value.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    loss->ensure_grad()[0] = T(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
      Node<T>& n = **it;
      if (n.has_grad && n.backward) n.backward(n);
    }
  }

  size_t tape_size() const { return tape_.size(); }

 private:
  bool training_;
  std::vector<Var<T>> tape_;
};

// Named parameters plus non-learned buffers (e.g. batch-norm running stats).
// std::map keeps names in lexicographic order, which fixes the manifest and
// iteration order everywhere (optimizer, checkpoints, counting).
template <typename T>
struct ParamStore {
  std::map<std::string, Var<T>> params;
  std::map<std::string, Var<T>> buffers;

  Var<T> add(const std::string& name, Tensor<T> value) {
    if (params.count(name) || buffers.count(name))
      throw std::logic_error("duplicate parameter name: " + name);
    auto v = make_leaf<T>(std::move(value), name, true);
    params.emplace(name, v);
    return v;
  }

  Var<T> add_buffer(const std::string& name, Tensor<T> value) {
    if (params.count(name) || buffers.count(name))
      throw std::logic_error("duplicate buffer name: " + name);
    auto v = make_leaf<T>(std::move(value), name, false);
    buffers.emplace(name, v);
    return v;
  }

  void zero_grad() {
    for (auto& [name, p] : params) p->clear_grad();
  }

  int64_t total_params() const {
    int64_t n = 0;
    for (auto& [name, p] : params) n += p->value.numel();
    return n;
  }
};

template <typename T>
inline void check_finite(const Tensor<T>& t, const std::string& where) {
  const T* d = t.data();
  for (int64_t i = 0; i < t.numel(); ++i)
    if (!std::isfinite(static_cast<double>(d[i])))
      throw std::runtime_error("non-finite value detected in " + where);
}

}  // namespace sviptr
