#pragma once

// Independent gradient oracle: central finite differences in double precision.
// Used by the test suite to validate every analytic backward pass.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sviptr/autograd.hpp"
#include "sviptr/tensor.hpp"

namespace sviptr {

struct GradCheckResult {
  bool ok = true;
  double max_rel_err = 0.0;
  std::string worst;  // "<param>[i]: analytic=..., numeric=..."
};

// Builds the scalar loss twice per perturbed coordinate and compares the
// analytic gradient against (f(x+h) - f(x-h)) / 2h.
//
// `make_loss` must construct the full forward pass from scratch on the given
// graph (so perturbed evaluations see the perturbed leaf values).
inline double gradcheck_rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(0.1, std::abs(analytic) + std::abs(numeric));
}

inline GradCheckResult gradcheck(
    std::vector<Var<double>> leaves,
    const std::function<Var<double>(Graph<double>&)>& make_loss, double eps = 1e-4,
    double tol = 1e-4) {
  GradCheckResult res;

  // Analytic pass.
  for (auto& leaf : leaves) leaf->clear_grad();
  {
    Graph<double> g(true);
    auto loss = make_loss(g);
    g.backward(loss);
  }
  std::vector<Tensor<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves)
    analytic.push_back(leaf->has_grad ? leaf->grad.clone()
                                      : Tensor<double>(leaf->value.shape()));

  // Numeric pass, coordinate by coordinate.
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    for (int64_t i = 0; i < leaf->value.numel(); ++i) {
      const double orig = leaf->value[i];
      leaf->value[i] = orig + eps;
      double fp, fm;
      {
        Graph<double> g(true);
        fp = make_loss(g)->value[0];
      }
      leaf->value[i] = orig - eps;
      {
        Graph<double> g(true);
        fm = make_loss(g)->value[0];
      }
      leaf->value[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double ga = analytic[li][i];
      const double rel = gradcheck_rel_err(ga, numeric);
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = leaf->name + "[" + std::to_string(i) + "]: analytic=" + std::to_string(ga) +
                    ", numeric=" + std::to_string(numeric);
      }
    }
  }
  res.ok = res.max_rel_err <= tol;
  return res;
}

}  // namespace sviptr
