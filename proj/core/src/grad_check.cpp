#include "wave/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wave/errors.hpp"

namespace wave {

GradCheckReport grad_check_leaves(const std::function<Tensor()>& loss, std::vector<Tensor> leaves,
                                  const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw ArgumentError("grad_check: eps must be positive");
  for (auto& leaf : leaves) {
    if (!leaf.is_leaf()) throw ArgumentError("grad_check: perturbed tensors must be leaves");
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  {
    const Tensor y = loss();
    if (y.numel() != 1) {
      throw ArgumentError("grad_check: function must be scalar-valued, got shape " +
                          shape_to_string(y.shape()));
    }
    y.backward();
  }

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (std::size_t t = 0; t < leaves.size(); ++t) {
    Tensor& leaf = leaves[t];
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    std::vector<std::size_t> coords(leaf.numel());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_tensor && coords.size() > *options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(*options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto values = leaf.mutable_data();
    for (std::size_t i : coords) {
      const double saved = values[i];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard no_grad;
        values[i] = saved + options.eps;
        plus = loss().item();
        values[i] = saved - options.eps;
        minus = loss().item();
      }
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), options.abs_floor});
      const double rel_err = abs_err / denom;
      ++report.coordinates_checked;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (!(rel_err <= report.max_rel_error)) {
        report.max_rel_error = rel_err;
        report.worst_tensor = t;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_rel_error <= options.tol;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double eps, double tol) {
  Tensor leaf = x.clone(true);
  GradCheckOptions options;
  options.eps = eps;
  options.tol = tol;
  return grad_check_leaves([&] { return f(leaf); }, {leaf}, options);
}

}  // namespace wave
