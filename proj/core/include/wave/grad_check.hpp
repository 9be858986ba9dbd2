#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "wave/tensor.hpp"

namespace wave {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  bool passed = true;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, abs_floor); gradients smaller
  // than the floor are compared absolutely.
  double abs_floor = 1e-6;
  // Check at most this many coordinates per tensor, chosen at random.
  std::optional<std::size_t> max_coords_per_tensor;
  std::uint64_t seed = 0;
};

/// Central-difference check of the analytic gradient of scalar `f` at `x`.
/// Throws ArgumentError if f is not scalar-valued or eps <= 0.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double eps = 1e-5, double tol = 1e-4);

/// Same check over a set of leaf tensors perturbed in place. `loss` rebuilds the
/// graph from the current leaf values on every call.
GradCheckReport grad_check_leaves(const std::function<Tensor()>& loss, std::vector<Tensor> leaves,
                                  const GradCheckOptions& options = {});

}  // namespace wave
