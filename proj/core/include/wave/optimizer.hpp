#pragma once

#include <cstddef>
#include <vector>

#include "wave/tensor.hpp"

namespace wave {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled; applied to matrices only
};

/// Adam with decoupled weight decay over a fixed parameter list.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig config = {});

  /// One update from the parameters' current gradients at learning rate lr.
  void step(double lr);
  void zero_grad();
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

/// Global L2 norm of all gradients, before clipping.
double global_grad_norm(const std::vector<Tensor>& params);

/// Rescales gradients so their global norm is at most max_norm. Returns the
/// pre-clip norm.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

/// Linear warmup over the first warmup_fraction of steps, then linear decay to zero.
double scheduled_lr(double base_lr, std::size_t step, std::size_t total_steps, double warmup_fraction);

}  // namespace wave
