#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace wave {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

struct TensorImpl;
class Tensor;

/// Backward rule of a recorded op. Receives the op's output (values and the
/// upstream gradient in `out.grad`) and accumulates into the parents' grads.
using BackwardFn = std::function<void(const TensorImpl& out)>;

/// One recorded operation on the tape. Parents are held strongly so the
/// graph stays alive as long as its root does.
struct TapeNode {
  std::string op;
  std::vector<Tensor> parents;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until needed; same length as data once allocated
  bool requires_grad = false;
  std::unique_ptr<TapeNode> node;

  std::span<double> grad_buffer();
};

/// Dense row-major float64 tensor with an optional reverse-mode tape node.
///
/// Tensor is a cheap shared handle. Values are treated as immutable once an op
/// has produced them; only leaves (parameters) are mutated in place, by the
/// optimizer, between steps.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor eye(std::size_t n);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  /// Builds the result of an op. A tape node is recorded only when grad mode is
  /// on and at least one parent requires grad.
  static Tensor from_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                        std::string op, BackwardFn backward);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  // 2-D accessors; a rank-1 tensor is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;
  const TapeNode* node() const;

  /// Gradient buffer; zeros when nothing has flowed into it yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Reverse pass from this scalar. Leaf gradients accumulate across calls.
  void backward() const;

  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  TensorImpl* impl() const { return impl_.get(); }
  bool same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Topological order (parents before children) of every grad-requiring
/// tensor reachable from `root`. Each tensor appears exactly once.
std::vector<TensorImpl*> topological_order(const Tensor& root);

bool grad_enabled();

/// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- ops -------------------------------------------------------------------
// All binary elementwise ops require identical shapes; no general broadcasting.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Same values under a new shape with equal element count.
Tensor reshape(const Tensor& a, Shape shape);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// a times a single-element tensor `s`; gradient flows into both.
Tensor mul_scalar(const Tensor& a, const Tensor& s);
/// a[m×n] + bias[n] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& bias);
/// a[m×n] ⊙ gain[n] broadcast over rows.
Tensor mul_row(const Tensor& a, const Tensor& gain);
/// Gaussian error linear unit, exact form x·Φ(x).
Tensor gelu(const Tensor& x);
/// Row-wise normalisation to zero mean / unit variance, no affine part.
Tensor layernorm(const Tensor& x, double eps = 1e-5);
/// Row softmax. A row whose maximum is +inf puts equal mass on its +inf entries.
Tensor softmax_rows(const Tensor& x);
/// Rows divided by their L2 norm. Zero rows raise DegenerateInputError.
Tensor normalize_rows(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
/// Row gather; backward scatters (accumulates) into the source rows.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
/// Mean over rows of -log softmax(logits)[target], log-sum-exp stabilised.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

}  // namespace wave
