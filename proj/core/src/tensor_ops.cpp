#include <Eigen/Core>
#include <cmath>
#include <numbers>

#include "wave/errors.hpp"
#include "wave/tensor.hpp"

namespace wave {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got shape " +
                         shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

// Grad buffer of parent i if it takes part in the backward pass.
double* parent_grad(const TensorImpl& out, std::size_t i) {
  TensorImpl* p = out.node->parents[i].impl();
  return p->requires_grad ? p->grad_buffer().data() : nullptr;
}

const double* parent_data(const TensorImpl& out, std::size_t i) {
  return out.node->parents[i].impl()->data.data();
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() =
      ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  return Tensor::from_op({m, n}, std::move(out), {a, b}, "matmul",
                         [m, k, n](const TensorImpl& y) {
                           ConstMap dy(y.grad.data(), m, n);
                           if (double* ga = parent_grad(y, 0)) {
                             MutMap(ga, m, k).noalias() +=
                                 dy * ConstMap(parent_data(y, 1), k, n).transpose();
                           }
                           if (double* gb = parent_grad(y, 1)) {
                             MutMap(gb, k, n).noalias() +=
                                 ConstMap(parent_data(y, 0), m, k).transpose() * dy;
                           }
                         });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const auto m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  MutMap(out.data(), n, m) = ConstMap(a.data().data(), m, n).transpose();
  return Tensor::from_op({n, m}, std::move(out), {a}, "transpose", [m, n](const TensorImpl& y) {
    if (double* ga = parent_grad(y, 0)) {
      MutMap(ga, m, n) += ConstMap(y.grad.data(), n, m).transpose();
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape " + shape_to_string(a.shape()) + " to " + shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::from_op(std::move(shape), std::move(out), {a}, "reshape", [](const TensorImpl& y) {
    if (double* g = parent_grad(y, 0)) {
      for (std::size_t i = 0; i < y.grad.size(); ++i) g[i] += y.grad[i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, "add", [](const TensorImpl& y) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = parent_grad(y, p)) {
        for (std::size_t i = 0; i < y.grad.size(); ++i) g[i] += y.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, "sub", [](const TensorImpl& y) {
    if (double* g = parent_grad(y, 0)) {
      for (std::size_t i = 0; i < y.grad.size(); ++i) g[i] += y.grad[i];
    }
    if (double* g = parent_grad(y, 1)) {
      for (std::size_t i = 0; i < y.grad.size(); ++i) g[i] -= y.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, "mul", [](const TensorImpl& y) {
    const double* ad = parent_data(y, 0);
    const double* bd = parent_data(y, 1);
    if (double* g = parent_grad(y, 0)) {
      for (std::size_t i = 0; i < y.grad.size(); ++i) g[i] += y.grad[i] * bd[i];
    }
    if (double* g = parent_grad(y, 1)) {
      for (std::size_t i = 0; i < y.grad.size(); ++i) g[i] += y.grad[i] * ad[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return Tensor::from_op(a.shape(), std::move(out), {a}, "scale", [factor](const TensorImpl& y) {
    if (double* g = parent_grad(y, 0)) {
      for (std::size_t i = 0; i < y.grad.size(); ++i) g[i] += y.grad[i] * factor;
    }
  });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) {
    throw DimensionError("mul_scalar: factor must hold one value, got " +
                         shape_to_string(s.shape()));
  }
  const double f = s[0];
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * f;
  return Tensor::from_op(a.shape(), std::move(out), {a, s}, "mul_scalar", [](const TensorImpl& y) {
    const double* ad = parent_data(y, 0);
    const double f = parent_data(y, 1)[0];
    if (double* g = parent_grad(y, 0)) {
      for (std::size_t i = 0; i < y.grad.size(); ++i) g[i] += y.grad[i] * f;
    }
    if (double* g = parent_grad(y, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < y.grad.size(); ++i) acc += y.grad[i] * ad[i];
      g[0] += acc;
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  require_matrix(a, "add_row");
  const auto m = a.dim(0), n = a.dim(1);
  if (bias.numel() != n || bias.rank() > 2 || (bias.rank() == 2 && bias.dim(0) != 1)) {
    throw DimensionError("add_row: bias " + shape_to_string(bias.shape()) +
                         " does not match rows of " + shape_to_string(a.shape()));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bias[c];
  return Tensor::from_op(a.shape(), std::move(out), {a, bias}, "add_row",
                         [m, n](const TensorImpl& y) {
                           if (double* g = parent_grad(y, 0)) {
                             for (std::size_t i = 0; i < m * n; ++i) g[i] += y.grad[i];
                           }
                           if (double* g = parent_grad(y, 1)) {
                             for (std::size_t r = 0; r < m; ++r)
                               for (std::size_t c = 0; c < n; ++c) g[c] += y.grad[r * n + c];
                           }
                         });
}

Tensor mul_row(const Tensor& a, const Tensor& gain) {
  require_matrix(a, "mul_row");
  const auto m = a.dim(0), n = a.dim(1);
  if (gain.numel() != n || gain.rank() > 2 || (gain.rank() == 2 && gain.dim(0) != 1)) {
    throw DimensionError("mul_row: gain " + shape_to_string(gain.shape()) +
                         " does not match rows of " + shape_to_string(a.shape()));
  }
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = a[r * n + c] * gain[c];
  return Tensor::from_op(a.shape(), std::move(out), {a, gain}, "mul_row",
                         [m, n](const TensorImpl& y) {
                           const double* ad = parent_data(y, 0);
                           const double* gd = parent_data(y, 1);
                           if (double* g = parent_grad(y, 0)) {
                             for (std::size_t r = 0; r < m; ++r)
                               for (std::size_t c = 0; c < n; ++c)
                                 g[r * n + c] += y.grad[r * n + c] * gd[c];
                           }
                           if (double* g = parent_grad(y, 1)) {
                             for (std::size_t r = 0; r < m; ++r)
                               for (std::size_t c = 0; c < n; ++c)
                                 g[c] += y.grad[r * n + c] * ad[r * n + c];
                           }
                         });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * normal_cdf(x[i]);
  return Tensor::from_op(x.shape(), std::move(out), {x}, "gelu", [](const TensorImpl& y) {
    if (double* g = parent_grad(y, 0)) {
      const double* xd = parent_data(y, 0);
      for (std::size_t i = 0; i < y.grad.size(); ++i) {
        g[i] += y.grad[i] * (normal_cdf(xd[i]) + xd[i] * normal_pdf(xd[i]));
      }
    }
  });
}

Tensor layernorm(const Tensor& x, double eps) {
  const auto m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data().data() + r * n;
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += row[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = (row[c] - mu) * is;
  }
  return Tensor::from_op(x.shape(), std::move(out), {x}, "layernorm",
                         [m, n, inv_std](const TensorImpl& y) {
                           double* g = parent_grad(y, 0);
                           if (!g) return;
                           const double inv_n = 1.0 / static_cast<double>(n);
                           for (std::size_t r = 0; r < m; ++r) {
                             const double* dy = y.grad.data() + r * n;
                             const double* yr = y.data.data() + r * n;
                             double mean_dy = 0.0, mean_dyy = 0.0;
                             for (std::size_t c = 0; c < n; ++c) {
                               mean_dy += dy[c];
                               mean_dyy += dy[c] * yr[c];
                             }
                             mean_dy *= inv_n;
                             mean_dyy *= inv_n;
                             for (std::size_t c = 0; c < n; ++c) {
                               g[r * n + c] +=
                                   (*inv_std)[r] * (dy[c] - mean_dy - yr[c] * mean_dyy);
                             }
                           }
                         });
}

Tensor softmax_rows(const Tensor& x) {
  const auto m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data().data() + r * n;
    double mx = row[0];
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, row[c]);
    if (std::isinf(mx) && mx > 0) {
      double hits = 0.0;
      for (std::size_t c = 0; c < n; ++c) hits += row[c] == mx ? 1.0 : 0.0;
      for (std::size_t c = 0; c < n; ++c) out[r * n + c] = row[c] == mx ? 1.0 / hits : 0.0;
      continue;
    }
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += (out[r * n + c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] /= z;
  }
  return Tensor::from_op(x.shape(), std::move(out), {x}, "softmax_rows",
                         [m, n](const TensorImpl& y) {
                           double* g = parent_grad(y, 0);
                           if (!g) return;
                           for (std::size_t r = 0; r < m; ++r) {
                             const double* dy = y.grad.data() + r * n;
                             const double* yr = y.data.data() + r * n;
                             double dot = 0.0;
                             for (std::size_t c = 0; c < n; ++c) dot += dy[c] * yr[c];
                             for (std::size_t c = 0; c < n; ++c) g[r * n + c] += yr[c] * (dy[c] - dot);
                           }
                         });
}

Tensor normalize_rows(const Tensor& x) {
  const auto m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  auto norms = std::make_shared<std::vector<double>>(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data().data() + r * n;
    double ss = 0.0;
    for (std::size_t c = 0; c < n; ++c) ss += row[c] * row[c];
    const double norm = std::sqrt(ss);
    if (norm == 0.0) {
      throw DegenerateInputError("normalize_rows: row " + std::to_string(r) + " has zero norm");
    }
    (*norms)[r] = norm;
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = row[c] / norm;
  }
  return Tensor::from_op(x.shape(), std::move(out), {x}, "normalize_rows",
                         [m, n, norms](const TensorImpl& y) {
                           double* g = parent_grad(y, 0);
                           if (!g) return;
                           for (std::size_t r = 0; r < m; ++r) {
                             const double* dy = y.grad.data() + r * n;
                             const double* yr = y.data.data() + r * n;
                             double dot = 0.0;
                             for (std::size_t c = 0; c < n; ++c) dot += dy[c] * yr[c];
                             for (std::size_t c = 0; c < n; ++c) {
                               g[r * n + c] += (dy[c] - yr[c] * dot) / (*norms)[r];
                             }
                           }
                         });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::from_op({}, {s}, {x}, "sum", [](const TensorImpl& y) {
    TensorImpl* p = y.node->parents[0].impl();
    if (!p->requires_grad) return;
    auto g = p->grad_buffer();
    for (double& v : g) v += y.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ArgumentError("mean of an empty tensor");
  const double inv = 1.0 / static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::from_op({}, {s * inv}, {x}, "mean", [inv](const TensorImpl& y) {
    TensorImpl* p = y.node->parents[0].impl();
    if (!p->requires_grad) return;
    auto g = p->grad_buffer();
    for (double& v : g) v += y.grad[0] * inv;
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ArgumentError("concat of zero tensors");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(ref));
  }
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == ref[d];
    if (!ok) {
      throw DimensionError("concat: shape mismatch " + shape_to_string(ref) + " vs " +
                           shape_to_string(s) + " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= ref[d];
  for (std::size_t d = axis + 1; d < ref.size(); ++d) inner *= ref[d];
  const std::size_t out_stride = out_shape[axis] * inner;

  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[axis] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p.data().data() + o * w, w, out.data() + o * out_stride + offset);
    }
    widths.push_back(w);
    offset += w;
  }
  return Tensor::from_op(std::move(out_shape), std::move(out), parts, "concat",
                         [outer, out_stride, widths](const TensorImpl& y) {
                           std::size_t off = 0;
                           for (std::size_t i = 0; i < widths.size(); ++i) {
                             if (double* g = parent_grad(y, i)) {
                               for (std::size_t o = 0; o < outer; ++o)
                                 for (std::size_t j = 0; j < widths[i]; ++j)
                                   g[o * widths[i] + j] += y.grad[o * out_stride + off + j];
                             }
                             off += widths[i];
                           }
                         });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") along axis " + std::to_string(axis) + " of " + shape_to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t in_stride = s[axis] * inner;
  const std::size_t w = (end - begin) * inner;
  const std::size_t off = begin * inner;
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  std::vector<double> out(outer * w);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.data().data() + o * in_stride + off, w, out.data() + o * w);
  }
  return Tensor::from_op(std::move(out_shape), std::move(out), {x}, "slice",
                         [outer, in_stride, w, off](const TensorImpl& y) {
                           double* g = parent_grad(y, 0);
                           if (!g) return;
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t j = 0; j < w; ++j)
                               g[o * in_stride + off + j] += y.grad[o * w + j];
                         });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  require_matrix(x, "gather_rows");
  const auto m = x.dim(0), n = x.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size() * n);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= m) {
      throw ArgumentError("gather_rows: index " + std::to_string(idx[r]) + " out of range for " +
                          shape_to_string(x.shape()));
    }
    std::copy_n(x.data().data() + idx[r] * n, n, out.data() + r * n);
  }
  const auto count = idx.size();
  return Tensor::from_op({count, n}, std::move(out), {x}, "gather_rows",
                         [n, idx = std::move(idx)](const TensorImpl& y) {
                           double* g = parent_grad(y, 0);
                           if (!g) return;
                           for (std::size_t r = 0; r < idx.size(); ++r)
                             for (std::size_t c = 0; c < n; ++c)
                               g[idx[r] * n + c] += y.grad[r * n + c];
                         });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  const auto m = logits.rows(), n = logits.cols();
  if (targets.size() != m) {
    throw ArgumentError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                        " targets for " + std::to_string(m) + " rows");
  }
  if (m == 0) throw EmptyBatchError("softmax_cross_entropy: no rows");
  auto probs = std::make_shared<std::vector<double>>(m * n);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (tgt[r] >= n) {
      throw ArgumentError("softmax_cross_entropy: target " + std::to_string(tgt[r]) +
                          " out of range for " + std::to_string(n) + " classes");
    }
    const double* row = logits.data().data() + r * n;
    double mx = row[0];
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += std::exp(row[c] - mx);
    const double log_z = mx + std::log(z);
    total += log_z - row[tgt[r]];
    for (std::size_t c = 0; c < n; ++c) (*probs)[r * n + c] = std::exp(row[c] - log_z);
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  return Tensor::from_op({}, {total * inv_m}, {logits}, "softmax_cross_entropy",
                         [m, n, inv_m, probs, tgt = std::move(tgt)](const TensorImpl& y) {
                           double* g = parent_grad(y, 0);
                           if (!g) return;
                           const double s = y.grad[0] * inv_m;
                           for (std::size_t r = 0; r < m; ++r) {
                             for (std::size_t c = 0; c < n; ++c) {
                               g[r * n + c] += s * ((*probs)[r * n + c] - (c == tgt[r] ? 1.0 : 0.0));
                             }
                           }
                         });
}

}  // namespace wave
