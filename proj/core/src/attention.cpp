#include "wave/attention.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "wave/errors.hpp"

namespace wave {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Strided = Eigen::OuterStride<>;
using ConstBlock = Eigen::Map<const RowMat, 0, Strided>;
using MutBlock = Eigen::Map<RowMat, 0, Strided>;

}  // namespace

Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        std::span<const Segment> segments, std::size_t n_heads) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("causal_attention: q/k/v shapes " + shape_to_string(q.shape()) + ", " +
                         shape_to_string(k.shape()) + ", " + shape_to_string(v.shape()));
  }
  const std::size_t rows = q.dim(0), width = q.dim(1);
  if (n_heads == 0 || width % n_heads != 0) {
    throw DimensionError("causal_attention: width " + std::to_string(width) +
                         " not divisible into " + std::to_string(n_heads) + " heads");
  }
  for (const auto& seg : segments) {
    if (seg.begin + seg.length > rows) {
      throw DimensionError("causal_attention: segment exceeds " + std::to_string(rows) + " rows");
    }
  }
  const std::size_t hd = width / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const Strided stride(static_cast<Eigen::Index>(width));
  std::vector<Segment> segs(segments.begin(), segments.end());
  auto probs = std::make_shared<std::vector<RowMat>>();
  probs->reserve(segs.size() * n_heads);

  std::vector<double> out(rows * width, 0.0);
  for (const auto& seg : segs) {
    const auto len = static_cast<Eigen::Index>(seg.length);
    for (std::size_t h = 0; h < n_heads; ++h) {
      const std::size_t off = seg.begin * width + h * hd;
      ConstBlock qh(q.data().data() + off, len, hd, stride);
      ConstBlock kh(k.data().data() + off, len, hd, stride);
      ConstBlock vh(v.data().data() + off, len, hd, stride);
      RowMat p = (qh * kh.transpose()) * scale;
      for (Eigen::Index i = 0; i < len; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j <= i; ++j) mx = std::max(mx, p(i, j));
        double z = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) z += (p(i, j) = std::exp(p(i, j) - mx));
        for (Eigen::Index j = 0; j <= i; ++j) p(i, j) /= z;
        for (Eigen::Index j = i + 1; j < len; ++j) p(i, j) = 0.0;
      }
      MutBlock(out.data() + off, len, hd, stride).noalias() = p * vh;
      probs->push_back(std::move(p));
    }
  }

  return Tensor::from_op(
      q.shape(), std::move(out), {q, k, v}, "causal_attention",
      [segs = std::move(segs), probs, n_heads, hd, width, scale](const TensorImpl& y) {
        const Strided stride(static_cast<Eigen::Index>(width));
        TensorImpl* qi = y.node->parents[0].impl();
        TensorImpl* ki = y.node->parents[1].impl();
        TensorImpl* vi = y.node->parents[2].impl();
        double* gq = qi->requires_grad ? qi->grad_buffer().data() : nullptr;
        double* gk = ki->requires_grad ? ki->grad_buffer().data() : nullptr;
        double* gv = vi->requires_grad ? vi->grad_buffer().data() : nullptr;
        std::size_t idx = 0;
        for (const auto& seg : segs) {
          const auto len = static_cast<Eigen::Index>(seg.length);
          for (std::size_t h = 0; h < n_heads; ++h, ++idx) {
            const RowMat& p = (*probs)[idx];
            const std::size_t off = seg.begin * width + h * hd;
            ConstBlock dout(y.grad.data() + off, len, hd, stride);
            ConstBlock qh(qi->data.data() + off, len, hd, stride);
            ConstBlock kh(ki->data.data() + off, len, hd, stride);
            ConstBlock vh(vi->data.data() + off, len, hd, stride);
            if (gv) MutBlock(gv + off, len, hd, stride).noalias() += p.transpose() * dout;
            if (!gq && !gk) continue;
            RowMat dp = dout * vh.transpose();
            // Softmax backward row by row; masked entries have p = 0.
            for (Eigen::Index i = 0; i < len; ++i) {
              const double dot = (dp.row(i).array() * p.row(i).array()).sum();
              dp.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
            }
            dp *= scale;
            if (gq) MutBlock(gq + off, len, hd, stride).noalias() += dp * kh;
            if (gk) MutBlock(gk + off, len, hd, stride).noalias() += dp.transpose() * qh;
          }
        }
      });
}

}  // namespace wave
