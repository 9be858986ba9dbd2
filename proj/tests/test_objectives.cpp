#include <gtest/gtest.h>

#include <cmath>

#include "grad_sweep.hpp"
#include "wave/errors.hpp"
#include "wave/grad_check.hpp"
#include "wave/objectives.hpp"

using namespace wave;
using wave::testing::random_tensor;

namespace {

ObjectiveConfig cfg_with(double tau) {
  ObjectiveConfig c;
  c.temperature = tau;
  return c;
}

// All rows identical: every cosine similarity equals 1.
Tensor constant_rows(std::size_t n, std::size_t d) { return Tensor({n, d}, std::vector<double>(n * d, 0.7)); }

Tensor scale_row(const Tensor& t, std::size_t row, double factor) {
  std::vector<double> v(t.data().begin(), t.data().end());
  const std::size_t d = t.numel() / t.dim(0);
  for (std::size_t j = 0; j < d; ++j) v[row * d + j] *= factor;
  return Tensor(t.shape(), std::move(v));
}

}  // namespace

TEST(ObjectiveConfig, DefaultsAndValidation) {
  const ObjectiveConfig c;
  EXPECT_DOUBLE_EQ(c.temperature, 0.01);
  EXPECT_DOUBLE_EQ(ObjectiveConfig::kReferenceTemperature, 0.01);
  EXPECT_EQ(c.distractors, 3u);
  ObjectiveConfig bad;
  bad.temperature = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(CosineSim, KnownValues) {
  EXPECT_NEAR(cosine_sim(Tensor::vector({1, 0}), Tensor::vector({0, 1})).item(), 0.0, 1e-15);
  EXPECT_NEAR(cosine_sim(Tensor::vector({1, 1}), Tensor::vector({2, 2})).item(), 1.0, 1e-15);
  EXPECT_NEAR(cosine_sim(Tensor::vector({1, 0}), Tensor::vector({-3, 0})).item(), -1.0, 1e-15);
  EXPECT_THROW(cosine_sim(Tensor::vector({0, 0}), Tensor::vector({1, 0})), DegenerateInputError);
}

TEST(RetrievalLoss, ZeroForSinglePair) {
  const Tensor s = random_tensor({1, 6}, 1, false);
  const Tensor t = random_tensor({1, 6}, 2, false);
  EXPECT_EQ(retrieval_loss({s, t, {}}, ObjectiveConfig{}).item(), 0.0);
}

TEST(RetrievalLoss, UniformSimilaritiesGiveLogN) {
  for (std::size_t n : {2u, 5u, 16u}) {
    const double loss = retrieval_loss({constant_rows(n, 4), constant_rows(n, 4), {}}, ObjectiveConfig{}).item();
    EXPECT_NEAR(loss, std::log(static_cast<double>(n)), 1e-12);
  }
}

TEST(RetrievalLoss, MatchesExplicitFormula) {
  const std::size_t n = 5;
  const Tensor s = random_tensor({n, 4}, 3, false);
  const Tensor t = random_tensor({n, 4}, 4, false);
  const double tau = 0.1;
  double expected = 0.0;
  auto cos = [&](std::size_t i, std::size_t j) { return cosine_sim(slice(s, 0, i, i + 1), slice(t, 0, j, j + 1)).item(); };
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += std::exp(cos(i, j) / tau);
      col += std::exp(cos(j, i) / tau);
    }
    expected += 0.5 * (-(cos(i, i) / tau - std::log(row)) - (cos(i, i) / tau - std::log(col)));
  }
  expected /= static_cast<double>(n);
  EXPECT_NEAR(retrieval_loss({s, t, {}}, cfg_with(tau)).item(), expected, 1e-12);
}

TEST(RetrievalLoss, SymmetricUnderSourceTargetSwapExactly) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Tensor s = random_tensor({7, 5}, 2 * seed, false);
    const Tensor t = random_tensor({7, 5}, 2 * seed + 1, false);
    EXPECT_EQ(retrieval_loss({s, t, {}}, ObjectiveConfig{}).item(),
              retrieval_loss({t, s, {}}, ObjectiveConfig{}).item());
  }
}

TEST(RetrievalLoss, InvariantToPositiveRescaling) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Tensor s = random_tensor({6, 4}, 100 + seed, false);
    const Tensor t = random_tensor({6, 4}, 200 + seed, false);
    const double base = retrieval_loss({s, t, {}}, ObjectiveConfig{}).item();
    const double factor = 0.01 + static_cast<double>(seed) * 3.7;
    EXPECT_NEAR(retrieval_loss({scale_row(s, seed % 6, factor), t, {}}, ObjectiveConfig{}).item(), base, 1e-12);
    EXPECT_NEAR(retrieval_loss({s, scale_row(t, (seed + 1) % 6, factor), {}}, ObjectiveConfig{}).item(), base,
                1e-12);
  }
}

TEST(RetrievalLoss, Errors) {
  EXPECT_THROW(retrieval_loss({}, ObjectiveConfig{}), EmptyBatchError);
  const Tensor s = random_tensor({2, 3}, 1, false);
  EXPECT_THROW(retrieval_loss({s, random_tensor({3, 3}, 2, false), {}}, ObjectiveConfig{}), DimensionError);
  EXPECT_THROW(retrieval_loss({s, s, random_tensor({2, 1, 3}, 3, false)}, ObjectiveConfig{}), ArgumentError);
}

TEST(QaLoss, UniformSimilaritiesGiveLogNPlusOne) {
  for (std::size_t k : {1u, 3u, 5u}) {
    const std::size_t n = 4;
    const Tensor d({n, k, 3}, std::vector<double>(n * k * 3, 0.7));
    const double loss = qa_loss({constant_rows(n, 3), constant_rows(n, 3), d}, ObjectiveConfig{}).item();
    EXPECT_NEAR(loss, std::log(static_cast<double>(k + 1)), 1e-12);
  }
}

TEST(QaLoss, OnlyOwnDistractorsCompete) {
  const Tensor s = random_tensor({3, 4}, 7, false);
  const Tensor t = random_tensor({3, 4}, 8, false);
  const Tensor d = random_tensor({3, 2, 4}, 9, false);
  const double tau = 0.2;
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor si = slice(s, 0, i, i + 1);
    const double pos = cosine_sim(si, slice(t, 0, i, i + 1)).item() / tau;
    double z = std::exp(pos);
    for (std::size_t j = 0; j < 2; ++j) {
      z += std::exp(cosine_sim(si, slice(slice(d, 0, i, i + 1), 1, j, j + 1)).item() / tau);
    }
    expected += std::log(z) - pos;
  }
  EXPECT_NEAR(qa_loss({s, t, d}, cfg_with(tau)).item(), expected / 3.0, 1e-12);
}

TEST(QaLoss, InvariantToPositiveRescaling) {
  const Tensor s = random_tensor({4, 5}, 10, false);
  const Tensor t = random_tensor({4, 5}, 11, false);
  const Tensor d = random_tensor({4, 3, 5}, 12, false);
  const double base = qa_loss({s, t, d}, ObjectiveConfig{}).item();
  EXPECT_NEAR(qa_loss({scale_row(s, 1, 9.0), t, d}, ObjectiveConfig{}).item(), base, 1e-12);
  EXPECT_NEAR(qa_loss({s, scale_row(t, 2, 0.05), d}, ObjectiveConfig{}).item(), base, 1e-12);
  std::vector<double> dv(d.data().begin(), d.data().end());
  for (std::size_t j = 5; j < 10; ++j) dv[j] *= 40.0;
  EXPECT_NEAR(qa_loss({s, t, Tensor(d.shape(), dv)}, ObjectiveConfig{}).item(), base, 1e-12);
}

TEST(QaLoss, MissingDistractorsThrow) {
  const Tensor s = random_tensor({2, 3}, 1, false);
  EXPECT_THROW(qa_loss({s, s, {}}, ObjectiveConfig{}), ArgumentError);
  EXPECT_THROW(qa_loss({}, ObjectiveConfig{}), EmptyBatchError);
}

TEST(LossGradients, FourSampleBatch) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor s = random_tensor({4, 6}, 300 + seed);
    const Tensor t = random_tensor({4, 6}, 400 + seed);
    const Tensor d = random_tensor({4, 3, 6}, 500 + seed);
    const ObjectiveConfig c = cfg_with(0.1);
    const auto r = grad_check_leaves([&] { return retrieval_loss({s, t, {}}, c); }, {s, t});
    EXPECT_TRUE(r.passed) << r.max_rel_error;
    const auto q = grad_check_leaves([&] { return qa_loss({s, t, d}, c); }, {s, t, d});
    EXPECT_TRUE(q.passed) << q.max_rel_error;
  }
}

// At tau = 0.01 the logits reach 100: eps = 1e-5 leaves visible truncation
// error on the steep coordinates, while the saturated ones fall below the
// roundoff floor. A smaller step with an absolute floor handles both.
TEST(LossGradients, DefaultTemperature) {
  GradCheckOptions o;
  o.eps = 3e-6;
  o.abs_floor = 1e-4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor s = random_tensor({4, 6}, 300 + seed);
    const Tensor t = random_tensor({4, 6}, 400 + seed);
    const Tensor d = random_tensor({4, 3, 6}, 500 + seed);
    const ObjectiveConfig c;
    const auto r = grad_check_leaves([&] { return retrieval_loss({s, t, {}}, c); }, {s, t}, o);
    EXPECT_TRUE(r.passed) << r.max_rel_error;
    const auto q = grad_check_leaves([&] { return qa_loss({s, t, d}, c); }, {s, t, d}, o);
    EXPECT_TRUE(q.passed) << q.max_rel_error;
  }
}
