#include <gtest/gtest.h>

#include "cdn/autograd.hpp"
#include "cdn/error.hpp"
#include "cdn/layers.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace cdn;
using nn::Matrix;
using nn::Var;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1, double hi = 1) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

/// Reduces any matrix to a scalar with fixed random weights so every output
/// entry gets a distinct upstream gradient.
Var probe(const Var& x, const Matrix& w) {
  return nn::bce_with_logits(x, Matrix::Zero(x.rows(), x.cols()), w, 1.0);
}

void expect_grads_match(nn::ParameterStore& store, const std::function<Var()>& f,
                        double tol = 1e-6) {
  Rng rng(99);
  testsupport::GradCheckOptions opt;
  opt.per_tensor = 1000;
  opt.tolerance = tol;
  const auto rep = testsupport::gradient_check(store, f, rng, opt);
  EXPECT_EQ(rep.passed, rep.sampled) << "worst relative error " << rep.worst;
}

}  // namespace

TEST(Autograd, LinearReluSigmoid) {
  Rng rng(1);
  nn::ParameterStore s;
  auto x = s.create("x", nn::ParamGroup::kExtractor, random_matrix(3, 4, rng));
  auto w = s.create("w", nn::ParamGroup::kExtractor, random_matrix(4, 5, rng));
  auto b = s.create("b", nn::ParamGroup::kExtractor, random_matrix(1, 5, rng));
  const Matrix pw = random_matrix(3, 5, rng, 0.5, 1.5);
  expect_grads_match(s, [&] { return probe(nn::sigmoid(nn::relu(nn::linear(x, w, b))), pw); });
}

TEST(Autograd, MatmulAddScale) {
  Rng rng(2);
  nn::ParameterStore s;
  auto a = s.create("a", nn::ParamGroup::kExtractor, random_matrix(3, 4, rng));
  auto b = s.create("b", nn::ParamGroup::kExtractor, random_matrix(4, 2, rng));
  auto c = s.create("c", nn::ParamGroup::kExtractor, random_matrix(3, 2, rng));
  const Matrix pw = random_matrix(3, 2, rng, 0.5, 1.5);
  expect_grads_match(s, [&] { return probe(nn::add(nn::scale(nn::matmul(a, b), 0.7), c), pw); });
}

TEST(Autograd, LayerNorm) {
  Rng rng(3);
  nn::ParameterStore s;
  auto x = s.create("x", nn::ParamGroup::kExtractor, random_matrix(4, 6, rng));
  auto g = s.create("g", nn::ParamGroup::kExtractor, random_matrix(1, 6, rng, 0.5, 1.5));
  auto b = s.create("b", nn::ParamGroup::kExtractor, random_matrix(1, 6, rng));
  const Matrix pw = random_matrix(4, 6, rng, 0.5, 1.5);
  expect_grads_match(s, [&] { return probe(nn::layer_norm(x, g, b), pw); });
}

TEST(Autograd, MultiHeadAttention) {
  Rng rng(4);
  nn::ParameterStore s;
  auto q = s.create("q", nn::ParamGroup::kExtractor, random_matrix(3, 8, rng));
  auto k = s.create("k", nn::ParamGroup::kExtractor, random_matrix(5, 8, rng));
  auto v = s.create("v", nn::ParamGroup::kExtractor, random_matrix(5, 8, rng));
  const Matrix pw = random_matrix(3, 8, rng, 0.5, 1.5);
  expect_grads_match(s, [&] { return probe(nn::multi_head_attention(q, k, v, 2), pw); });
}

TEST(Autograd, AttentionMapRowsSumToOne) {
  Rng rng(5);
  const Var q = nn::constant(random_matrix(3, 8, rng));
  const Var k = nn::constant(random_matrix(6, 8, rng));
  Matrix mean;
  nn::multi_head_attention(q, k, k, 4, &mean);
  ASSERT_EQ(mean.rows(), 3);
  ASSERT_EQ(mean.cols(), 6);
  EXPECT_GE(mean.minCoeff(), 0.0);
  for (Eigen::Index r = 0; r < 3; ++r) EXPECT_NEAR(mean.row(r).sum(), 1.0, 1e-12);
}

TEST(Autograd, Im2col) {
  Rng rng(6);
  nn::ParameterStore s;
  auto x = s.create("x", nn::ParamGroup::kExtractor, random_matrix(5 * 6, 2, rng));
  const Var probe_shape = nn::im2col(x, 5, 6, 3, 2, 1);
  const Matrix pw = random_matrix(probe_shape.rows(), probe_shape.cols(), rng, 0.5, 1.5);
  EXPECT_EQ(probe_shape.rows(), 3 * 3);
  EXPECT_EQ(probe_shape.cols(), 3 * 3 * 2);
  expect_grads_match(s, [&] { return probe(nn::im2col(x, 5, 6, 3, 2, 1), pw); });
}

TEST(Autograd, GatherRowsWithRepeats) {
  Rng rng(7);
  nn::ParameterStore s;
  auto x = s.create("x", nn::ParamGroup::kExtractor, random_matrix(4, 3, rng));
  const std::vector<int> rows{2, 0, 2};
  const Matrix pw = random_matrix(3, 3, rng, 0.5, 1.5);
  expect_grads_match(s, [&] { return probe(nn::gather_rows(x, rows), pw); });
}

TEST(Autograd, LossOps) {
  Rng rng(8);
  nn::ParameterStore s;
  auto logits = s.create("logits", nn::ParamGroup::kExtractor, random_matrix(4, 3, rng, -2, 2));
  auto boxes = s.create("boxes", nn::ParamGroup::kExtractor, random_matrix(2, 4, rng, 0.3, 0.6));
  const std::vector<int> targets{0, 2, 1, 2};
  const std::vector<double> row_w{1.0, 0.5, 2.0, 1.5};
  Matrix target_boxes(2, 4);
  target_boxes << 0.5, 0.45, 0.4, 0.3, 0.35, 0.5, 0.2, 0.5;
  Matrix bce_t = Matrix::Zero(4, 3);
  bce_t(1, 2) = 1;
  const Matrix bce_w = random_matrix(4, 3, rng, 0.5, 2);
  expect_grads_match(s, [&] {
    const std::array<Var, 4> parts{nn::softmax_cross_entropy(logits, targets, row_w, 4.0),
                                   nn::bce_with_logits(logits, bce_t, bce_w, 2.0),
                                   nn::l1_loss(boxes, target_boxes, 2.0),
                                   nn::giou_loss(boxes, target_boxes, 2.0)};
    const std::array<double, 4> coefs{1.0, 0.5, 2.0, 1.0};
    return nn::weighted_sum(parts, coefs);
  });
}

TEST(Autograd, SharedSubexpressionAccumulates) {
  nn::ParameterStore s;
  Matrix v(1, 1);
  v << 0.3;
  auto x = s.create("x", nn::ParamGroup::kExtractor, v);
  const Var y = nn::sigmoid(x);
  const Var z = nn::add(nn::matmul(y, y), y);  // y^2 + y
  nn::backward(z);
  const double sy = 1.0 / (1.0 + std::exp(-0.3));
  EXPECT_NEAR(x.grad()(0, 0), (2 * sy + 1) * sy * (1 - sy), 1e-14);
}

TEST(Autograd, DetachBlocksGradient) {
  nn::ParameterStore s;
  Matrix v(1, 1);
  v << 0.3;
  auto x = s.create("x", nn::ParamGroup::kExtractor, v);
  const Var y = nn::add(nn::detach(nn::scale(x, 3.0)), x);
  nn::backward(y);
  EXPECT_EQ(x.grad()(0, 0), 1.0);
}

TEST(Autograd, FrozenLeafGetsNoGradient) {
  nn::ParameterStore s;
  auto x = s.create("x", nn::ParamGroup::kExtractor, Matrix::Ones(1, 1));
  s.set_trainable(nn::ParamGroup::kExtractor, false);
  const Var y = nn::scale(x, 2.0);
  EXPECT_FALSE(y.requires_grad());
  nn::backward(y);
  EXPECT_EQ(x.node()->grad.size(), 0);
}

TEST(Autograd, ShapeMismatchThrows) {
  const Var a = nn::constant(Matrix::Ones(2, 3));
  const Var b = nn::constant(Matrix::Ones(2, 3));
  EXPECT_THROW(nn::matmul(a, b), ShapeError);
}
