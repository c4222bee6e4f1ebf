#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mweforge/layers.hpp"

using namespace mweforge;

namespace {

Matrix row(std::initializer_list<double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) m(0, i++) = v;
  return m;
}

}  // namespace

TEST(Heaviside, StepValues) {
  const Matrix h = heaviside(row({0.5, 0.0, -2.0, 1e-300, -0.0}));
  EXPECT_EQ(h, row({1, 0, 0, 1, 0}));
}

TEST(Heaviside, SurrogateBackward) {
  for (double k : {1.0, 10.0}) {
    Tape tape;
    const Matrix x = row({-0.4, -0.05, 0.0, 0.1, 0.7});
    Variable v = tape.leaf(x);
    Variable h = heaviside(v, k);
    EXPECT_EQ(h.value(), heaviside(x));
    tape.backward(ad::sum(h));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-k * x(i)));
      EXPECT_NEAR(tape.grad(v)(i), k * s * (1 - s), 1e-12);
    }
  }
}

TEST(ZeroDiag, Examples) {
  EXPECT_EQ(zero_diag(Matrix::Identity(3, 3)), Matrix::Zero(3, 3));
  EXPECT_EQ(zero_diag(Matrix::Zero(3, 3)), Matrix::Zero(3, 3));
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  Matrix expected(2, 2);
  expected << 0, 2, 3, 0;
  EXPECT_EQ(zero_diag(m), expected);
  EXPECT_THROW(zero_diag(Matrix::Zero(2, 3)), ad::ShapeError);
}

TEST(LateralInhibition, OpenAndClosedGates) {
  std::mt19937_64 rng(1);
  const Matrix x = uniform_matrix(4, 3, 2.0, rng);
  EXPECT_EQ(li_forward(x, LateralInhibitionLayer::all_pass(3)), x);
  const LateralInhibitionLayer closed{Matrix::Zero(3, 3), Matrix::Constant(1, 3, -1.0), 10.0};
  EXPECT_TRUE((li_forward(x, closed).array() == 0.0).all());
}

TEST(LateralInhibition, HandExample) {
  // ZeroDiag(W^T) has ones off the diagonal
  const LateralInhibitionLayer layer{Matrix::Ones(2, 2), Matrix::Zero(1, 2), 10.0};
  Tape tape;
  const Matrix x = row({2, -3});
  const Matrix pre = li_preactivation(tape.constant(x), tape.constant(layer.weight), tape.constant(layer.bias)).value();
  EXPECT_EQ(pre, row({-3, 2}));
  EXPECT_EQ(heaviside(pre), row({0, 1}));
  EXPECT_EQ(li_forward(x, layer), row({0, -3}));
}

TEST(LateralInhibition, RejectsBadShapes) {
  Tape tape;
  EXPECT_THROW(li_forward(tape.leaf(Matrix::Ones(1, 3)), tape.leaf(Matrix::Zero(3, 2)), tape.leaf(Matrix::Zero(1, 3)), 10.0),
               ad::ShapeError);
  EXPECT_THROW(li_forward(tape.leaf(Matrix::Ones(1, 2)), tape.leaf(Matrix::Zero(3, 3)), tape.leaf(Matrix::Zero(1, 3)), 10.0),
               ad::ShapeError);
}

TEST(LateralInhibition, InitRanges) {
  std::mt19937_64 rng(2);
  const auto layer = LateralInhibitionLayer::init(8, 10.0, rng);
  EXPECT_LE(layer.weight.cwiseAbs().maxCoeff(), 0.1);
  EXPECT_EQ(layer.bias, Matrix::Constant(1, 8, 0.5));
}

TEST(LateralInhibition, SmoothedGateGradient) {
  // d/dX of sum(X (.) s(pre)) with s = logistic(k .), pre = X Z + B, Z = ZeroDiag(W^T):
  //   s(pre) + (X (.) s'(pre)) Z^T
  std::mt19937_64 rng(3);
  const double k = 4.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix X = uniform_matrix(3, 3, 1.0, rng), W = uniform_matrix(3, 3, 1.0, rng), B = uniform_matrix(1, 3, 0.5, rng);
    Tape tape;
    Variable x = tape.leaf(X), w = tape.leaf(W), b = tape.leaf(B);
    tape.backward(ad::sum(li_forward(x, w, b, k)));
    const Matrix Z = zero_diag(Matrix(W.transpose()));
    const Matrix pre = (X * Z).rowwise() + B.row(0);
    const Matrix s = pre.unaryExpr([k](double v) { return 1.0 / (1.0 + std::exp(-k * v)); });
    const Matrix ds = s.unaryExpr([k](double v) { return k * v * (1.0 - v); });
    const Matrix dpre = X.cwiseProduct(ds);
    const Matrix dX = s + dpre * Z.transpose();
    const Matrix dW = zero_diag(Matrix((X.transpose() * dpre).transpose()));
    const Matrix dB = dpre.colwise().sum();
    EXPECT_LE((tape.grad(x) - dX).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((tape.grad(w) - dW).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((tape.grad(b) - dB).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(LateralInhibition, SmoothModeMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  ad::LossBuilder<double> f = [](Tape&, const std::vector<Variable>& v) {
    return ad::sum(li_forward(v[0], v[1], v[2], 10.0, GateForward::smooth));
  };
  const auto r = ad::grad_check<double>(f, {uniform_matrix(2, 3, 1.0, rng), uniform_matrix(3, 3, 0.2, rng), uniform_matrix(1, 3, 0.1, rng)}, 1e-5);
  EXPECT_LE(r.max_relative_error, 1e-6);
}

TEST(LateralInhibitionProperty, SelfExclusion) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 6);
    const Matrix x = uniform_matrix(1, d, 3.0, rng), W = uniform_matrix(d, d, 1.0, rng), B = uniform_matrix(1, d, 1.0, rng);
    const auto j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(d));
    Matrix y = x;
    y(0, j) = uniform_matrix(1, 1, 100.0, rng)(0, 0);
    Tape tape;
    Variable w = tape.constant(W), b = tape.constant(B);
    ASSERT_EQ(li_preactivation(tape.constant(x), w, b).value()(0, j), li_preactivation(tape.constant(y), w, b).value()(0, j));
  }
}

TEST(GradientReversal, ForwardIdentityBackwardNegated) {
  Tape tape;
  const Matrix x = row({1.5, -2.0, 0.25});
  Variable v = tape.leaf(x);
  Variable r = grl_apply(v, 0.01);
  EXPECT_EQ(r.value(), x);
  tape.backward(ad::sum(r));
  EXPECT_EQ(tape.grad(v), Matrix::Constant(1, 3, -0.01));
  EXPECT_THROW(grl_apply(v, -1.0), std::invalid_argument);
}

TEST(GradientReversal, LambdaZeroBlocks) {
  Tape tape;
  Variable v = tape.leaf(row({1, 2}));
  tape.backward(ad::sum(ad::mul(grl_apply(v, 0.0), v)));
  // only the direct path survives: d/dv of v (.) stop(v) is stop(v)
  EXPECT_EQ(tape.grad(v), row({1, 2}));
}

TEST(ClassifyTokens, UniformWithZeroHead) {
  std::mt19937_64 rng(6);
  const Matrix p = classify_tokens(uniform_matrix(4, 5, 1.0, rng), LinearHead::zeros(3, 5));
  EXPECT_TRUE(p.isApproxToConstant(1.0 / 3.0, 1e-15));
}

TEST(ClassifyTokens, AllPassLiEqualsNoLi) {
  std::mt19937_64 rng(7);
  const Matrix e = uniform_matrix(4, 5, 1.0, rng);
  const LinearHead head{uniform_matrix(3, 5, 1.0, rng), uniform_matrix(1, 3, 1.0, rng)};
  const auto li = LateralInhibitionLayer::all_pass(5);
  EXPECT_EQ(classify_tokens(e, head, &li), classify_tokens(e, head));
}

TEST(ClassifyTokens, RowsSumToOneAndArgmaxShiftInvariant) {
  std::mt19937_64 rng(8);
  const Matrix e = uniform_matrix(6, 5, 2.0, rng);
  LinearHead head{uniform_matrix(4, 5, 1.0, rng), uniform_matrix(1, 4, 1.0, rng)};
  const Matrix p = classify_tokens(e, head);
  for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
  LinearHead shifted = head;
  shifted.bias.array() += 7.5;
  const Matrix q = classify_tokens(e, shifted);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index a = 0, b = 0;
    p.row(r).maxCoeff(&a);
    q.row(r).maxCoeff(&b);
    EXPECT_EQ(a, b);
  }
  EXPECT_THROW(classify_tokens(Matrix::Zero(2, 4), head), ad::ShapeError);
}

TEST(ToyEncoder, IdentityMixingReturnsEmbeddings) {
  std::mt19937_64 rng(9);
  ToyEncoder enc = ToyEncoder::init(6, 4, 0, PoolMode::mean, rng);
  enc.mixers[0] = Matrix::Identity(4, 4);
  const auto out = encode_sentence({3, 1, 5}, enc);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(out.tokens.row(i), enc.embedding.row(std::array<int, 3>{3, 1, 5}[i]));
}

TEST(ToyEncoder, WindowMixing) {
  std::mt19937_64 rng(10);
  const ToyEncoder enc = ToyEncoder::init(5, 3, 1, PoolMode::first, rng);
  const std::vector<std::size_t> ids{2, 4, 1};
  const auto out = encode_sentence(ids, enc);
  for (int i = 0; i < 3; ++i) {
    Matrix expected = Matrix::Zero(1, 3);
    for (int o = -1; o <= 1; ++o) {
      const int j = i + o;
      if (j < 0 || j >= 3) continue;
      expected += (enc.mixers[static_cast<std::size_t>(o + 1)] * enc.embedding.row(static_cast<Eigen::Index>(ids[static_cast<std::size_t>(j)])).transpose()).transpose();
    }
    EXPECT_LE((out.tokens.row(i) - expected).cwiseAbs().maxCoeff(), 1e-14);
  }
  EXPECT_EQ(out.summary, out.tokens.row(0));
}

TEST(ToyEncoder, SingleTokenMeanSummary) {
  std::mt19937_64 rng(11);
  const ToyEncoder enc = ToyEncoder::init(5, 3, 2, PoolMode::mean, rng);
  const auto out = encode_sentence({4}, enc);
  EXPECT_EQ(out.summary, out.tokens);
  EXPECT_THROW(encode_sentence({5}, enc), std::out_of_range);
}

TEST(ToyEncoder, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  const ToyEncoder enc = ToyEncoder::init(4, 2, 1, PoolMode::mean, rng);
  ad::LossBuilder<double> f = [](Tape&, const std::vector<Variable>& v) {
    EncoderVars vars{v[0], {v[1], v[2], v[3]}};
    Encoded e = encode_batch(vars, {1, 3, 0, 2, 2}, {3, 2}, PoolMode::mean);
    return ad::add(ad::sum(ad::sigmoid(e.tokens)), ad::sum(ad::mul(e.summary, e.summary)));
  };
  const auto r = ad::grad_check<double>(f, {enc.embedding, enc.mixers[0], enc.mixers[1], enc.mixers[2]}, 1e-5);
  EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(Discriminator, Probabilities) {
  std::mt19937_64 rng(13);
  LanguageDiscriminator zero = LanguageDiscriminator::init(3, 4, rng);
  EXPECT_TRUE(discriminate_language(uniform_matrix(1, 4, 1.0, rng), zero, 0.01).isApproxToConstant(1.0 / 3.0, 1e-15));
  LanguageDiscriminator ld{uniform_matrix(4, 4, 1.0, rng), uniform_matrix(1, 4, 1.0, rng), uniform_matrix(3, 4, 1.0, rng),
                           uniform_matrix(1, 3, 1.0, rng)};
  const Matrix p = discriminate_language(uniform_matrix(1, 4, 3.0, rng), ld, 0.01);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  EXPECT_THROW(discriminate_language(Matrix::Zero(1, 5), ld, 0.01), ad::ShapeError);
}

TEST(Discriminator, LambdaZeroGivesEncoderNoGradient) {
  std::mt19937_64 rng(14);
  LanguageDiscriminator ld{uniform_matrix(3, 3, 1.0, rng), uniform_matrix(1, 3, 1.0, rng), uniform_matrix(2, 3, 1.0, rng),
                           uniform_matrix(1, 2, 1.0, rng)};
  Tape tape;
  Variable summary = tape.leaf(uniform_matrix(2, 3, 1.0, rng));
  DiscriminatorVars vars{tape.leaf(ld.hidden_weight), tape.leaf(ld.hidden_bias), tape.leaf(ld.out_weight), tape.leaf(ld.out_bias)};
  auto ce = ad::softmax_cross_entropy(discriminator_logits(vars, grl_apply(summary, 0.0)), {0, 1});
  tape.backward(ce.loss);
  EXPECT_TRUE(tape.grad(summary).isZero(0));
  EXPECT_FALSE(tape.grad(vars.out_weight).isZero(0));
}
