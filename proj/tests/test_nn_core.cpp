#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace shockcast;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& x : m.data()) x = scale * standard_normal(rng);
  return m;
}

double weighted_sum(const Matrix& m, const Matrix& w) {
  double s = 0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * w.data()[i];
  return s;
}

ParamSlot slot(Matrix& v, const Matrix& g) { return {v.data(), g.data(), false}; }

}  // namespace

TEST(Lstm, ZeroWeightsGiveZeroStates) {
  Rng rng(1);
  const auto p = LstmParams::zeros(3, 4);
  const auto out = lstm_forward(random_matrix(rng, 5, 3), p);
  for (double x : out.hidden.data()) EXPECT_EQ(x, 0.0);
  for (double x : out.cache.cells.data()) EXPECT_EQ(x, 0.0);
}

TEST(Lstm, SingleStepMatchesClosedForm) {
  Rng rng(2);
  const auto p = LstmParams::init(2, 3, rng);
  const Matrix x(1, 2, std::vector<double>{0.7, -1.1});
  const auto out = lstm_forward(x, p);
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (std::size_t j = 0; j < 3; ++j) {
    auto pre = [&](std::size_t gate) {
      const std::size_t r = gate * 3 + j;
      return p.w_input(r, 0) * 0.7 + p.w_input(r, 1) * -1.1 + p.bias(r, 0);
    };
    const double c = sig(pre(0)) * std::tanh(pre(2));
    EXPECT_NEAR(out.final[j], sig(pre(3)) * std::tanh(c), 1e-14);
  }
}

TEST(Lstm, ShapeAndValueErrors) {
  Rng rng(3);
  const auto p = LstmParams::init(2, 3, rng);
  EXPECT_THROW(lstm_forward(Matrix(4, 3), p), ContractError);
  EXPECT_THROW(lstm_forward(Matrix(0, 2), p), ContractError);
  Matrix bad(2, 2);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(lstm_forward(bad, p), NumericError);
}

TEST(Lstm, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  for (std::size_t k : {1u, 4u}) {
    auto p = LstmParams::init(3, 5, rng);
    for (double& x : p.w_input.data()) x *= 2.0;
    const Matrix x = random_matrix(rng, k, 3);
    const Matrix w = random_matrix(rng, k, 5);
    auto grads = LstmParams::zeros(3, 5);
    const auto out = lstm_forward(x, p);
    lstm_backward(p, out.cache, w, grads);
    const std::vector<ParamSlot> slots = {slot(p.w_input, grads.w_input), slot(p.w_hidden, grads.w_hidden),
                                          slot(p.bias, grads.bias)};
    const auto r = grad_check([&] { return weighted_sum(lstm_forward(x, p).hidden, w); }, slots);
    EXPECT_LT(r.max_relative_error, 1e-5) << "k=" << k;
  }
}

TEST(Attention, UniformWeightsWhenQueryIsZero) {
  Rng rng(5);
  auto p = AttentionParams::init(4, 3, rng);
  p.w_query = Matrix(4, 3);
  const Matrix h = random_matrix(rng, 5, 4);
  const auto out = attention_forward(h, p);
  for (double a : out.weights.data()) EXPECT_NEAR(a, 0.2, 1e-15);
  // With uniform weights the context is the mean of the value rows.
  const Matrix v = matmul(h, p.w_value);
  for (std::size_t q = 0; q < 3; ++q) {
    double m = 0;
    for (std::size_t j = 0; j < 5; ++j) m += v(j, q);
    EXPECT_NEAR(out.context[q], m / 5.0, 1e-14);
  }
}

TEST(Attention, SingleStepReturnsItsValue) {
  Rng rng(6);
  const auto p = AttentionParams::init(4, 3, rng);
  const Matrix h = random_matrix(rng, 1, 4);
  const auto out = attention_forward(h, p);
  EXPECT_EQ(out.weights(0, 0), 1.0);
  const Matrix v = matmul(h, p.w_value);
  for (std::size_t q = 0; q < 3; ++q) EXPECT_NEAR(out.context[q], v(0, q), 1e-15);
}

TEST(Attention, RowsAreDistributions) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng() % 8;
    auto p = AttentionParams::init(6, 4, rng);
    const auto out = attention_forward(random_matrix(rng, k, 6, 3.0), p);
    for (std::size_t i = 0; i < k; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_GE(out.weights(i, j), 0.0);
        s += out.weights(i, j);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Attention, SoftmaxIsShiftInvariantAndStable) {
  Matrix a(1, 3, std::vector<double>{1, 2, 3});
  Matrix b(1, 3, std::vector<double>{1001, 1002, 1003});
  const auto sa = softmax_rows(a), sb = softmax_rows(b);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(sa(0, j), sb(0, j), 1e-15);
  Matrix big(1, 2, std::vector<double>{1e308, -1e308});
  const auto s = softmax_rows(big);
  EXPECT_EQ(s(0, 0), 1.0);
  EXPECT_EQ(s(0, 1), 0.0);
}

TEST(Attention, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  for (std::size_t k : {1u, 3u, 6u}) {
    auto p = AttentionParams::init(4, 3, rng);
    for (auto* m : {&p.w_query, &p.w_key})
      for (double& x : m->data()) x *= 3.0;
    Matrix h = random_matrix(rng, k, 4);
    const Vector w = {0.3, -1.2, 0.8};
    auto grads = AttentionParams::zeros(4, 3);
    Matrix d_states;
    attention_backward(p, attention_forward(h, p).cache, w, grads, d_states);
    const std::vector<ParamSlot> slots = {slot(p.w_query, grads.w_query), slot(p.w_key, grads.w_key),
                                          slot(p.w_value, grads.w_value), slot(h, d_states)};
    auto loss = [&] { return dot(attention_forward(h, p).context, w); };
    EXPECT_LT(grad_check(loss, slots).max_relative_error, 1e-6) << "k=" << k;
  }
}

TEST(Head, ZeroParametersGiveHalf) {
  const auto p = HeadParams::zeros(5, 3, 0.0);
  EXPECT_EQ(head_forward(Vector(5, 1.0), p, Mode::infer, nullptr).prob, 0.5);
}

TEST(Head, InferModeIgnoresDropout) {
  Rng rng(9);
  auto p = HeadParams::init(4, 6, 0.0, rng);
  const Vector x = {0.5, -0.1, 2.0, 1.0};
  const double plain = head_forward(x, p, Mode::infer, nullptr).prob;
  p.dropout = 0.9;
  EXPECT_EQ(head_forward(x, p, Mode::infer, nullptr).prob, plain);
  EXPECT_THROW(head_forward(x, p, Mode::train, nullptr), ConfigError);
  EXPECT_THROW(head_forward(Vector(3), p, Mode::infer, nullptr), ContractError);
  p.dropout = 1.0;
  EXPECT_THROW(head_forward(x, p, Mode::infer, nullptr), ConfigError);
}

TEST(Head, DropoutPreservesExpectedActivation) {
  Rng rng(10);
  auto p = HeadParams::init(3, 4, 0.3, rng);
  p.b1 = Matrix(4, 1, 1.0);  // keep every unit active
  const Vector x = {0.2, 0.1, -0.3};
  const auto ref = head_forward(x, p, Mode::infer, nullptr).cache.z;
  Vector mean(4, 0.0);
  Rng drop(11);
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    const auto z = head_forward(x, p, Mode::train, &drop).cache.z;
    for (std::size_t j = 0; j < 4; ++j) mean[j] += z[j];
  }
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(mean[j] / trials, ref[j], 0.01 * ref[j]);
}

TEST(Head, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  auto p = HeadParams::init(5, 7, 0.0, rng);
  Matrix x = random_matrix(rng, 1, 5);
  auto grads = HeadParams::zeros(5, 7, 0.0);
  Vector d_in;
  const auto out = head_forward(x.data(), p, Mode::infer, nullptr);
  head_backward(p, out.cache, 1.0, grads, d_in);
  const Matrix d_x(1, 5, d_in);
  const std::vector<ParamSlot> slots = {slot(p.w1, grads.w1), slot(p.b1, grads.b1), slot(p.w2, grads.w2),
                                        slot(p.b2, grads.b2), slot(x, d_x)};
  auto logit = [&] { return head_forward(x.data(), p, Mode::infer, nullptr).cache.logit; };
  EXPECT_LT(grad_check(logit, slots).max_relative_error, 1e-6);
}

TEST(Bce, KnownValues) {
  const std::vector<double> half = {0.5, 0.5};
  EXPECT_NEAR(bce_loss(half, std::vector<int>{1, 0}).loss, std::log(2.0), 1e-15);
  const auto clamped = bce_loss(std::vector<double>{0.0}, std::vector<int>{1});
  EXPECT_NEAR(clamped.loss, -std::log(1e-7), 1e-9);
  EXPECT_TRUE(std::isfinite(clamped.d_pred[0]));
  EXPECT_NEAR(bce_loss(std::vector<double>{1.0}, std::vector<int>{0}).loss, -std::log(1e-7), 1e-6);
  EXPECT_NEAR(bce_loss(std::vector<double>{0.25}, std::vector<int>{1}, 3.0).loss, -3.0 * std::log(0.25), 1e-12);
  EXPECT_THROW(bce_loss(std::vector<double>{0.5}, std::vector<int>{2}), ContractError);
  EXPECT_THROW(bce_loss(std::vector<double>{}, std::vector<int>{}), ContractError);
  EXPECT_THROW(bce_loss(std::vector<double>{0.5}, std::vector<int>{1, 0}), ContractError);
}

TEST(Bce, GradientMatchesFiniteDifferences) {
  Matrix preds(1, 4, std::vector<double>{0.2, 0.7, 0.55, 0.9});
  const std::vector<int> y = {1, 0, 1, 0};
  const auto r = bce_loss(preds.data(), y, 2.0);
  const Matrix g(1, 4, r.d_pred);
  const std::vector<ParamSlot> slots = {slot(preds, g)};
  EXPECT_LT(grad_check([&] { return bce_loss(preds.data(), y, 2.0).loss; }, slots).max_relative_error, 1e-8);
}

TEST(Adam, ZeroGradientIsAFixedPoint) {
  Vector theta = {1.0, -2.0};
  const Vector grad = {0.0, 0.0};
  AdamState st;
  st.config.weight_decay = 0.0;
  const std::vector<ParamSlot> slots = {{theta, grad, false}};
  for (int i = 0; i < 10; ++i) adam_step(slots, st);
  EXPECT_EQ(theta, (Vector{1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Vector theta = {1.0, 1.0};
  const Vector grad = {4.0, -0.01};
  AdamState st;
  st.config.learning_rate = 0.1;
  st.config.weight_decay = 0.0;
  adam_step(std::vector<ParamSlot>{{theta, grad, false}}, st);
  EXPECT_NEAR(theta[0], 0.9, 1e-8);
  EXPECT_NEAR(theta[1], 1.1, 1e-6);
}

TEST(Adam, WeightDecayOnlyOnFlaggedSlots) {
  Vector a = {1.0}, b = {1.0};
  const Vector zero = {0.0};
  AdamState st;
  st.config.weight_decay = 0.5;
  adam_step(std::vector<ParamSlot>{{a, zero, true}, {b, zero, false}}, st);
  EXPECT_LT(a[0], 1.0);
  EXPECT_EQ(b[0], 1.0);
}

TEST(Adam, ConvergesOnQuadraticBowl) {
  Vector theta = {3.0, -4.0, 0.5};
  Vector grad(3);
  AdamState st;
  st.config.learning_rate = 0.05;
  st.config.weight_decay = 0.0;
  const std::vector<ParamSlot> slots = {{theta, grad, false}};
  for (int i = 0; i < 3000; ++i) {
    for (std::size_t j = 0; j < 3; ++j) grad[j] = 2.0 * (theta[j] - static_cast<double>(j));
    adam_step(slots, st);
  }
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(theta[j], static_cast<double>(j), 1e-3);
}

TEST(Adam, RefusesNonFiniteGradient) {
  Vector theta = {1.0};
  const Vector grad = {std::numeric_limits<double>::infinity()};
  AdamState st;
  EXPECT_THROW(adam_step(std::vector<ParamSlot>{{theta, grad, false}}, st), NumericError);
  EXPECT_EQ(theta[0], 1.0);
  EXPECT_EQ(st.step, 0);
}

TEST(GradCheck, DetectsCorruptedGradient) {
  Vector w = {0.5, -1.5, 2.0};
  const Vector x = {1.0, 2.0, -3.0};
  auto loss = [&] {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += w[i] * x[i];
    return s;
  };
  const std::vector<ParamSlot> good = {{w, x, false}};
  EXPECT_LE(grad_check(loss, good).max_relative_error, 1e-8);
  const Vector doubled = {2.0, 4.0, -6.0};
  const std::vector<ParamSlot> bad = {{w, doubled, false}};
  EXPECT_GT(grad_check(loss, bad).max_relative_error, 0.1);
}

TEST(GradCheck, SubsamplesLargeBundles) {
  Vector w(1000, 1.0), g(1000, 2.0);
  auto loss = [&] {
    double s = 0;
    for (double x : w) s += x * x;
    return s;
  };
  GradCheckOptions opt;
  opt.max_coordinates = 250;
  const auto r = grad_check(loss, std::vector<ParamSlot>{{w, g, false}}, opt);
  EXPECT_EQ(r.coordinates_checked, 250u);
  EXPECT_LT(r.max_relative_error, 1e-8);
}
