#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "postfilter/autodiff/grad_check.hpp"
#include "postfilter/autodiff/ops.hpp"

using namespace postfilter;
using namespace postfilter::ad;

namespace {

SignalTensor random_tensor(std::mt19937_64& rng, Shape shape, double scale = 1.0) {
  const std::size_t n = element_count(shape);
  return SignalTensor(std::move(shape), oracle::random_vector(rng, n, scale));
}

}  // namespace

TEST(Conv1d, UnitKernelIdentityChannelMapReturnsInput) {
  std::mt19937_64 rng(1);
  SignalTensor x = random_tensor(rng, {3, 20});
  SignalTensor w(Shape{3, 3, 1});
  for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  Graph g;
  Var y = conv1d(g.constant(x), g.constant(w), std::nullopt, {});
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.value()[i], x[i]);
}

TEST(Conv1d, SamePaddingPreservesLength) {
  EXPECT_EQ(conv_output_length(100, 15, {1, 4, 28}), 100u);
  Graph g;
  Var y = conv1d(g.constant(SignalTensor(Shape{1, 100})), g.constant(SignalTensor(Shape{2, 1, 15})),
                 std::nullopt, {1, 4, 28});
  EXPECT_EQ(y.shape(), (Shape{2, 100}));
}

TEST(Conv1d, ImpulseThroughDilatedOnesKernelHasFifteenTapsTwoApart) {
  SignalTensor x(Shape{1, 101});
  x[50] = 1.0;
  SignalTensor w(Shape{1, 1, 15}, 1.0);
  Graph g;
  Var y = conv1d(g.constant(x), g.constant(w), std::nullopt, {1, 2, 14});
  const auto ref = oracle::conv1d({std::vector<double>(x.values().begin(), x.values().end())},
                                  {{std::vector<double>(15, 1.0)}}, {}, 1, 2, 14);
  std::vector<std::size_t> support;
  for (std::size_t t = 0; t < 101; ++t) {
    EXPECT_EQ(y.value()[t], ref[0][t]);
    if (y.value()[t] != 0.0) support.push_back(t);
  }
  ASSERT_EQ(support.size(), 15u);
  for (std::size_t i = 1; i < support.size(); ++i) EXPECT_EQ(support[i] - support[i - 1], 2u);
  EXPECT_EQ(support.back() - support.front() + 1, 29u);
}

TEST(Conv1d, MatchesDirectSummationAcrossGeometries) {
  std::mt19937_64 rng(7);
  struct Case { std::size_t cin, cout, k, len, stride, dil, pad; };
  const Case cases[] = {{1, 4, 15, 64, 1, 1, 7},  {3, 5, 3, 70, 1, 4, 4},   {4, 4, 15, 100, 1, 4, 28},
                        {2, 3, 15, 64, 2, 1, 7},  {5, 2, 4, 33, 3, 2, 0},   {6, 6, 1, 40, 1, 1, 0},
                        {2, 2, 5, 37, 1, 3, 20}};
  for (const Case& c : cases) {
    SignalTensor x = random_tensor(rng, {2, c.cin, c.len});
    SignalTensor w = random_tensor(rng, {c.cout, c.cin, c.k});
    SignalTensor b = random_tensor(rng, {c.cout});
    Graph g;
    Var y = conv1d(g.constant(x), g.constant(w), g.constant(b), {c.stride, c.dil, c.pad});
    for (std::size_t item = 0; item < 2; ++item) {
      std::vector<std::vector<double>> xs(c.cin, std::vector<double>(c.len));
      for (std::size_t ci = 0; ci < c.cin; ++ci)
        for (std::size_t t = 0; t < c.len; ++t) xs[ci][t] = x[(item * c.cin + ci) * c.len + t];
      std::vector<std::vector<std::vector<double>>> ws(
          c.cout, std::vector<std::vector<double>>(c.cin, std::vector<double>(c.k)));
      for (std::size_t co = 0; co < c.cout; ++co)
        for (std::size_t ci = 0; ci < c.cin; ++ci)
          for (std::size_t k = 0; k < c.k; ++k) ws[co][ci][k] = w[(co * c.cin + ci) * c.k + k];
      const auto ref = oracle::conv1d(xs, ws, {b.values().begin(), b.values().end()},
                                      static_cast<long>(c.stride), static_cast<long>(c.dil),
                                      static_cast<long>(c.pad));
      const std::size_t out_len = ref[0].size();
      ASSERT_EQ(y.shape(), (Shape{2, c.cout, out_len}));
      for (std::size_t co = 0; co < c.cout; ++co)
        for (std::size_t t = 0; t < out_len; ++t)
          EXPECT_NEAR(y.value()[(item * c.cout + co) * out_len + t], ref[co][t], 1e-12);
    }
  }
}

TEST(Conv1d, ShapeMismatchNamesTheDimension) {
  Graph g;
  try {
    conv1d(g.constant(SignalTensor(Shape{3, 50})), g.constant(SignalTensor(Shape{2, 4, 3})),
           std::nullopt, {});
    FAIL() << "expected ContractViolation";
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("C_in"), std::string::npos);
  }
  EXPECT_THROW(conv1d(g.constant(SignalTensor(Shape{1, 10})), g.constant(SignalTensor(Shape{1, 1, 15})),
                      std::nullopt, {}),
               ContractViolation);
}

TEST(Conv1d, StrideOneCommutesWithIntegerShiftOnInterior) {
  std::mt19937_64 rng(3);
  for (std::size_t dilation : {1u, 2u, 5u}) {
    const std::size_t len = 200, k = 7, pad = dilation * 3;
    SignalTensor x = random_tensor(rng, {2, len});
    SignalTensor w = random_tensor(rng, {3, 2, k});
    for (std::size_t shift = 1; shift <= 6; ++shift) {
      SignalTensor xs(x.shape());
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = shift; t < len; ++t) xs[c * len + t] = x[c * len + t - shift];
      Graph g;
      Var y = conv1d(g.constant(x), g.constant(w), std::nullopt, {1, dilation, pad});
      Var ys = conv1d(g.constant(xs), g.constant(w), std::nullopt, {1, dilation, pad});
      const std::size_t margin = 2 * pad + shift;
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t t = margin; t + margin < len; ++t)
          EXPECT_EQ(ys.value()[c * len + t], y.value()[c * len + t - shift]);
    }
  }
}

TEST(Conv1d, IsLinearWithoutBias) {
  std::mt19937_64 rng(4);
  SignalTensor x = random_tensor(rng, {3, 128});
  SignalTensor z = random_tensor(rng, {3, 128});
  SignalTensor w = random_tensor(rng, {4, 3, 15});
  const double a = 0.7, b = -1.9;
  SignalTensor mix(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * z[i];
  Graph g;
  const ConvOptions opt{1, 4, 28};
  Var cx = conv1d(g.constant(x), g.constant(w), std::nullopt, opt);
  Var cz = conv1d(g.constant(z), g.constant(w), std::nullopt, opt);
  Var cm = conv1d(g.constant(mix), g.constant(w), std::nullopt, opt);
  for (std::size_t i = 0; i < cm.value().size(); ++i)
    EXPECT_NEAR(cm.value()[i], a * cx.value()[i] + b * cz.value()[i], 1e-12);
}

TEST(Elementwise, Anchors) {
  Graph g;
  SignalTensor x(Shape{4}, {1.0, -2.0, 0.5, 3.0});
  Var sum0 = add(g.constant(x), g.constant(SignalTensor::scalar(0.0)));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(sum0.value()[i], x[i]);
  EXPECT_DOUBLE_EQ(leaky_relu(g.constant(SignalTensor::scalar(-1.0)), 0.2).value().item(), -0.2);
  EXPECT_DOUBLE_EQ(leaky_relu(g.constant(SignalTensor::scalar(2.0))).value().item(), 2.0);
  EXPECT_THROW(add(g.constant(SignalTensor(Shape{2, 3})), g.constant(SignalTensor(Shape{3, 2}))),
               ContractViolation);
}

TEST(Elementwise, TanhDerivativeMatchesFiniteDifference) {
  SignalTensor x = SignalTensor::scalar(0.5);
  x.set_requires_grad(true);
  Graph g;
  g.backward(ad::tanh(g.variable(x)));
  const double h = 1e-6;
  const double fd = (std::tanh(0.5 + h) - std::tanh(0.5 - h)) / (2 * h);
  EXPECT_NEAR(x.grad()[0], fd, 1e-9);
  EXPECT_NEAR(x.grad()[0], 0.786448, 1e-6);
}

TEST(Elementwise, LogRequiresPositiveInputUnlessFloored) {
  Graph g;
  Var v = g.constant(SignalTensor(Shape{2}, {0.0, -1.0}));
  EXPECT_THROW(ad::log(v), ContractViolation);
  Var floored = ad::log(v, 1e-8);
  EXPECT_DOUBLE_EQ(floored.value()[0], std::log(1e-8));
  EXPECT_DOUBLE_EQ(floored.value()[1], std::log(1e-8));
}

TEST(Matmul, IdentityAndHandArithmetic) {
  Graph g;
  SignalTensor a(Shape{2, 2}, {1, 2, 3, 4});
  SignalTensor eye(Shape{2, 2}, {1, 0, 0, 1});
  Var ai = matmul(g.constant(a), g.constant(eye));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(ai.value()[i], a[i]);
  Var c = matmul(g.constant(a), g.constant(SignalTensor(Shape{2, 1}, {1, 1})));
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c.value()[0], 3.0);
  EXPECT_EQ(c.value()[1], 7.0);
  EXPECT_THROW(matmul(g.constant(a), g.constant(SignalTensor(Shape{3, 1}))), ContractViolation);
}

TEST(Matmul, GradientsMatchCentralDifferences) {
  std::mt19937_64 rng(11);
  SignalTensor a = random_tensor(rng, {5, 4});
  SignalTensor b = random_tensor(rng, {4, 3});
  SignalTensor weights = random_tensor(rng, {5, 3});
  auto via_a = [&](Graph& g, Var x) {
    return sum(mul(matmul(x, g.constant(b)), g.constant(weights)));
  };
  auto via_b = [&](Graph& g, Var x) {
    return sum(mul(matmul(g.constant(a), x), g.constant(weights)));
  };
  EXPECT_LT(grad_check(via_a, a).max_rel_error, 1e-6);
  EXPECT_LT(grad_check(via_b, b).max_rel_error, 1e-6);
}

TEST(Reduce, Anchors) {
  Graph g;
  EXPECT_EQ(mean(g.constant(SignalTensor(Shape{2}, {2, 4}))).value().item(), 3.0);
  EXPECT_EQ(sum(g.constant(SignalTensor(Shape{5}))).value().item(), 0.0);
  SignalTensor x(Shape{10}, 1.0);
  x.set_requires_grad(true);
  g.backward(mean(g.variable(x)));
  for (double v : x.grad()) EXPECT_DOUBLE_EQ(v, 0.1);
  EXPECT_THROW(mean(g.constant(SignalTensor(Shape{0}))), ContractViolation);
  EXPECT_THROW(sum(g.constant(SignalTensor(Shape{0}))), ContractViolation);
}

TEST(Backward, SumGivesOnes) {
  std::mt19937_64 rng(2);
  SignalTensor x = random_tensor(rng, {3, 4});
  x.set_requires_grad(true);
  Graph g;
  g.backward(sum(g.variable(x)));
  for (double v : x.grad()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, LinearRegressionMatchesClosedForm) {
  std::mt19937_64 rng(5);
  const std::size_t n = 12, d = 3;
  SignalTensor features = random_tensor(rng, {n, d});
  SignalTensor target = random_tensor(rng, {n, 1});
  SignalTensor w = random_tensor(rng, {d, 1});
  w.set_requires_grad(true);
  Graph g;
  Var residual = sub(matmul(g.constant(features), g.variable(w)), g.constant(target));
  g.backward(mean(mul(residual, residual)));
  // 2/N * X^T (Xw - y)
  for (std::size_t j = 0; j < d; ++j) {
    double expected = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double pred = 0.0;
      for (std::size_t k = 0; k < d; ++k) pred += features[i * d + k] * w[k];
      expected += features[i * d + j] * (pred - target[i]);
    }
    expected *= 2.0 / static_cast<double>(n);
    EXPECT_NEAR(w.grad()[j], expected, 1e-12);
  }
}

TEST(Backward, ReusedTensorAccumulates) {
  std::mt19937_64 rng(6);
  SignalTensor x = random_tensor(rng, {6});
  auto f = [](Graph&, Var v) { return sum(add(mul(v, v), ad::tanh(v))); };
  EXPECT_LT(grad_check(f, x).max_rel_error, 1e-7);
  x.set_requires_grad(true);
  Graph g;
  g.backward(f(g, g.variable(x)));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = std::tanh(x[i]);
    EXPECT_NEAR(x.grad()[i], 2 * x[i] + 1 - t * t, 1e-12);
  }
}

TEST(Backward, RejectsNonScalarLoss) {
  SignalTensor x(Shape{3}, 1.0);
  x.set_requires_grad(true);
  Graph g;
  EXPECT_THROW(g.backward(ad::tanh(g.variable(x))), ContractViolation);
}

TEST(Backward, VisitsNodesInReverseTopologicalOrder) {
  std::mt19937_64 rng(8);
  SignalTensor x = random_tensor(rng, {1, 40});
  SignalTensor w = random_tensor(rng, {2, 1, 5});
  x.set_requires_grad(true);
  w.set_requires_grad(true);
  Graph g;
  Var h = leaky_relu(conv1d(g.variable(x), g.variable(w), std::nullopt, {1, 2, 4}));
  Var loss = mean(ad::tanh(add(h, h)));
  g.backward(loss);
  const auto& order = g.last_backward_order();
  ASSERT_FALSE(order.empty());
  for (std::size_t i = 1; i < order.size(); ++i) EXPECT_GT(order[i - 1], order[i]);
  for (std::size_t id = 0; id < g.size(); ++id)
    for (std::size_t in : g.inputs(id)) EXPECT_LT(in, id);
}

TEST(Backward, IsBitDeterministic) {
  auto run = [] {
    std::mt19937_64 rng(9);
    SignalTensor x = random_tensor(rng, {2, 3, 256});
    SignalTensor w = random_tensor(rng, {4, 3, 15});
    w.set_requires_grad(true);
    Graph g;
    Var y = ad::tanh(conv1d(g.constant(x), g.variable(w), std::nullopt, {1, 4, 28}));
    g.backward(mean(mul(y, y)));
    return std::vector<double>(w.grad().begin(), w.grad().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, SumIsExact) {
  std::mt19937_64 rng(10);
  SignalTensor x = random_tensor(rng, {7});
  EXPECT_LT(grad_check([](Graph&, Var v) { return sum(v); }, x).max_rel_error, 1e-9);
}

TEST(GradCheck, MeanTanhConv) {
  std::mt19937_64 rng(12);
  SignalTensor w = random_tensor(rng, {3, 2, 5}, 0.5);
  SignalTensor x = random_tensor(rng, {2, 2, 30});
  auto wrt_x = [&](Graph& g, Var v) {
    return mean(ad::tanh(conv1d(v, g.constant(w), std::nullopt, {1, 2, 4})));
  };
  auto wrt_w = [&](Graph& g, Var v) {
    return mean(ad::tanh(conv1d(g.constant(x), v, std::nullopt, {2, 1, 1})));
  };
  EXPECT_LT(grad_check(wrt_x, x).max_rel_error, 1e-4);
  EXPECT_LT(grad_check(wrt_w, w).max_rel_error, 1e-4);
}

TEST(GradCheck, LayoutOpsAndSpectralPrimitives) {
  std::mt19937_64 rng(13);
  SignalTensor wave = random_tensor(rng, {2, 1, 40});
  SignalTensor mix = random_tensor(rng, {3, 8});
  auto framed = [&](Graph& g, Var v) {
    Var frames = frame(v, 8, 4);  // [8 x 2*9]
    Var re = matmul(g.constant(mix), frames);
    Var im = matmul(g.constant(mix), ad::tanh(frames));
    Var mag = magnitude(re, im);
    Var ph = ad::atan2(im, re);
    return add(mean(batch_major(mag, 2)), mean(mul(ph, ph)));
  };
  EXPECT_LT(grad_check(framed, wave).max_rel_error, 1e-4);

  SignalTensor x = random_tensor(rng, {2, 3, 10});
  auto shaped = [&](Graph&, Var v) {
    Var up = upsample_zero(v, 2);
    Var m = mean_last_axis(ad::sigmoid(up));
    return sum(ad::log(reshape(m, Shape{6}), 1e-8));
  };
  EXPECT_LT(grad_check(shaped, x).max_rel_error, 1e-4);
}
