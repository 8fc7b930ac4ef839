#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "flowpath/dense_net.hpp"
#include "flowpath/errors.hpp"
#include "flowpath/grad_check.hpp"
#include "flowpath/linalg.hpp"
#include "flowpath/optimizer.hpp"
#include "flowpath/rng.hpp"
#include "flowpath/tensor.hpp"
#include "test_support.hpp"

namespace flowpath {
namespace {

using testing::random_vec;

DenseNet single_layer(std::vector<double> w, std::vector<double> b, std::size_t out,
                      std::size_t in, Activation act) {
  return DenseNet({DenseLayer{ParamTensor({out, in}, std::move(w)), ParamTensor({out}, std::move(b)), act}});
}

TEST(ParamTensor, RejectsMismatchedShape) {
  EXPECT_THROW(ParamTensor({2, 3}, std::vector<double>(5)), ShapeError);
  ParamTensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_TRUE(t.all_finite());
  t[4] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(ParamTensor, SnapshotRestoreRoundTrip) {
  ParamTensor a({2}, {1.0, 2.0});
  std::vector<NamedParam> params{{"a", &a}};
  const auto saved = snapshot(params);
  a.fill(9.0);
  restore(params, saved);
  EXPECT_EQ(a.values, (std::vector<double>{1.0, 2.0}));
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

TEST(Rng, SerializeResumesExactly) {
  Rng a(5);
  for (int i = 0; i < 17; ++i) a.normal();
  Rng b = Rng::deserialize(a.serialize());
  EXPECT_TRUE(a == b);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.uniform(), b.uniform());
  EXPECT_THROW(Rng::deserialize("not a state"), CheckpointError);
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(3);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(double(n)));
  EXPECT_NEAR(sn2 / n, 1.0, 5 * std::sqrt(2.0 / n));
}

TEST(Rng, CategoricalFollowsWeights) {
  Rng rng(9);
  const std::vector<double> w{1.0, 0.0, 3.0};
  std::vector<int> counts(3, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) counts[rng.categorical(w)]++;
  EXPECT_EQ(counts[1], 0);
  EXPECT_NEAR(counts[2] / double(n), 0.75, 5 * std::sqrt(0.75 * 0.25 / n));
}

TEST(Linalg, MatmulMatchesNaiveSum) {
  Rng rng(1);
  Matrix a(3, 4), b(4, 2);
  for (double& v : a.data) v = rng.normal();
  for (double& v : b.data) v = rng.normal();
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-14);
    }
}

TEST(Linalg, SolveSpdRecoversSolution) {
  Matrix a(3, 3, {4, 1, 0.5, 1, 3, 0.2, 0.5, 0.2, 2});
  const std::vector<double> x{1.0, -2.0, 0.5};
  const auto b = matvec(a, x);
  const auto got = solve_spd(a, b);
  EXPECT_LT(testing::max_abs_diff(got, x), 1e-12);
}

TEST(Linalg, LogSumExpIsStable) {
  const std::vector<double> v{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(v), 1000.0 + std::log(2.0), 1e-12);
  const std::vector<double> w{-1000.0, -1001.0};
  EXPECT_NEAR(log_sum_exp(w), -1000.0 + std::log1p(std::exp(-1.0)), 1e-12);
}

TEST(DenseNet, IdentityLayer) {
  const auto net = single_layer({1, 0, 0, 1}, {0, 0}, 2, 2, Activation::identity);
  const std::vector<double> x{1.0, -2.0};
  EXPECT_EQ(net_forward(net, x), (std::vector<double>{1.0, -2.0}));
}

TEST(DenseNet, ReluClampsNegatives) {
  const auto net = single_layer({1, 0, 0, 1}, {0, 0}, 2, 2, Activation::relu);
  const std::vector<double> x{1.0, -2.0};
  EXPECT_EQ(net_forward(net, x), (std::vector<double>{1.0, 0.0}));
}

TEST(DenseNet, TwoLayerHandEvaluation) {
  DenseNet net({DenseLayer{ParamTensor({2, 1}, {0.3, -0.2}), ParamTensor({2}, {0.1, 0.05}), Activation::tanh},
                DenseLayer{ParamTensor({1, 2}, {0.7, -1.1}), ParamTensor({1}, {0.2}), Activation::identity}});
  const double h1 = std::tanh(0.3 * 0.5 + 0.1);
  const double h2 = std::tanh(-0.2 * 0.5 + 0.05);
  const double expected = 0.7 * h1 - 1.1 * h2 + 0.2;
  const std::vector<double> x{0.5};
  EXPECT_NEAR(net_forward(net, x)[0], expected, 1e-15);
}

TEST(DenseNet, RejectsBadArchitectures) {
  EXPECT_THROW(DenseNet({DenseLayer{ParamTensor({2, 2}), ParamTensor({2}), Activation::softmax},
                         DenseLayer{ParamTensor({1, 2}), ParamTensor({1}), Activation::identity}}),
               ShapeError);
  EXPECT_THROW(DenseNet({DenseLayer{ParamTensor({2, 2}), ParamTensor({2}), Activation::relu},
                         DenseLayer{ParamTensor({1, 3}), ParamTensor({1}), Activation::identity}}),
               ShapeError);
  const auto net = single_layer({1, 0, 0, 1}, {0, 0}, 2, 2, Activation::identity);
  const std::vector<double> x{1.0};
  EXPECT_THROW(net_forward(net, x), ShapeError);
}

TEST(DenseNet, LinearScalarGradient) {
  const auto net = single_layer({1.7}, {0.0}, 1, 1, Activation::identity);
  const std::vector<double> x{3.0}, up{1.0};
  const auto g = net_backward(net, x, up);
  EXPECT_DOUBLE_EQ(g.params[0][0], 3.0);
  EXPECT_DOUBLE_EQ(g.params[1][0], 1.0);
  EXPECT_DOUBLE_EQ(g.input[0], 1.7);
}

TEST(DenseNet, ZeroUpstreamGivesZeroGradients) {
  Rng rng(2);
  const std::vector<std::size_t> dims{3, 5, 2};
  const auto net = DenseNet::glorot(dims, Activation::tanh, Activation::identity, rng);
  const auto x = random_vec(3, rng);
  const std::vector<double> up{0.0, 0.0};
  const auto g = net_backward(net, x, up);
  for (const auto& t : g.params)
    for (double v : t.values) EXPECT_EQ(v, 0.0);
  for (double v : g.input) EXPECT_EQ(v, 0.0);
}

TEST(DenseNet, NonFiniteActivationNamesLayer) {
  const auto net = single_layer({1e308, 1e308}, {0.0}, 1, 2, Activation::identity);
  const std::vector<double> x{10.0, 10.0};
  try {
    net.forward_trace(x);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
}

TEST(DenseNet, GlorotBoundsAndZeroBias) {
  Rng rng(4);
  const std::vector<std::size_t> dims{10, 20};
  const auto net = DenseNet::glorot(dims, Activation::relu, Activation::identity, rng);
  const double s = std::sqrt(6.0 / 30.0);
  for (double v : net.layers()[0].weight.values) {
    EXPECT_LE(std::abs(v), s);
  }
  for (double v : net.layers()[0].bias.values) EXPECT_EQ(v, 0.0);
}

class DenseNetProperty : public ::testing::TestWithParam<std::tuple<Activation, Activation>> {};

TEST_P(DenseNetProperty, BackwardMatchesFiniteDifferences) {
  const auto [hidden, output] = GetParam();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const std::vector<std::size_t> dims{4, 7, 5, 3};
    auto net = DenseNet::glorot(dims, hidden, output, rng);
    std::vector<NamedParam> params;
    net.append_params("n", params);
    for (const auto& p : params)
      for (double& v : p.tensor->values) v = 0.6 * rng.normal();
    const auto x = random_vec(4, rng);
    const auto w = random_vec(3, rng);
    const auto g = net_backward(net, x, w);
    const auto numeric = finite_diff_grad([&] { return dot(net.forward(x), w); }, params);
    const auto report = compare_gradients(params, g.params, numeric);
    EXPECT_TRUE(report.passed) << report.worst_param << " rel " << report.max_rel_error;
  }
}

TEST_P(DenseNetProperty, ForwardIsDeterministic) {
  const auto [hidden, output] = GetParam();
  Rng rng(8);
  const std::vector<std::size_t> dims{4, 6, 3};
  const auto net = DenseNet::glorot(dims, hidden, output, rng);
  const auto x = random_vec(4, rng);
  EXPECT_EQ(net.forward(x), net.forward(x));
}

INSTANTIATE_TEST_SUITE_P(Activations, DenseNetProperty,
                         ::testing::Values(std::make_tuple(Activation::tanh, Activation::identity),
                                           std::make_tuple(Activation::relu, Activation::identity),
                                           std::make_tuple(Activation::relu, Activation::softmax),
                                           std::make_tuple(Activation::tanh, Activation::tanh)));

TEST(DenseNet, SoftmaxIsADistribution) {
  Rng rng(6);
  const std::vector<std::size_t> dims{3, 8, 16};
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = DenseNet::glorot(dims, Activation::relu, Activation::softmax, rng);
    const auto p = net.forward(random_vec(3, rng, 3.0));
    double s = 0;
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(FiniteDiff, SquareDerivative) {
  ParamTensor w({1}, {3.0});
  std::vector<NamedParam> params{{"w", &w}};
  const auto g = finite_diff_grad([&] { return w[0] * w[0]; }, params, 1e-5);
  EXPECT_NEAR(g[0][0], 6.0, 1e-6);
  EXPECT_EQ(w[0], 3.0);
}

TEST(FiniteDiff, TwoParameterQuadratic) {
  ParamTensor p({2}, {1.5, -0.5});
  std::vector<NamedParam> params{{"p", &p}};
  auto loss = [&] { return 2 * p[0] * p[0] + 3 * p[0] * p[1] - p[1] * p[1]; };
  const auto g = finite_diff_grad(loss, params);
  EXPECT_NEAR(g[0][0], 4 * 1.5 + 3 * -0.5, 1e-7);
  EXPECT_NEAR(g[0][1], 3 * 1.5 - 2 * -0.5, 1e-7);
}

TEST(FiniteDiff, NonFiniteLossIsNumericError) {
  ParamTensor p({1}, {0.0});
  std::vector<NamedParam> params{{"p", &p}};
  EXPECT_THROW(finite_diff_grad([] { return std::numeric_limits<double>::infinity(); }, params),
               NumericError);
}

TEST(Optimizer, ZeroGradientLeavesParametersUnchanged) {
  ParamTensor p({3}, {1.0, -2.0, 0.5});
  std::vector<NamedParam> params{{"p", &p}};
  auto state = OptimizerState::for_params(params, {});
  const auto before = p;
  for (int i = 0; i < 10; ++i) optimizer_step(params, zeros_like(params), state);
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step, 10u);
}

TEST(Optimizer, ConstantGradientMovesMonotonically) {
  ParamTensor p({1}, {0.0});
  std::vector<NamedParam> params{{"p", &p}};
  auto state = OptimizerState::for_params(params, {});
  GradSet g{ParamTensor({1}, {0.7})};
  double prev = p[0];
  for (int i = 0; i < 100; ++i) {
    optimizer_step(params, g, state);
    EXPECT_LT(p[0], prev);
    prev = p[0];
  }
}

TEST(Optimizer, FirstStepIsLearningRateTimesSign) {
  ParamTensor p({2}, {1.0, 1.0});
  std::vector<NamedParam> params{{"p", &p}};
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  auto state = OptimizerState::for_params(params, cfg);
  optimizer_step(params, {ParamTensor({2}, {3.0, -0.2})}, state);
  // Bias-corrected moments give m / sqrt(v) = sign(g) on the first step.
  EXPECT_NEAR(p[0], 1.0 - 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], 1.0 + 0.01 * 0.2 / (0.2 + 1e-8), 1e-15);
}

TEST(Optimizer, ConvexQuadraticConverges) {
  ParamTensor p({3}, {0.8, -1.2, 0.4});
  std::vector<NamedParam> params{{"p", &p}};
  const std::vector<double> a{1.0, 3.0, 0.5};
  auto loss = [&] {
    double s = 0;
    for (int i = 0; i < 3; ++i) s += a[i] * p[i] * p[i];
    return s;
  };
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  auto state = OptimizerState::for_params(params, cfg);
  const double initial = loss();
  for (int step = 0; step < 500; ++step) {
    GradSet g{ParamTensor({3})};
    for (int i = 0; i < 3; ++i) g[0][i] = 2 * a[i] * p[i];
    optimizer_step(params, g, state);
  }
  EXPECT_LT(loss(), 1e-3 * initial);
}

TEST(Optimizer, RejectsNonFiniteGradientByName) {
  ParamTensor p({2}, {1.0, 2.0});
  std::vector<NamedParam> params{{"layer.weight", &p}};
  auto state = OptimizerState::for_params(params, {});
  GradSet g{ParamTensor({2}, {0.0, std::numeric_limits<double>::quiet_NaN()})};
  try {
    optimizer_step(params, g, state);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.weight"), std::string::npos);
  }
  EXPECT_EQ(p.values, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(state.step, 0u);
  GradSet wrong{ParamTensor({3})};
  EXPECT_THROW(optimizer_step(params, wrong, state), ShapeError);
}

}  // namespace
}  // namespace flowpath
