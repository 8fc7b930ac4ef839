#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <flowpath_oracles/oracles.hpp>

#include "flowpath/coupling_flow.hpp"
#include "flowpath/diagnostics.hpp"
#include "flowpath/errors.hpp"
#include "flowpath/grad_check.hpp"
#include "flowpath/optimizer.hpp"
#include "test_support.hpp"

namespace flowpath {
namespace {

using testing::max_abs_diff;
using testing::random_vec;
namespace orc = flowpath_oracles;

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

DenseNet constant_net(double bias) {
  return DenseNet({DenseLayer{ParamTensor({1, 1}, {0.0}), ParamTensor({1}, {bias}),
                              Activation::identity}});
}

void randomize(BijectionStack& flow, Rng& rng, double scale) {
  randomize_params(flow.parameters("f"), rng, scale);
}

TEST(CouplingUnit, ZeroInitializedIsIdentity) {
  Rng rng(1);
  const auto unit = CouplingUnit::create(6, 0, 8, 2.0, rng);
  const auto x = random_vec(6, rng);
  const auto out = unit.forward(x);
  EXPECT_EQ(out.y, x);
  EXPECT_EQ(out.logdet, 0.0);
  EXPECT_EQ(unit.inverse(x), x);
}

TEST(CouplingUnit, PureTranslation) {
  const CouplingUnit unit({1, 0}, constant_net(0.0), constant_net(1.0), 2.0);
  const std::vector<double> x{2.0, 3.0};
  const auto out = unit.forward(x);
  EXPECT_EQ(out.y, (std::vector<double>{2.0, 4.0}));
  EXPECT_EQ(out.logdet, 0.0);
  EXPECT_EQ(unit.inverse(out.y), x);
}

TEST(CouplingUnit, RejectsDegenerateMasks) {
  EXPECT_THROW(CouplingUnit({1, 1}, constant_net(0.0), constant_net(0.0), 2.0), ShapeError);
  EXPECT_THROW(CouplingUnit({0, 0}, constant_net(0.0), constant_net(0.0), 2.0), ShapeError);
}

TEST(CouplingUnit, LogdetMatchesNumericalJacobian) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(10 + seed);
    auto unit = CouplingUnit::create(4, seed % 2, 8, 2.0, rng);
    std::vector<NamedParam> params;
    unit.append_params("u", params);
    randomize_params(params, rng, 0.5);
    const auto x = random_vec(4, rng);
    const auto jac = orc::numerical_jacobian([&](const orc::Vec& v) { return unit.forward(v).y; }, x);
    const double expected = std::log(std::abs(orc::determinant(jac)));
    EXPECT_TRUE(testing::rel_close(unit.forward(x).logdet, expected, 1e-4, 1e-8));
  }
}

TEST(CouplingUnit, ScaleIsClamped) {
  const CouplingUnit unit({1, 0}, constant_net(50.0), constant_net(0.0), 2.0);
  const std::vector<double> x{0.0, 1.0};
  EXPECT_NEAR(unit.forward(x).logdet, 2.0 * std::tanh(25.0), 1e-15);
  const CouplingUnit unclamped({1, 0}, constant_net(3.0), constant_net(0.0), 0.0);
  EXPECT_NEAR(unclamped.forward(x).logdet, 3.0, 1e-15);
}

TEST(BijectionStack, ZeroInitializedIsIdentity) {
  Rng rng(2);
  const auto flow = BijectionStack::create({5, 4, 8, 2.0}, rng);
  const auto x = random_vec(5, rng);
  const auto out = flow.forward(x);
  EXPECT_EQ(out.z, x);
  EXPECT_EQ(out.logdet, 0.0);
  EXPECT_EQ(flow.inverse(x), x);
}

TEST(BijectionStack, SingletonMatchesUnit) {
  Rng rng(3);
  auto unit = CouplingUnit::create(4, 0, 8, 2.0, rng);
  std::vector<NamedParam> params;
  unit.append_params("u", params);
  randomize_params(params, rng, 0.5);
  const BijectionStack stack({unit});
  const auto x = random_vec(4, rng);
  EXPECT_EQ(stack.forward(x).z, unit.forward(x).y);
  EXPECT_EQ(stack.forward(x).logdet, unit.forward(x).logdet);
}

TEST(BijectionStack, MasksAlternate) {
  Rng rng(4);
  const auto flow = BijectionStack::create({4, 3, 8, 2.0}, rng);
  EXPECT_EQ(flow.units()[0].mask(), (std::vector<std::uint8_t>{1, 0, 1, 0}));
  EXPECT_EQ(flow.units()[1].mask(), (std::vector<std::uint8_t>{0, 1, 0, 1}));
  EXPECT_EQ(flow.units()[2].mask(), (std::vector<std::uint8_t>{1, 0, 1, 0}));
}

TEST(BijectionStack, EndToEndDeterminantD2) {
  Rng rng(5);
  auto flow = BijectionStack::create({2, 4, 8, 2.0}, rng);
  randomize(flow, rng, 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_vec(2, rng);
    const auto jac = orc::numerical_jacobian([&](const orc::Vec& v) { return flow.forward(v).z; }, x);
    const double det = std::abs(orc::determinant(jac));
    EXPECT_TRUE(testing::rel_close(std::exp(flow.forward(x).logdet), det, 1e-4));
  }
}

TEST(BijectionStack, LogdetIsExactSumOfUnits) {
  Rng rng(6);
  auto flow = BijectionStack::create({6, 5, 8, 2.0}, rng);
  randomize(flow, rng, 0.5);
  const auto out = flow.forward(random_vec(6, rng));
  double sum = 0.0;
  for (double v : out.unit_logdets) sum += v;
  EXPECT_EQ(out.logdet, sum);
}

class RoundTrip : public ::testing::TestWithParam<std::tuple<std::size_t, std::size_t>> {};

TEST_P(RoundTrip, InverseRecoversInput) {
  const auto [dim, units] = GetParam();
  Rng rng(dim * 100 + units);
  auto flow = BijectionStack::create({dim, units, 16, 2.0}, rng);
  randomize(flow, rng, 0.3);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto x = random_vec(dim, rng, 2.0);
    worst = std::max(worst, max_abs_diff(flow.inverse(flow.forward(x).z), x));
  }
  EXPECT_LT(worst, 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Configs, RoundTrip,
                         ::testing::Combine(::testing::Values(2, 3, 4, 16),
                                            ::testing::Values(1, 4, 10)));

TEST(GaussianLoglik, AnalyticValues) {
  const std::vector<double> z0{0.0, 0.0};
  EXPECT_NEAR(standard_normal_loglik(z0), -kLog2Pi, 1e-15);
  EXPECT_NEAR(standard_normal_loglik(z0), -1.837877, 1e-6);

  const std::vector<double> mean{0.3, -1.0}, var{0.5, 2.0};
  EXPECT_NEAR(gaussian_loglik(mean, mean, var),
              -0.5 * (std::log(2 * std::numbers::pi * 0.5) + std::log(2 * std::numbers::pi * 2.0)),
              1e-14);

  const std::vector<double> z{1.0, 2.0, 3.0}, zero(3, 0.0), ones(3, 1.0);
  EXPECT_NEAR(gaussian_loglik(z, zero, ones), -1.5 * kLog2Pi - 7.0, 1e-14);
}

TEST(GaussianLoglik, RejectsNonPositiveVariance) {
  const std::vector<double> z{0.0}, m{0.0}, v{0.0};
  EXPECT_THROW(gaussian_loglik(z, m, v), DomainError);
}

TEST(FlowNll, IdentityFlowAtOrigin) {
  Rng rng(7);
  const auto flow = BijectionStack::create({4, 2, 8, 2.0}, rng);
  const std::vector<Observation> batch{Observation(4, 0.0)};
  EXPECT_NEAR(flow_nll(flow, batch).loss, 2.0 * kLog2Pi, 1e-14);
}

TEST(FlowNll, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Rng rng(20 + seed);
    auto flow = BijectionStack::create({4, 2, 6, 2.0}, rng);
    const auto params = flow.parameters("theta");
    randomize_params(params, rng, 0.4);
    std::vector<Observation> batch;
    for (int i = 0; i < 6; ++i) batch.push_back(random_vec(4, rng));
    const auto analytic = flow_nll(flow, batch).grads;
    const auto numeric = finite_diff_grad([&] { return flow_nll(flow, batch).loss; }, params);
    const auto report = compare_gradients(params, analytic, numeric);
    EXPECT_TRUE(report.passed) << report.worst_param << " rel " << report.max_rel_error;
  }
}

std::vector<Observation> bimodal(std::size_t n, Rng& rng) {
  std::vector<Observation> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = rng.uniform() < 0.5 ? -1.5 : 1.5;
    out.push_back({c + 0.4 * rng.normal(), 0.5 * c + 0.4 * rng.normal()});
  }
  return out;
}

double mean_nll(const BijectionStack& flow, const std::vector<Observation>& data) {
  return flow_nll(flow, data).loss;
}

BijectionStack train_bimodal(std::size_t steps, Rng& rng, double* initial, double* final_nll) {
  auto flow = BijectionStack::create({2, 4, 16, 2.0}, rng);
  const auto train = bimodal(2000, rng);
  const auto heldout = bimodal(1000, rng);
  const auto params = flow.parameters("f");
  AdamConfig cfg;
  cfg.learning_rate = 5e-3;
  auto opt = OptimizerState::for_params(params, cfg);
  *initial = mean_nll(flow, heldout);
  for (std::size_t step = 0; step < steps; ++step) {
    std::vector<Observation> batch;
    for (int i = 0; i < 64; ++i) batch.push_back(train[rng.uniform_int(0, 1999)]);
    optimizer_step(params, flow_nll(flow, batch).grads, opt);
  }
  *final_nll = mean_nll(flow, heldout);
  return flow;
}

TEST(FlowTraining, BimodalNllImprovesAndDensityNormalizes) {
  Rng rng(30);
  double initial = 0, final_nll = 0;
  const auto flow = train_bimodal(2000, rng, &initial, &final_nll);
  EXPECT_LT(final_nll, initial - 0.5);
  const double mass = orc::integrate_2d(
      [&](double a, double b) {
        const std::vector<double> x{a, b};
        return std::exp(flow_log_density(flow, x));
      },
      -8.0, 8.0, 400);
  EXPECT_GE(mass, 0.99);
  EXPECT_LE(mass, 1.01);
}

}  // namespace
}  // namespace flowpath
