#include <gtest/gtest.h>

#include <algorithm>

#include "flowpath/diagnostics.hpp"
#include "flowpath/errors.hpp"
#include "flowpath/planning.hpp"
#include "test_support.hpp"

namespace flowpath {
namespace {

using testing::random_vec;

PolicyNet favoring(int k, Rng& rng, std::size_t dim = 2) {
  auto p = PolicyNet::create(dim, kNumActions, {}, 8, rng);
  p.net().layer(p.net().num_layers() - 1).bias[static_cast<std::size_t>(k)] = 50.0;
  return p;
}

std::vector<int> indices(const std::vector<AgeAction>& actions) {
  std::vector<int> out;
  for (const auto& a : actions) out.push_back(a.index());
  return out;
}

TEST(PlanPath, TargetAtStartIsEmpty) {
  Rng rng(1);
  const auto policy = favoring(3, rng);
  EXPECT_TRUE(plan_path(policy, StaticDynamics(), {{0.0, 0.0}, 30}, 30).empty());
  EXPECT_THROW(plan_path(policy, StaticDynamics(), {{0.0, 0.0}, 30}, 29), DomainError);
}

TEST(PlanPath, FollowsArgmax) {
  Rng rng(2);
  EXPECT_EQ(indices(plan_path(favoring(15, rng), StaticDynamics(), {{0.0, 0.0}, 10}, 25)),
            std::vector<int>{15});
  EXPECT_EQ(indices(plan_path(favoring(5, rng), StaticDynamics(), {{0.0, 0.0}, 10}, 25)),
            (std::vector<int>{5, 5, 5}));
}

TEST(PlanPath, SkipsSameAgeActionAndBreaksTiesLow) {
  Rng rng(3);
  const auto path = plan_path(favoring(0, rng), StaticDynamics(), {{0.0, 0.0}, 10}, 17);
  EXPECT_EQ(indices(path), std::vector<int>(7, 1));
}

TEST(PlanPath, TerminatesWithBoundedOvershoot) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto policy = PolicyNet::create(2, kNumActions, {}, 8, rng);
    randomize_params(policy.parameters(), rng, 1.0);
    const int start = rng.uniform_int(10, 60);
    const int target = start + rng.uniform_int(0, 40);
    const auto traj = plan_trajectory(policy, StaticDynamics(), {random_vec(2, rng), start}, target);
    EXPECT_NO_THROW(traj.validate());
    EXPECT_GE(traj.last().age, target);
    EXPECT_LE(traj.num_steps(), static_cast<std::size_t>(target - start));
    for (std::size_t t = 0; t < traj.num_steps(); ++t) {
      EXPECT_GT(traj.actions[t].index(), 0);
      EXPECT_LT(traj.states[t].age, target);
    }
  }
}

TEST(SplitAgeGap, LargestFirst) {
  EXPECT_EQ(indices(split_age_gap(0)), std::vector<int>{0});
  EXPECT_EQ(indices(split_age_gap(7)), std::vector<int>{7});
  EXPECT_EQ(indices(split_age_gap(15)), std::vector<int>{15});
  EXPECT_EQ(indices(split_age_gap(33)), (std::vector<int>{15, 15, 3}));
  EXPECT_THROW(split_age_gap(-1), DomainError);
}

AgingModel small_model(Rng& rng) {
  auto m = AgingModel::create({4, 2, 6, 2.0}, 3, rng);
  randomize_params(m.parameters(), rng, 0.3);
  return m;
}

TEST(MultiInputInit, SingleInputIsUnchanged) {
  Rng rng(5);
  const auto model = small_model(rng);
  const std::vector<State> inputs{{random_vec(4, rng), 23}};
  const auto out = multi_input_init(inputs, model);
  EXPECT_EQ(out.state, inputs[0]);
  EXPECT_TRUE(out.bridge_actions.empty());
  EXPECT_THROW(multi_input_init(std::vector<State>{}, model), InsufficientDataError);
}

TEST(MultiInputInit, SameAgeBridgesWithActionZero) {
  Rng rng(6);
  const auto model = small_model(rng);
  const std::vector<State> inputs{{random_vec(4, rng), 30}, {random_vec(4, rng), 30}};
  const auto out = multi_input_init(inputs, model);
  EXPECT_EQ(indices(out.bridge_actions), std::vector<int>{0});
  EXPECT_EQ(out.state.age, 30);
}

TEST(MultiInputInit, StartsAtOldestAgeAndIgnoresOrder) {
  Rng rng(7);
  const auto model = small_model(rng);
  std::vector<State> inputs{{random_vec(4, rng), 40}, {random_vec(4, rng), 12}, {random_vec(4, rng), 31}};
  const auto out = multi_input_init(inputs, model);
  EXPECT_EQ(out.state.age, 40);
  EXPECT_EQ(indices(out.bridge_actions), (std::vector<int>{15, 4, 9}));
  std::reverse(inputs.begin(), inputs.end());
  EXPECT_EQ(multi_input_init(inputs, model).state, out.state);
  std::swap(inputs[0], inputs[1]);
  EXPECT_EQ(multi_input_init(inputs, model).state, out.state);
}

TEST(MultiInputInit, AveragesInLatentSpace) {
  Rng rng(8);
  const auto model = small_model(rng);
  const std::vector<State> inputs{{random_vec(4, rng), 20}, {random_vec(4, rng), 27}};
  const auto out = multi_input_init(inputs, model);
  const auto bridged = transform_apply(model.g, model.f1.forward(inputs[0].observation).z, AgeAction(7));
  const auto second = model.f2.forward(inputs[1].observation).z;
  const auto latent = model.f2.forward(out.state.observation).z;
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(latent[i], 0.5 * (bridged[i] + second[i]), 1e-9);
}

}  // namespace
}  // namespace flowpath
