#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flowpath/age_transform.hpp"
#include "flowpath/dense_net.hpp"
#include "flowpath/rng.hpp"
#include "flowpath/tensor.hpp"

namespace flowpath {

struct AgeRange {
  int min = 10;
  int max = 60;

  double normalize(int age) const {
    return static_cast<double>(age - min) / static_cast<double>(max - min);
  }
  bool contains(int age) const { return age >= min && age <= max; }

  friend bool operator==(const AgeRange&, const AgeRange&) = default;
};

/// s = [x, age].
struct State {
  Observation observation;
  int age = 0;

  friend bool operator==(const State&, const State&) = default;
};

/// Network input for a state: the observation followed by the normalized age.
std::vector<double> state_features(const State& s, const AgeRange& range);

/// Alternating states and age-step actions of one subject.
struct AgingTrajectory {
  std::vector<State> states;
  std::vector<AgeAction> actions;

  std::size_t num_steps() const { return actions.size(); }
  const State& start() const { return states.front(); }
  const State& last() const { return states.back(); }
  /// Throws ValidationError unless there is one action between consecutive
  /// states and every age advances by exactly its action index.
  void validate() const;

  friend bool operator==(const AgingTrajectory&, const AgingTrajectory&) = default;
};

/// Per-step cost c(s, a).
class StepCost {
 public:
  virtual ~StepCost() = default;
  virtual double cost(const State& s, const AgeAction& a) const = 0;
};

/// Deterministic transition s' = step(s, a). Only action indices below
/// num_actions() are available.
class Dynamics {
 public:
  virtual ~Dynamics() = default;
  virtual int num_actions() const = 0;
  virtual State step(const State& s, const AgeAction& a) const = 0;
};

/// Observation is carried over unchanged; only the age advances.
class StaticDynamics final : public Dynamics {
 public:
  explicit StaticDynamics(int num_actions = kNumActions);
  int num_actions() const override { return num_actions_; }
  State step(const State& s, const AgeAction& a) const override;

 private:
  int num_actions_;
};

/// Next observation from the deterministic synthesis step of a trained model.
class SynthesisDynamics final : public Dynamics {
 public:
  explicit SynthesisDynamics(const AgingModel& model, int num_actions = kNumActions)
      : model_(&model), num_actions_(num_actions) {}
  int num_actions() const override { return num_actions_; }
  State step(const State& s, const AgeAction& a) const override;

 private:
  const AgingModel* model_;
  int num_actions_;
};

/// Cost depends only on the action index.
class TableCost final : public StepCost {
 public:
  explicit TableCost(std::vector<double> table) : table_(std::move(table)) {}
  double cost(const State&, const AgeAction& a) const override;

 private:
  std::vector<double> table_;
};

/// Learned cost c_Γ(s, a): dense net over [x, normalized age, one-hot a]
/// with two ReLU hidden layers and a scalar output.
class CostNet final : public StepCost {
 public:
  CostNet() = default;
  CostNet(DenseNet net, AgeRange range);
  static CostNet create(std::size_t obs_dim, const AgeRange& range, std::size_t hidden, Rng& rng);

  double cost(const State& s, const AgeAction& a) const override;
  /// Adds upstream * dc/dΓ into grads (aligned with parameters()).
  void cost_backward(const State& s, const AgeAction& a, double upstream, GradSet& grads) const;
  std::vector<double> input(const State& s, const AgeAction& a) const;

  const DenseNet& net() const { return net_; }
  DenseNet& net() { return net_; }
  const AgeRange& range() const { return range_; }
  std::vector<NamedParam> parameters(const std::string& prefix = "gamma");
  GradSet zero_grads() const;

  friend bool operator==(const CostNet& a, const CostNet& b) {
    return a.net_ == b.net_ && a.range_ == b.range_;
  }

 private:
  DenseNet net_;
  AgeRange range_;
};

/// Step-size policy q(a | s): dense net over [x, normalized age] with two
/// ReLU hidden layers and a softmax over the available actions.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(DenseNet net, AgeRange range);
  /// Output layer starts at zero, so the initial policy is uniform.
  static PolicyNet create(std::size_t obs_dim, int num_actions, const AgeRange& range,
                          std::size_t hidden, Rng& rng);

  int num_actions() const { return static_cast<int>(net_.out_dim()); }
  std::vector<double> probabilities(const State& s) const;
  /// Adds the parameter gradient for upstream = d(loss)/d(probabilities).
  void backward(const State& s, std::span<const double> upstream, GradSet& grads) const;

  const DenseNet& net() const { return net_; }
  DenseNet& net() { return net_; }
  const AgeRange& range() const { return range_; }
  std::vector<NamedParam> parameters(const std::string& prefix = "policy");
  GradSet zero_grads() const;

  friend bool operator==(const PolicyNet& a, const PolicyNet& b) {
    return a.net_ == b.net_ && a.range_ == b.range_;
  }

 private:
  DenseNet net_;
  AgeRange range_;
};

double entropy(std::span<const double> probabilities);

}  // namespace flowpath
