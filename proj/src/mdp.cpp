#include "flowpath/mdp.hpp"

#include <cmath>

#include "flowpath/errors.hpp"

namespace flowpath {

std::vector<double> state_features(const State& s, const AgeRange& range) {
  std::vector<double> f(s.observation.begin(), s.observation.end());
  f.push_back(range.normalize(s.age));
  return f;
}

void AgingTrajectory::validate() const {
  if (states.empty()) throw ValidationError("trajectory has no states");
  if (actions.size() + 1 != states.size()) {
    throw ValidationError("trajectory with " + std::to_string(states.size()) + " states has " +
                          std::to_string(actions.size()) + " actions");
  }
  const std::size_t dim = states.front().observation.size();
  for (std::size_t t = 0; t < actions.size(); ++t) {
    if (states[t + 1].age != states[t].age + actions[t].index()) {
      throw ValidationError("age bookkeeping violated at step " + std::to_string(t) + ": " +
                            std::to_string(states[t].age) + " + " +
                            std::to_string(actions[t].index()) + " != " +
                            std::to_string(states[t + 1].age));
    }
  }
  for (const auto& s : states) {
    if (s.observation.size() != dim) throw ValidationError("trajectory observation sizes differ");
  }
}

StaticDynamics::StaticDynamics(int num_actions) : num_actions_(num_actions) {
  if (num_actions < 1 || num_actions > kNumActions) {
    throw DomainError("action count must be in [1, " + std::to_string(kNumActions) + "]");
  }
}

State StaticDynamics::step(const State& s, const AgeAction& a) const {
  return State{s.observation, s.age + a.index()};
}

State SynthesisDynamics::step(const State& s, const AgeAction& a) const {
  return State{synthesize_step(*model_, s.observation, a, 0.0), s.age + a.index()};
}

double TableCost::cost(const State&, const AgeAction& a) const {
  const auto k = static_cast<std::size_t>(a.index());
  if (k >= table_.size()) throw DomainError("action outside the cost table");
  return table_[k];
}

CostNet::CostNet(DenseNet net, AgeRange range) : net_(std::move(net)), range_(range) {
  if (net_.out_dim() != 1) throw ShapeError("cost net must produce a scalar");
  if (net_.in_dim() < static_cast<std::size_t>(kNumActions) + 1) {
    throw ShapeError("cost net input is too small for [x, age, one-hot action]");
  }
}

CostNet CostNet::create(std::size_t obs_dim, const AgeRange& range, std::size_t hidden,
                        Rng& rng) {
  const std::size_t dims[] = {obs_dim + 1 + kNumActions, hidden, hidden, 1};
  return CostNet(DenseNet::glorot(dims, Activation::relu, Activation::identity, rng), range);
}

std::vector<double> CostNet::input(const State& s, const AgeAction& a) const {
  auto in = state_features(s, range_);
  const auto hot = a.one_hot();
  in.insert(in.end(), hot.begin(), hot.end());
  if (in.size() != net_.in_dim()) {
    throw ShapeError("cost net expects " + std::to_string(net_.in_dim()) + " inputs, state gives " +
                     std::to_string(in.size()));
  }
  return in;
}

double CostNet::cost(const State& s, const AgeAction& a) const {
  return net_.forward(input(s, a))[0];
}

void CostNet::cost_backward(const State& s, const AgeAction& a, double upstream,
                            GradSet& grads) const {
  const auto trace = net_.forward_trace(input(s, a));
  const double up[] = {upstream};
  net_.backward(trace, up, grads);
}

std::vector<NamedParam> CostNet::parameters(const std::string& prefix) {
  std::vector<NamedParam> out;
  net_.append_params(prefix, out);
  return out;
}

GradSet CostNet::zero_grads() const {
  GradSet out;
  net_.append_zero_grads(out);
  return out;
}

PolicyNet::PolicyNet(DenseNet net, AgeRange range) : net_(std::move(net)), range_(range) {
  if (net_.layers().empty() || net_.layers().back().activation != Activation::softmax) {
    throw ShapeError("policy net must end in a softmax");
  }
  if (net_.out_dim() < 1 || net_.out_dim() > static_cast<std::size_t>(kNumActions)) {
    throw ShapeError("policy must cover between 1 and 16 actions");
  }
}

PolicyNet PolicyNet::create(std::size_t obs_dim, int num_actions, const AgeRange& range,
                            std::size_t hidden, Rng& rng) {
  const std::size_t dims[] = {obs_dim + 1, hidden, hidden, static_cast<std::size_t>(num_actions)};
  auto net = DenseNet::glorot(dims, Activation::relu, Activation::softmax, rng);
  net.zero_output_layer();
  return PolicyNet(std::move(net), range);
}

std::vector<double> PolicyNet::probabilities(const State& s) const {
  return net_.forward(state_features(s, range_));
}

void PolicyNet::backward(const State& s, std::span<const double> upstream, GradSet& grads) const {
  const auto trace = net_.forward_trace(state_features(s, range_));
  net_.backward(trace, upstream, grads);
}

std::vector<NamedParam> PolicyNet::parameters(const std::string& prefix) {
  std::vector<NamedParam> out;
  net_.append_params(prefix, out);
  return out;
}

GradSet PolicyNet::zero_grads() const {
  GradSet out;
  net_.append_zero_grads(out);
  return out;
}

double entropy(std::span<const double> probabilities) {
  double h = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace flowpath
