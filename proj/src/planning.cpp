#include "flowpath/planning.hpp"

#include <algorithm>

#include "flowpath/errors.hpp"

namespace flowpath {

namespace {

int choose_action(std::span<const double> probs, bool forbid_zero) {
  int best = forbid_zero ? 1 : 0;
  for (int k = best + 1; k < static_cast<int>(probs.size()); ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return best;
}

}  // namespace

AgingTrajectory plan_trajectory(const PolicyNet& policy, const Dynamics& dynamics,
                                const State& start, int target_age) {
  if (target_age < start.age) {
    throw DomainError("target age " + std::to_string(target_age) + " is below the start age " +
                      std::to_string(start.age));
  }
  if (policy.num_actions() < 2) throw ShapeError("planning needs at least two actions");
  AgingTrajectory traj{{start}, {}};
  while (traj.last().age < target_age) {
    const auto probs = policy.probabilities(traj.last());
    const AgeAction a(choose_action(probs, true), policy.num_actions());
    traj.states.push_back(dynamics.step(traj.last(), a));
    traj.actions.push_back(a);
  }
  return traj;
}

std::vector<AgeAction> plan_path(const PolicyNet& policy, const Dynamics& dynamics,
                                 const State& start, int target_age) {
  return plan_trajectory(policy, dynamics, start, target_age).actions;
}

std::vector<AgeAction> split_age_gap(int gap, int num_actions) {
  if (gap < 0) throw DomainError("age gap must be non-negative");
  const int largest = num_actions - 1;
  if (gap == 0) return {AgeAction(0, num_actions)};
  std::vector<AgeAction> out;
  while (gap > 0) {
    const int step = std::min(gap, largest);
    out.emplace_back(step, num_actions);
    gap -= step;
  }
  return out;
}

MultiInputStart multi_input_init(std::span<const State> inputs, const AgingModel& model) {
  if (inputs.empty()) throw InsufficientDataError("multi_input_init needs at least one input");
  for (const auto& s : inputs) {
    if (s.observation.size() != model.dim()) {
      throw ShapeError("multi_input_init: observation length " +
                       std::to_string(s.observation.size()) + ", expected " +
                       std::to_string(model.dim()));
    }
  }
  std::vector<State> sorted(inputs.begin(), inputs.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const State& a, const State& b) {
    if (a.age != b.age) return a.age < b.age;
    return a.observation < b.observation;
  });
  if (sorted.size() == 1) return {sorted.front(), {}};

  MultiInputStart out;
  auto memory = model.f2.forward(sorted.front().observation).z;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    for (const auto& a : split_age_gap(sorted[i].age - sorted[i - 1].age)) {
      const auto x = model.f2.inverse(memory);
      memory = transform_apply(model.g, model.f1.forward(x).z, a);
      out.bridge_actions.push_back(a);
    }
    const auto observed = model.f2.forward(sorted[i].observation).z;
    for (std::size_t d = 0; d < memory.size(); ++d) memory[d] = 0.5 * (memory[d] + observed[d]);
  }
  out.state = State{model.f2.inverse(memory), sorted.back().age};
  return out;
}

}  // namespace flowpath
