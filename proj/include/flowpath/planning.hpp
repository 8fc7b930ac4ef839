#pragma once

#include <span>
#include <utility>
#include <vector>

#include "flowpath/age_transform.hpp"
#include "flowpath/mdp.hpp"

namespace flowpath {

/// Greedy argmax rollout from `start` until the age reaches `target_age`.
/// Ties go to the smaller action index. Action 0 is skipped while the target
/// is still ahead, so every step makes progress.
std::vector<AgeAction> plan_path(const PolicyNet& policy, const Dynamics& dynamics,
                                 const State& start, int target_age);

/// plan_path together with the states it visits.
AgingTrajectory plan_trajectory(const PolicyNet& policy, const Dynamics& dynamics,
                                const State& start, int target_age);

/// Age gap split into steps of at most 15, largest first. A zero gap is one
/// action 0.
std::vector<AgeAction> split_age_gap(int gap, int num_actions = kNumActions);

struct MultiInputStart {
  State state;
  std::vector<AgeAction> bridge_actions;  // actions between the sorted inputs
};

/// Folds several observations of one subject into a single start state at
/// the oldest input age. A single input is returned unchanged.
MultiInputStart multi_input_init(std::span<const State> inputs, const AgingModel& model);

}  // namespace flowpath
