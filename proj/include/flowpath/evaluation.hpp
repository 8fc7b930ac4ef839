#pragma once

#include <string>
#include <vector>

#include "flowpath/pipeline.hpp"
#include "flowpath/synth_world.hpp"

namespace flowpath {

/// Largest allowed excess of synthesized-state MAE over real-state MAE, in
/// normalized age units.
inline constexpr double kAgeFidelityBound = 0.3;

/// Ridge regression from an observation to its normalized age.
struct AgeRegressor {
  std::vector<double> weights;
  double bias = 0.0;

  static AgeRegressor fit(const std::vector<Observation>& xs, const std::vector<double>& ys,
                          double ridge = 1e-3);
  double predict(std::span<const double> x) const;
};

struct AgeFidelityReport {
  double train_mae = 0.0;
  double real_mae = 0.0;
  double synth_mae = 0.0;
  std::size_t evaluated_states = 0;
  double gap() const { return synth_mae - real_mae; }
};

/// Regressor fit on real training observations; compared on held-out real
/// states and on states synthesized from each held-out start to the same ages.
AgeFidelityReport evaluate_age_fidelity(const AgingModel& model, const WorldDataset& world,
                                        const WorldConfig& config);

struct PlanningReport {
  std::size_t matched = 0;
  std::size_t total = 0;
  std::size_t distinct_pairs = 0;  // cross-archetype pairs with different paths
  std::size_t cross_pairs = 0;
  double demo_energy = 0.0;     // mean learned energy of training demonstrations
  double uniform_energy = 0.0;  // mean learned energy of uniform-policy rollouts
  double match_fraction() const { return total ? double(matched) / double(total) : 0.0; }
};

inline constexpr int kCommonStartAge = 20;
inline constexpr int kCommonTargetAge = 44;

/// Plans every held-out subject from its start to its last age and compares
/// against the ground-truth optimum; also plans all held-out subjects over a
/// shared age span to test subject dependence.
PlanningReport evaluate_planning(TrainingState& state, const WorldDataset& world);

struct EvaluationReport {
  PlanningReport planning;
  AgeFidelityReport fidelity;
  std::string to_json() const;
};

EvaluationReport evaluate(TrainingState& state);

}  // namespace flowpath
