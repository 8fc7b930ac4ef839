#include "flowpath/evaluation.hpp"

#include <cmath>

#include <json.hpp>

#include "flowpath/errors.hpp"
#include "flowpath/linalg.hpp"
#include "flowpath/planning.hpp"

namespace flowpath {

AgeRegressor AgeRegressor::fit(const std::vector<Observation>& xs, const std::vector<double>& ys,
                               double ridge) {
  if (xs.empty() || xs.size() != ys.size()) {
    throw InsufficientDataError("age regressor needs matching, non-empty data");
  }
  const std::size_t d = xs.front().size() + 1;
  Matrix gram(d, d);
  std::vector<double> rhs(d, 0.0);
  for (std::size_t n = 0; n < xs.size(); ++n) {
    std::vector<double> f(xs[n].begin(), xs[n].end());
    f.push_back(1.0);
    for (std::size_t i = 0; i < d; ++i) {
      rhs[i] += f[i] * ys[n];
      for (std::size_t j = 0; j < d; ++j) gram(i, j) += f[i] * f[j];
    }
  }
  const auto w = solve_spd(gram, rhs, ridge);
  AgeRegressor r;
  r.weights.assign(w.begin(), w.end() - 1);
  r.bias = w.back();
  return r;
}

double AgeRegressor::predict(std::span<const double> x) const {
  if (x.size() != weights.size()) throw ShapeError("age regressor input has the wrong length");
  double y = bias;
  for (std::size_t i = 0; i < x.size(); ++i) y += weights[i] * x[i];
  return y;
}

AgeFidelityReport evaluate_age_fidelity(const AgingModel& model, const WorldDataset& world,
                                        const WorldConfig& config) {
  const AgeRange range = config.range();
  std::vector<Observation> xs;
  std::vector<double> ys;
  for (const auto& s : world.train) {
    for (const auto& st : s.demo.states) {
      xs.push_back(st.observation);
      ys.push_back(range.normalize(st.age));
    }
  }
  for (const auto& album : world.albums) {
    for (std::size_t i = 0; i < album.ages.size(); ++i) {
      xs.push_back(album.observations[i]);
      ys.push_back(range.normalize(album.ages[i]));
    }
  }
  const auto reg = AgeRegressor::fit(xs, ys);

  AgeFidelityReport out;
  for (std::size_t i = 0; i < xs.size(); ++i) out.train_mae += std::abs(reg.predict(xs[i]) - ys[i]);
  out.train_mae /= static_cast<double>(xs.size());

  const SynthesisDynamics dynamics(model);
  for (const auto& s : world.heldout) {
    State synth = s.demo.start();
    for (std::size_t t = 0; t < s.demo.num_steps(); ++t) {
      synth = dynamics.step(synth, s.demo.actions[t]);
      const auto& real = s.demo.states[t + 1];
      const double truth = range.normalize(real.age);
      out.real_mae += std::abs(reg.predict(real.observation) - truth);
      out.synth_mae += std::abs(reg.predict(synth.observation) - truth);
      out.evaluated_states += 1;
    }
  }
  if (out.evaluated_states == 0) {
    throw InsufficientDataError("held-out subjects have no later states to evaluate");
  }
  out.real_mae /= static_cast<double>(out.evaluated_states);
  out.synth_mae /= static_cast<double>(out.evaluated_states);
  return out;
}

PlanningReport evaluate_planning(TrainingState& state, const WorldDataset& world) {
  const auto& config = state.config.world;
  const SynthesisDynamics dynamics(state.model, config.num_actions);
  const auto& policy = state.irl.policy;
  PlanningReport out;

  for (const auto& s : world.heldout) {
    const auto planned = plan_path(policy, dynamics, s.demo.start(), s.demo.last().age);
    const auto best =
        brute_force_optimal_path(s.demo.start(), s.demo.last().age, GroundTruthCost(s.archetype),
                                 config.horizon - 1, WorldDynamics(s.archetype, config));
    out.total += 1;
    out.matched += planned == best.actions ? 1 : 0;
  }

  std::vector<std::vector<AgeAction>> shared;
  for (const auto& s : world.heldout) {
    const State start{observe(s.archetype, kCommonStartAge, config), kCommonStartAge};
    shared.push_back(plan_path(policy, dynamics, start, kCommonTargetAge));
  }
  for (std::size_t i = 0; i < world.heldout.size(); ++i) {
    for (std::size_t j = i + 1; j < world.heldout.size(); ++j) {
      if (world.heldout[i].archetype.archetype_class == world.heldout[j].archetype.archetype_class) {
        continue;
      }
      out.cross_pairs += 1;
      out.distinct_pairs += shared[i] != shared[j] ? 1 : 0;
    }
  }

  std::vector<AgingTrajectory> demos;
  for (const auto& s : world.train) demos.push_back(s.demo);
  const auto irl_demos = synthesized_demonstrations(state.model, demos);
  std::vector<RolloutStart> starts;
  for (const auto& d : irl_demos) {
    out.demo_energy += sequence_energy(d, state.irl.cost) / static_cast<double>(irl_demos.size());
    starts.push_back({d.start(), static_cast<int>(std::max<std::size_t>(1, d.num_steps()))});
  }
  Rng init(0);
  const auto uniform = PolicyNet::create(config.dim, config.num_actions, config.range(),
                                         state.config.irl.policy_hidden, init);
  Rng rng(derive_seed(state.config.seed, 0xe7a1));
  const std::size_t rollouts = 4 * starts.size();
  const auto samples = sample_trajectories(uniform, dynamics, starts, rollouts, rng);
  for (const auto& t : samples) {
    out.uniform_energy += sequence_energy(t, state.irl.cost) / static_cast<double>(samples.size());
  }
  return out;
}

std::string EvaluationReport::to_json() const {
  nlohmann::ordered_json j;
  j["planning"] = {{"matched", planning.matched},
                   {"total", planning.total},
                   {"match_fraction", planning.match_fraction()},
                   {"distinct_pairs", planning.distinct_pairs},
                   {"cross_archetype_pairs", planning.cross_pairs},
                   {"demo_energy", planning.demo_energy},
                   {"uniform_energy", planning.uniform_energy}};
  j["age_fidelity"] = {{"train_mae", fidelity.train_mae},
                       {"real_mae", fidelity.real_mae},
                       {"synth_mae", fidelity.synth_mae},
                       {"gap", fidelity.gap()},
                       {"bound", kAgeFidelityBound},
                       {"evaluated_states", fidelity.evaluated_states}};
  return j.dump(2) + "\n";
}

EvaluationReport evaluate(TrainingState& state) {
  const auto world = generate_world(state.config.world, state.config.seed);
  return {evaluate_planning(state, world),
          evaluate_age_fidelity(state.model, world, state.config.world)};
}

}  // namespace flowpath
