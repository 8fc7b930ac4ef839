#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "flowpath/errors.hpp"
#include "flowpath/mdp.hpp"
#include "flowpath/optimizer.hpp"

namespace flowpath {

inline constexpr std::size_t kEnumerationBudget = 1'000'000;
inline constexpr int kMaxRolloutRetries = 8;

/// E(ζ) = Σ_t c(s_t, a_t). Validates the trajectory first.
double sequence_energy(const AgingTrajectory& traj, const StepCost& cost);
/// Adds upstream * dE/dΓ into grads.
void sequence_energy_backward(const AgingTrajectory& traj, const CostNet& cost, double upstream,
                              GradSet& grads);

/// Every fixed-horizon trajectory reachable from one start state, with its
/// energy and the exact log partition function log Σ exp(-E).
struct Enumeration {
  std::vector<AgingTrajectory> trajectories;
  std::vector<double> energies;
  double log_partition = 0.0;

  std::vector<double> probabilities() const;
};

Enumeration enumerate_trajectories(const State& start, int horizon, const StepCost& cost,
                                   const Dynamics& dynamics,
                                   std::size_t budget = kEnumerationBudget);

/// P(ζ) = exp(-E(ζ)) / Z with Z enumerated over all trajectories of the same
/// horizon from ζ's start state.
double exact_sequence_prob(const AgingTrajectory& traj, const StepCost& cost,
                           const Dynamics& dynamics, std::size_t budget = kEnumerationBudget);

/// q(ζ) = Π_t q(a_t | s_t); the start and transition factors are point masses.
double traj_proposal_density(const AgingTrajectory& traj, const PolicyNet& policy);
double traj_log_proposal_density(const AgingTrajectory& traj, const PolicyNet& policy);

struct RolloutStart {
  State state;
  int horizon = 1;
};

/// M stochastic rollouts; trajectory j starts from starts[j % starts.size()].
/// Each trajectory draws from its own stream derived from one draw of `rng`,
/// so the result does not depend on `workers`.
std::vector<AgingTrajectory> sample_trajectories(const PolicyNet& policy, const Dynamics& dynamics,
                                                 std::span<const RolloutStart> starts,
                                                 std::size_t m, Rng& rng,
                                                 std::size_t workers = 1);

struct ProposalSample {
  AgingTrajectory trajectory;
  double log_q = 0.0;
};

struct IrlObjective {
  double loglik = 0.0;         // importance-sampled L
  double log_partition = 0.0;  // log (1/N) Σ exp(-E_j) / q_j
  double demo_energy = 0.0;
  double sample_energy = 0.0;
  GradSet grads;               // ∇Γ L
};

/// Self-normalized importance-sampling estimate of log Z.
double log_partition_estimate(std::span<const double> energies, std::span<const double> log_q);

/// L = -(1/M) Σ_demos E - log (1/N) Σ_samples exp(-E)/q and its gradient
/// -(1/M) Σ dE + (1/Z') Σ w dE with w = exp(-E)/q.
IrlObjective irl_loss_and_grad(std::span<const AgingTrajectory> demos,
                               std::span<const ProposalSample> samples, const CostNet& cost,
                               bool with_grad = true);

struct PolicyUpdateConfig {
  std::size_t rollouts = 64;
  std::size_t steps = 10;
  std::size_t workers = 1;
};

struct PolicyUpdateReport {
  double objective_before = 0.0;  // estimate of E_q[E] - H(q) from the first batch
  double objective_last = 0.0;    // same, from the last batch
  double entropy = 0.0;           // mean per-state entropy of the last batch
  bool collapsed = false;
  std::vector<double> step_entropies;
};

/// Entropy-regularized policy gradient on E_q[Σ c] - H(q) with the cost held
/// fixed. The immediate-cost term is taken in expectation over all actions;
/// the cost-to-go uses the score-function estimator with a per-step mean
/// baseline.
PolicyUpdateReport policy_update(PolicyNet& policy, OptimizerState& state, const StepCost& cost,
                                 const Dynamics& dynamics, std::span<const RolloutStart> starts,
                                 const PolicyUpdateConfig& config, Rng& rng);

/// Rollout estimate of E_q[Σ c + log q] (the quantity policy_update lowers).
double policy_objective(const PolicyNet& policy, const StepCost& cost, const Dynamics& dynamics,
                        std::span<const RolloutStart> starts, std::size_t rollouts, Rng& rng);

struct IrlConfig {
  std::size_t outer_iterations = 30;     // K1
  std::size_t cost_steps = 10;           // K2
  std::size_t paths_per_iteration = 64;  // M
  std::size_t sample_batch = 32;         // N
  std::size_t demo_batch = 32;
  std::size_t policy_rollouts = 64;
  std::size_t policy_steps = 10;
  std::size_t workers = 1;

  friend bool operator==(const IrlConfig&, const IrlConfig&) = default;
};

struct IterationMetrics {
  std::size_t iteration = 0;
  double demo_energy = 0.0;
  double sample_energy = 0.0;
  double loglik_estimate = 0.0;
  double policy_entropy = 0.0;
  double wall_seconds = 0.0;
  bool policy_collapsed = false;

  friend bool operator==(const IterationMetrics&, const IterationMetrics&) = default;
};

/// Everything guided cost learning carries across outer iterations.
struct IrlState {
  CostNet cost;
  PolicyNet policy;
  OptimizerState cost_optimizer;
  OptimizerState policy_optimizer;
  Rng rng;
  std::size_t iteration = 0;
  std::vector<IterationMetrics> metrics;

  static IrlState create(std::size_t obs_dim, int num_actions, const AgeRange& range,
                         std::size_t hidden, const AdamConfig& cost_opt,
                         const AdamConfig& policy_opt, std::uint64_t seed);
};

class IrlIterationError : public NumericError {
 public:
  IrlIterationError(std::size_t iteration, const std::string& what)
      : NumericError("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

struct LearnOptions {
  std::size_t stop_after = std::numeric_limits<std::size_t>::max();  // outer iterations this call
  bool record_wall_time = false;
  std::function<void(const IrlState&)> on_iteration;
};

/// Guided cost learning: for each outer iteration sample M paths from the
/// policy, take K2 importance-sampled cost steps on demo ∪ sample batches,
/// then refine the policy against the new cost. Resumes from
/// state.iteration. On failure the state is rolled back to the last
/// completed iteration and IrlIterationError is thrown.
void learn_sdap(std::span<const AgingTrajectory> demos, const Dynamics& dynamics, IrlState& state,
                const IrlConfig& config, const LearnOptions& options = {});

}  // namespace flowpath
