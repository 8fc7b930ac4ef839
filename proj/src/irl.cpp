#include "flowpath/irl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "flowpath/linalg.hpp"

namespace flowpath {

double sequence_energy(const AgingTrajectory& traj, const StepCost& cost) {
  traj.validate();
  double e = 0.0;
  for (std::size_t t = 0; t < traj.num_steps(); ++t) e += cost.cost(traj.states[t], traj.actions[t]);
  return e;
}

void sequence_energy_backward(const AgingTrajectory& traj, const CostNet& cost, double upstream,
                              GradSet& grads) {
  for (std::size_t t = 0; t < traj.num_steps(); ++t) {
    cost.cost_backward(traj.states[t], traj.actions[t], upstream, grads);
  }
}

std::vector<double> Enumeration::probabilities() const {
  std::vector<double> p(energies.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(-energies[i] - log_partition);
  return p;
}

namespace {

void enumerate_from(AgingTrajectory& prefix, double energy, int remaining, const StepCost& cost,
                    const Dynamics& dynamics, Enumeration& out) {
  if (remaining == 0) {
    out.trajectories.push_back(prefix);
    out.energies.push_back(energy);
    return;
  }
  const State current = prefix.states.back();
  for (int k = 0; k < dynamics.num_actions(); ++k) {
    const AgeAction a(k);
    prefix.actions.push_back(a);
    prefix.states.push_back(dynamics.step(current, a));
    enumerate_from(prefix, energy + cost.cost(current, a), remaining - 1, cost, dynamics, out);
    prefix.actions.pop_back();
    prefix.states.pop_back();
  }
}

}  // namespace

Enumeration enumerate_trajectories(const State& start, int horizon, const StepCost& cost,
                                   const Dynamics& dynamics, std::size_t budget) {
  if (horizon < 0) throw DomainError("horizon must be non-negative");
  double count = 1.0;
  for (int t = 0; t < horizon; ++t) count *= dynamics.num_actions();
  if (count > static_cast<double>(budget)) {
    throw BudgetError("enumeration of " + std::to_string(static_cast<long double>(count)) +
                      " trajectories exceeds the budget of " + std::to_string(budget));
  }
  Enumeration out;
  out.trajectories.reserve(static_cast<std::size_t>(count));
  out.energies.reserve(static_cast<std::size_t>(count));
  AgingTrajectory prefix{{start}, {}};
  enumerate_from(prefix, 0.0, horizon, cost, dynamics, out);
  std::vector<double> neg(out.energies.size());
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -out.energies[i];
  out.log_partition = log_sum_exp(neg);
  return out;
}

double exact_sequence_prob(const AgingTrajectory& traj, const StepCost& cost,
                           const Dynamics& dynamics, std::size_t budget) {
  const double e = sequence_energy(traj, cost);
  const auto all = enumerate_trajectories(traj.start(), static_cast<int>(traj.num_steps()), cost,
                                          dynamics, budget);
  return std::exp(-e - all.log_partition);
}

double traj_log_proposal_density(const AgingTrajectory& traj, const PolicyNet& policy) {
  traj.validate();
  double lq = 0.0;
  for (std::size_t t = 0; t < traj.num_steps(); ++t) {
    const auto p = policy.probabilities(traj.states[t]);
    const auto k = static_cast<std::size_t>(traj.actions[t].index());
    if (k >= p.size()) throw DomainError("trajectory uses an action the policy does not cover");
    lq += std::log(p[k]);
  }
  return lq;
}

double traj_proposal_density(const AgingTrajectory& traj, const PolicyNet& policy) {
  return std::exp(traj_log_proposal_density(traj, policy));
}

namespace {

AgingTrajectory rollout(const PolicyNet& policy, const Dynamics& dynamics, const RolloutStart& start,
                        Rng& rng) {
  AgingTrajectory traj{{start.state}, {}};
  traj.states.reserve(static_cast<std::size_t>(start.horizon) + 1);
  for (int t = 0; t < start.horizon; ++t) {
    const auto p = policy.probabilities(traj.states.back());
    const AgeAction a(rng.categorical(p));
    traj.states.push_back(dynamics.step(traj.states.back(), a));
    traj.actions.push_back(a);
  }
  return traj;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<AgingTrajectory> sample_trajectories(const PolicyNet& policy, const Dynamics& dynamics,
                                                 std::span<const RolloutStart> starts,
                                                 std::size_t m, Rng& rng, std::size_t workers) {
  if (m < 1) throw DomainError("sample_trajectories: M must be at least 1");
  if (starts.empty()) throw DomainError("sample_trajectories: no start states");
  for (const auto& s : starts) {
    if (s.horizon < 1) throw DomainError("sample_trajectories: horizon must be at least 1");
  }
  if (policy.num_actions() != dynamics.num_actions()) {
    throw ShapeError("policy covers " + std::to_string(policy.num_actions()) +
                     " actions, dynamics offer " + std::to_string(dynamics.num_actions()));
  }
  const std::uint64_t base = rng.next_u64();
  std::vector<AgingTrajectory> out(m);
  parallel_for(m, workers, [&](std::size_t j) {
    const auto& start = starts[j % starts.size()];
    for (int attempt = 0;; ++attempt) {
      Rng stream(derive_seed(derive_seed(base, j), static_cast<std::uint64_t>(attempt)));
      try {
        out[j] = rollout(policy, dynamics, start, stream);
        return;
      } catch (const NumericError& e) {
        if (attempt + 1 >= kMaxRolloutRetries) {
          throw NumericError("rollout " + std::to_string(j) + " failed after " +
                             std::to_string(kMaxRolloutRetries) + " attempts: " + e.what());
        }
      }
    }
  });
  return out;
}

double log_partition_estimate(std::span<const double> energies, std::span<const double> log_q) {
  if (energies.size() != log_q.size() || energies.empty()) {
    throw ShapeError("log_partition_estimate: need matching non-empty inputs");
  }
  std::vector<double> log_w(energies.size());
  for (std::size_t j = 0; j < log_w.size(); ++j) log_w[j] = -energies[j] - log_q[j];
  const double lse = log_sum_exp(log_w);
  if (!std::isfinite(lse)) throw DegenerateWeightsError("importance weights are all zero or infinite");
  return lse - std::log(static_cast<double>(energies.size()));
}

IrlObjective irl_loss_and_grad(std::span<const AgingTrajectory> demos,
                               std::span<const ProposalSample> samples, const CostNet& cost,
                               bool with_grad) {
  if (demos.empty() || samples.empty()) {
    throw InsufficientDataError("IRL objective needs demonstrations and samples");
  }
  IrlObjective out;
  if (with_grad) out.grads = cost.zero_grads();

  const double inv_m = 1.0 / static_cast<double>(demos.size());
  for (const auto& d : demos) {
    const double e = sequence_energy(d, cost);
    out.demo_energy += e * inv_m;
    if (with_grad) sequence_energy_backward(d, cost, -inv_m, out.grads);
  }

  std::vector<double> energies(samples.size());
  std::vector<double> log_w(samples.size());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (!(samples[j].log_q > -std::numeric_limits<double>::infinity()) ||
        std::isnan(samples[j].log_q)) {
      throw DomainError("sample " + std::to_string(j) + " has zero proposal density");
    }
    energies[j] = sequence_energy(samples[j].trajectory, cost);
    log_w[j] = -energies[j] - samples[j].log_q;
    out.sample_energy += energies[j] / static_cast<double>(samples.size());
  }
  const double lse = log_sum_exp(log_w);
  if (!std::isfinite(lse)) {
    throw DegenerateWeightsError("importance weights are all zero or non-finite");
  }
  out.log_partition = lse - std::log(static_cast<double>(samples.size()));
  out.loglik = -out.demo_energy - out.log_partition;

  if (with_grad) {
    for (std::size_t j = 0; j < samples.size(); ++j) {
      const double w = std::exp(log_w[j] - lse);
      if (w > 0.0) sequence_energy_backward(samples[j].trajectory, cost, w, out.grads);
    }
  }
  return out;
}

namespace {

struct BatchEvaluation {
  double objective = 0.0;
  double entropy = 0.0;
  bool collapsed = false;
};

// Evaluates one rollout batch and, when grads is non-null, adds the gradient of
// E_q[Σ (c + log q)] w.r.t. the policy parameters.
BatchEvaluation evaluate_batch(const PolicyNet& policy, const StepCost& cost,
                               const std::vector<AgingTrajectory>& batch, GradSet* grads) {
  const int n = policy.num_actions();
  struct Step {
    std::vector<double> probs;
    std::vector<double> costs;
    double f = 0.0;  // c(s, a) + log q(a | s) for the sampled action
  };
  std::vector<std::vector<Step>> steps(batch.size());
  std::size_t max_len = 0;
  std::size_t visited = 0;
  std::vector<double> min_prob(static_cast<std::size_t>(n), 1.0);
  BatchEvaluation out;

  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto& traj = batch[r];
    max_len = std::max(max_len, traj.num_steps());
    for (std::size_t t = 0; t < traj.num_steps(); ++t) {
      Step st;
      st.probs = policy.probabilities(traj.states[t]);
      st.costs.resize(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) st.costs[k] = cost.cost(traj.states[t], AgeAction(k));
      const auto a = static_cast<std::size_t>(traj.actions[t].index());
      st.f = st.costs[a] + std::log(std::max(st.probs[a], 1e-300));
      out.objective += st.f;
      out.entropy += entropy(st.probs);
      for (int k = 0; k < n; ++k) min_prob[k] = std::min(min_prob[k], st.probs[k]);
      visited += 1;
      steps[r].push_back(std::move(st));
    }
  }
  out.objective /= static_cast<double>(batch.size());
  if (visited > 0) out.entropy /= static_cast<double>(visited);
  out.collapsed =
      visited > 0 && std::any_of(min_prob.begin(), min_prob.end(), [](double p) { return p < 1e-8; });
  if (grads == nullptr) return out;

  // Cost-to-go after each step and its per-step mean as baseline.
  std::vector<std::vector<double>> future(batch.size());
  std::vector<double> baseline(max_len, 0.0);
  std::vector<double> counts(max_len, 0.0);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto len = steps[r].size();
    future[r].assign(len, 0.0);
    double acc = 0.0;
    for (std::size_t t = len; t-- > 0;) {
      future[r][t] = acc;
      acc += steps[r][t].f;
    }
    for (std::size_t t = 0; t < len; ++t) {
      baseline[t] += future[r][t];
      counts[t] += 1.0;
    }
  }
  for (std::size_t t = 0; t < max_len; ++t) {
    if (counts[t] > 0.0) baseline[t] /= counts[t];
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<double> upstream(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < batch.size(); ++r) {
    for (std::size_t t = 0; t < steps[r].size(); ++t) {
      const auto& st = steps[r][t];
      // d/dp of Σ_a p_a (c_a + log p_a) is c_a + log p_a + 1; the constant
      // cancels through the softmax.
      for (int k = 0; k < n; ++k) {
        upstream[k] = inv_b * (st.costs[k] + std::log(std::max(st.probs[k], 1e-300)) + 1.0);
      }
      const auto a = static_cast<std::size_t>(batch[r].actions[t].index());
      upstream[a] += inv_b * (future[r][t] - baseline[t]) / std::max(st.probs[a], 1e-300);
      policy.backward(batch[r].states[t], upstream, *grads);
    }
  }
  return out;
}

}  // namespace

double policy_objective(const PolicyNet& policy, const StepCost& cost, const Dynamics& dynamics,
                        std::span<const RolloutStart> starts, std::size_t rollouts, Rng& rng) {
  const auto batch = sample_trajectories(policy, dynamics, starts, rollouts, rng);
  return evaluate_batch(policy, cost, batch, nullptr).objective;
}

PolicyUpdateReport policy_update(PolicyNet& policy, OptimizerState& state, const StepCost& cost,
                                 const Dynamics& dynamics, std::span<const RolloutStart> starts,
                                 const PolicyUpdateConfig& config, Rng& rng) {
  if (config.rollouts < 1) throw DomainError("policy_update: need at least one rollout");
  PolicyUpdateReport report;
  const auto params = policy.parameters();
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto batch =
        sample_trajectories(policy, dynamics, starts, config.rollouts, rng, config.workers);
    GradSet grads = policy.zero_grads();
    const auto eval = evaluate_batch(policy, cost, batch, &grads);
    if (step == 0) report.objective_before = eval.objective;
    report.objective_last = eval.objective;
    report.entropy = eval.entropy;
    report.collapsed = eval.collapsed;
    report.step_entropies.push_back(eval.entropy);
    optimizer_step(params, grads, state);
  }
  return report;
}

IrlState IrlState::create(std::size_t obs_dim, int num_actions, const AgeRange& range,
                          std::size_t hidden, const AdamConfig& cost_opt,
                          const AdamConfig& policy_opt, std::uint64_t seed) {
  Rng init(derive_seed(seed, 0x1e1));
  IrlState s{CostNet::create(obs_dim, range, hidden, init),
             PolicyNet::create(obs_dim, num_actions, range, hidden, init),
             {},
             {},
             Rng(derive_seed(seed, 0x1e2)),
             0,
             {}};
  s.cost_optimizer = OptimizerState::for_params(s.cost.parameters(), cost_opt);
  s.policy_optimizer = OptimizerState::for_params(s.policy.parameters(), policy_opt);
  return s;
}

namespace {

std::vector<std::size_t> choose_subset(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(n - i - 1)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

IterationMetrics run_iteration(std::span<const AgingTrajectory> demos, const Dynamics& dynamics,
                               IrlState& state, const IrlConfig& config,
                               std::span<const RolloutStart> starts) {
  IterationMetrics m;
  m.iteration = state.iteration + 1;

  // Sample M paths from the current policy, starting from demonstration
  // start states in a rotated order.
  const auto offset = static_cast<std::size_t>(
      state.rng.uniform_int(0, static_cast<int>(starts.size()) - 1));
  std::vector<RolloutStart> rotated(starts.begin(), starts.end());
  std::rotate(rotated.begin(), rotated.begin() + static_cast<std::ptrdiff_t>(offset), rotated.end());
  const auto pool = sample_trajectories(state.policy, dynamics, rotated,
                                        config.paths_per_iteration, state.rng, config.workers);

  // The policy is fixed during the cost steps, so proposal densities are too.
  std::vector<double> pool_log_q(pool.size());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    pool_log_q[j] = traj_log_proposal_density(pool[j], state.policy);
  }
  std::vector<double> demo_log_q(demos.size());
  for (std::size_t i = 0; i < demos.size(); ++i) {
    demo_log_q[i] = traj_log_proposal_density(demos[i], state.policy);
  }

  const auto cost_params = state.cost.parameters();
  for (std::size_t step = 0; step < config.cost_steps; ++step) {
    const auto demo_idx = choose_subset(demos.size(), config.demo_batch, state.rng);
    const auto sample_idx = choose_subset(pool.size(), config.sample_batch, state.rng);
    std::vector<AgingTrajectory> demo_batch;
    std::vector<ProposalSample> mixed;
    for (auto i : demo_idx) {
      demo_batch.push_back(demos[i]);
      mixed.push_back({demos[i], demo_log_q[i]});
    }
    for (auto j : sample_idx) mixed.push_back({pool[j], pool_log_q[j]});
    auto obj = irl_loss_and_grad(demo_batch, mixed, state.cost, true);
    scale_grads(obj.grads, -1.0);  // ascend L
    optimizer_step(cost_params, obj.grads, state.cost_optimizer);
  }

  PolicyUpdateConfig pu{config.policy_rollouts, config.policy_steps, config.workers};
  const auto report =
      policy_update(state.policy, state.policy_optimizer, state.cost, dynamics, rotated, pu, state.rng);

  std::vector<ProposalSample> all;
  all.reserve(demos.size() + pool.size());
  for (std::size_t i = 0; i < demos.size(); ++i) all.push_back({demos[i], demo_log_q[i]});
  for (std::size_t j = 0; j < pool.size(); ++j) all.push_back({pool[j], pool_log_q[j]});
  const auto summary = irl_loss_and_grad(demos, all, state.cost, false);
  double pool_energy = 0.0;
  for (const auto& t : pool) pool_energy += sequence_energy(t, state.cost);
  m.demo_energy = summary.demo_energy;
  m.sample_energy = pool_energy / static_cast<double>(pool.size());
  m.loglik_estimate = summary.loglik;
  m.policy_entropy = report.entropy;
  m.policy_collapsed = report.collapsed;
  return m;
}

}  // namespace

void learn_sdap(std::span<const AgingTrajectory> demos, const Dynamics& dynamics, IrlState& state,
                const IrlConfig& config, const LearnOptions& options) {
  if (demos.empty()) throw InsufficientDataError("learn_sdap: no demonstrations");
  std::vector<RolloutStart> starts;
  starts.reserve(demos.size());
  for (std::size_t i = 0; i < demos.size(); ++i) {
    try {
      demos[i].validate();
    } catch (const ValidationError& e) {
      throw ValidationError("demonstration " + std::to_string(i) + ": " + e.what());
    }
    starts.push_back({demos[i].start(), static_cast<int>(std::max<std::size_t>(1, demos[i].num_steps()))});
  }

  std::size_t done_this_call = 0;
  while (state.iteration < config.outer_iterations && done_this_call < options.stop_after) {
    const auto t0 = std::chrono::steady_clock::now();
    IrlState saved = state;
    IterationMetrics m;
    try {
      m = run_iteration(demos, dynamics, state, config, starts);
    } catch (const Error& e) {
      const auto k = saved.iteration + 1;
      state = std::move(saved);
      throw IrlIterationError(k, e.what());
    }
    if (options.record_wall_time) {
      m.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    state.iteration += 1;
    state.metrics.push_back(m);
    done_this_call += 1;
    if (options.on_iteration) options.on_iteration(state);
  }
}

}  // namespace flowpath
