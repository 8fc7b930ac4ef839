// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <flowpath_oracles/oracles.hpp>

#include "cli.hpp"
#include "flowpath/age_transform.hpp"
#include "flowpath/checkpoint.hpp"
#include "flowpath/coupling_flow.hpp"
#include "flowpath/diagnostics.hpp"
#include "flowpath/evaluation.hpp"
#include "flowpath/io.hpp"
#include "flowpath/irl.hpp"
#include "flowpath/pipeline.hpp"
#include "flowpath/planning.hpp"
#include "test_support.hpp"

namespace {

using namespace flowpath;
namespace orc = flowpath_oracles;
using testing::random_vec;

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_seconds;
  const bool ok = o.passed && in_time;
  if (!ok) ++failures;
  std::printf("[%s] %2d %s: %s (%.1fs, limit %.0fs)\n", ok ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              secs, limit_seconds);
  std::fflush(stdout);
}

std::string fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

Outcome invertibility() {
  double worst = 0.0;
  Rng rng(101);
  for (std::size_t dim : {2u, 4u, 16u})
    for (std::size_t units : {4u, 10u}) {
      auto flow = BijectionStack::create({dim, units, 32, 2.0}, rng);
      randomize_params(flow.parameters("f"), rng, 0.2);
      for (int i = 0; i < 1000; ++i) {
        const auto x = random_vec(dim, rng);
        worst = std::max(worst, testing::max_abs_diff(flow.inverse(flow.forward(x).z), x));
        const auto z = random_vec(dim, rng);
        worst = std::max(worst, testing::max_abs_diff(flow.forward(flow.inverse(z)).z, z));
      }
    }
  return {worst < 1e-9, fmt("max abs round-trip error %.3g over 6 configurations", worst)};
}

Outcome exact_likelihood() {
  Rng rng(202);
  double worst_rel = 0.0;
  for (std::size_t dim : {2u, 3u, 4u})
    for (int trial = 0; trial < 10; ++trial) {
      auto flow = BijectionStack::create({dim, 4, 16, 2.0}, rng);
      randomize_params(flow.parameters("f"), rng, 0.5);
      const auto x = random_vec(dim, rng);
      const auto jac = orc::numerical_jacobian([&](const orc::Vec& v) { return flow.forward(v).z; }, x);
      const double det = std::abs(orc::determinant(jac));
      worst_rel = std::max(worst_rel, std::abs(std::exp(flow.forward(x).logdet) - det) / det);
    }

  auto flow = BijectionStack::create({2, 4, 16, 2.0}, rng);
  std::vector<Observation> data;
  for (int i = 0; i < 2000; ++i) {
    const double c = rng.uniform() < 0.5 ? -1.5 : 1.5;
    data.push_back({c + 0.4 * rng.normal(), 0.5 * c + 0.4 * rng.normal()});
  }
  const auto params = flow.parameters("f");
  AdamConfig cfg;
  cfg.learning_rate = 5e-3;
  auto opt = OptimizerState::for_params(params, cfg);
  for (int step = 0; step < 2000; ++step) {
    std::vector<Observation> batch;
    for (int i = 0; i < 64; ++i) batch.push_back(data[static_cast<std::size_t>(rng.uniform_int(0, 1999))]);
    optimizer_step(params, flow_nll(flow, batch).grads, opt);
  }
  const double mass = orc::integrate_2d(
      [&](double a, double b) {
        const std::vector<double> x{a, b};
        return std::exp(flow_log_density(flow, x));
      },
      -8.0, 8.0, 400);
  return {worst_rel <= 1e-4 && std::abs(mass - 1.0) <= 0.01,
          fmt("max det rel error %.3g (D<=4), trained D=2 density mass %.5f", worst_rel, mass)};
}

Outcome gradients() {
  const auto checks = run_gradient_checks(303, 1e-4);
  bool ok = !checks.empty();
  double worst = 0.0;
  std::string failed;
  for (const auto& c : checks) {
    ok = ok && c.report.passed;
    worst = std::max(worst, c.report.max_rel_error);
    if (!c.report.passed) failed += " " + c.name;
  }
  return {ok, fmt("%g checks, worst rel error %.3g", static_cast<double>(checks.size()), worst) +
                  (failed.empty() ? "" : "; failed:" + failed)};
}

Outcome factorization() {
  Rng rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const auto f = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const int n = rng.uniform_int(1, 6);
    auto g = FactoredTransform::create(d, f, static_cast<std::size_t>(n), rng);
    for (auto* t : {&g.w, &g.w_z, &g.w_a, &g.b})
      for (double& v : t->values) v = rng.normal();
    const auto z = random_vec(d, rng);
    const AgeAction a(rng.uniform_int(0, n - 1), n);
    const auto fast = transform_apply(g, z, a);
    const auto slow = orc::three_way_contraction({d, f, g.w.values}, {f, d, g.w_z.values},
                                                 {f, static_cast<std::size_t>(n), g.w_a.values}, g.b.values,
                                                 z, a.one_hot());
    for (std::size_t i = 0; i < d; ++i)
      worst = std::max(worst, std::abs(fast[i] - slow[i]) / std::max(std::abs(slow[i]), 1e-300));
  }
  return {worst <= 1e-12, fmt("100 instances, max rel error %.3g", worst)};
}

double small_world_cost(int age, int action) { return 0.3 * std::sin(0.7 * age + 1.3 * action) + 0.2 * action; }

class SmallWorldCost final : public StepCost {
 public:
  double cost(const State& s, const AgeAction& a) const override { return small_world_cost(s.age, a.index()); }
};

Outcome partition_function() {
  const State s0{{0.0}, 10};
  const double exact = orc::enumerate_log_partition(10, 3, 3, small_world_cost);
  Rng init(505);
  auto policy = PolicyNet::create(1, 3, {}, 8, init);
  randomize_params(policy.parameters(), init, 0.3);
  const std::vector<RolloutStart> starts{{s0, 3}};
  const SmallWorldCost cost;
  double mean_rel = 0.0, worst_rel = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto trajs = sample_trajectories(policy, StaticDynamics(3), starts, 2000, rng);
    std::vector<double> energies, log_q;
    for (const auto& t : trajs) {
      energies.push_back(sequence_energy(t, cost));
      log_q.push_back(traj_log_proposal_density(t, policy));
    }
    const double rel = std::abs(log_partition_estimate(energies, log_q) - exact) / std::abs(exact);
    mean_rel += rel / 20.0;
    worst_rel = std::max(worst_rel, rel);
  }
  return {mean_rel <= 0.05, fmt("exact log Z %.4f, mean rel error %.4f (worst %.4f) over 20 seeds", exact,
                                mean_rel, worst_rel)};
}

Outcome bandit() {
  Rng rng(606);
  AdamConfig cfg;
  cfg.learning_rate = 2e-2;
  auto policy = PolicyNet::create(1, 4, {}, 8, rng);
  auto opt = OptimizerState::for_params(policy.parameters(), cfg);
  const std::vector<double> costs{1.0, 0.0, 1.0, 1.0};
  const std::vector<RolloutStart> start1{{{{0.0}, 10}, 1}};
  policy_update(policy, opt, TableCost(costs), StaticDynamics(4), start1, {16, 600, 1}, rng);
  const double tv = orc::total_variation(policy.probabilities(start1[0].state), orc::gibbs(costs));

  auto wide = PolicyNet::create(2, kNumActions, {}, 8, rng);
  randomize_params(wide.parameters(), rng, 0.5);
  auto opt16 = OptimizerState::for_params(wide.parameters(), cfg);
  std::vector<RolloutStart> starts;
  for (int i = 0; i < 4; ++i) starts.push_back({{random_vec(2, rng), 10 + 10 * i}, 1});
  policy_update(wide, opt16, TableCost(std::vector<double>(kNumActions, 0.0)), StaticDynamics(), starts,
                {32, 600, 1}, rng);
  double h = 0.0;
  for (const auto& s : starts) h += entropy(wide.probabilities(s.state)) / starts.size();
  const double gap = std::abs(h - std::log(16.0));
  return {tv <= 0.05 && gap <= 1e-3, fmt("bandit TV %.4f; zero-cost entropy %.6f (ln16 gap %.2g)", tv, h, gap)};
}

TrainingState* trained = nullptr;

Outcome end_to_end() {
  RunConfig config;
  config.output_dir = "acceptance_run";
  static TrainingState state = run_pipeline(config);
  trained = &state;
  const EvaluationReport rep = evaluate(state);
  const auto& p = rep.planning;
  const bool a = p.demo_energy < p.uniform_energy;
  const bool b = p.match_fraction() >= 0.8;
  const bool c = p.cross_pairs > 0 && p.distinct_pairs == p.cross_pairs;
  std::ostringstream s;
  s << "(a) demo energy " << format_real(p.demo_energy) << " < uniform " << format_real(p.uniform_energy)
    << "; (b) matched " << p.matched << "/" << p.total << "; (c) distinct " << p.distinct_pairs << "/"
    << p.cross_pairs << " cross-archetype pairs";
  return {a && b && c, s.str()};
}

Outcome age_fidelity() {
  if (!trained) return {false, "no trained model"};
  const auto world = generate_world(trained->config.world, trained->config.seed);
  const auto f = evaluate_age_fidelity(trained->model, world, trained->config.world);
  return {f.gap() <= kAgeFidelityBound,
          fmt("MAE real %.4f, synthesized %.4f, gap %.4f (bound %.2f)", f.real_mae, f.synth_mae, f.gap(),
              kAgeFidelityBound) +
              fmt(", train %.4f", f.train_mae)};
}

Outcome multi_input_reduction() {
  if (!trained) return {false, "no trained model"};
  auto& state = *trained;
  const auto world = generate_world(state.config.world, state.config.seed);
  const SynthesisDynamics dyn(state.model, state.config.world.num_actions);
  std::size_t compared = 0;
  bool identical = true;
  for (const auto& subject : world.heldout) {
    const State start = subject.demo.start();
    const int target = std::min(start.age + 24, state.config.world.age_max);
    const auto single = plan_trajectory(state.irl.policy, dyn, start, target);
    const std::vector<State> inputs{start};
    const auto init = multi_input_init(inputs, state.model);
    const auto multi = plan_trajectory(state.irl.policy, dyn, init.state, target);
    identical = identical && init.bridge_actions.empty() && single == multi;
    ++compared;
  }

  // Same comparison through the command-line entry points.
  testing::TempDir dir;
  save_checkpoint(dir / "model.ckpt", to_checkpoint(state));
  const State start = world.heldout.front().demo.start();
  save_sequences(dir / "inputs.jsonl", {SequenceRecord{"one", {start.age}, {start.observation}}});
  std::string obs;
  for (double v : start.observation) obs += (obs.empty() ? "" : ",") + format_real(v);
  const std::string target = std::to_string(start.age + 20);
  std::ostringstream out1, out2, err;
  const int c1 = cli::dispatch({"synthesize", "--checkpoint", dir / "model.ckpt", "--age", std::to_string(start.age),
                                "--observation", obs, "--target", target},
                               out1, err);
  const int c2 = cli::dispatch(
      {"synthesize", "--checkpoint", dir / "model.ckpt", "--inputs", dir / "inputs.jsonl", "--target", target}, out2,
      err);
  const bool cli_same = c1 == 0 && c2 == 0 && out1.str() == out2.str() && !out1.str().empty();
  return {identical && cli_same && compared > 0,
          std::to_string(compared) + " held-out starts, paths and states " + (identical ? "identical" : "DIFFER") +
              "; CLI synthesize output " + (cli_same ? "identical" : "DIFFERS")};
}

Outcome determinism() {
  if (!trained) return {false, "no first run"};
  namespace fs = std::filesystem;
  const std::vector<std::string> files{"metrics.csv", "summary.json", "checkpoint.ckpt"};
  auto snapshot = [&](TrainingState& state) {
    write_run_outputs(state);
    std::vector<std::string> bytes;
    for (const auto& f : files) bytes.push_back(read_file((fs::path(state.config.output_dir) / f).string()));
    return bytes;
  };
  const auto first = snapshot(*trained);
  auto rerun = run_pipeline(trained->config);
  const auto second = snapshot(rerun);
  bool same = true;
  std::string detail;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const bool eq = first[i] == second[i] && !first[i].empty();
    same = same && eq;
    detail += std::string(detail.empty() ? "" : ", ") + files[i] + (eq ? " identical" : " DIFFER") + " (" +
              std::to_string(first[i].size()) + " bytes)";
  }
  return {same, detail};
}

}  // namespace

int main() {
  report(1, "invertibility", 30, invertibility);
  report(2, "exact likelihood", 120, exact_likelihood);
  report(3, "gradients", 120, gradients);
  report(4, "factorization equivalence", 5, factorization);
  report(5, "partition function", 60, partition_function);
  report(6, "max-entropy bandit", 60, bandit);
  report(7, "end-to-end guided cost learning", 900, end_to_end);
  report(8, "age fidelity", 300, age_fidelity);
  report(9, "multi-input reduction", 10, multi_input_reduction);
  report(10, "determinism", 1800, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
