#include "flowpath/diagnostics.hpp"

#include "flowpath/age_transform.hpp"
#include "flowpath/coupling_flow.hpp"
#include "flowpath/dense_net.hpp"
#include "flowpath/irl.hpp"
#include "flowpath/mdp.hpp"

namespace flowpath {

void randomize_params(std::span<const NamedParam> params, Rng& rng, double scale) {
  for (const auto& p : params) {
    for (double& v : p.tensor->values) v = scale * rng.normal();
  }
}

namespace {

Observation random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  Observation v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

NamedCheck check(const std::string& name, std::span<const NamedParam> params,
                 const GradSet& analytic, const std::function<double()>& loss, double rtol) {
  const auto numeric = finite_diff_grad(loss, params);
  return {name, compare_gradients(params, analytic, numeric, rtol)};
}

NamedCheck check_dense_net(Activation hidden, Activation output, const std::string& name,
                           Rng& rng, double rtol) {
  const std::vector<std::size_t> dims{5, 6, 4};
  auto net = DenseNet::glorot(dims, hidden, output, rng);
  std::vector<NamedParam> params;
  net.append_params("net", params);
  randomize_params(params, rng);
  const auto x = random_vector(5, rng);
  const auto w = random_vector(4, rng);
  auto loss = [&] { return dot(net.forward(x), w); };
  const auto g = net_backward(net, x, w);
  return check(name, params, g.params, loss, rtol);
}

}  // namespace

std::vector<NamedCheck> run_gradient_checks(std::uint64_t seed, double rtol) {
  Rng rng(seed);
  std::vector<NamedCheck> out;

  out.push_back(check_dense_net(Activation::tanh, Activation::identity, "dense_net.tanh", rng, rtol));
  out.push_back(check_dense_net(Activation::relu, Activation::softmax, "dense_net.softmax", rng, rtol));

  {
    auto unit = CouplingUnit::create(4, 1, 5, 2.0, rng);
    std::vector<NamedParam> params;
    unit.append_params("unit", params);
    randomize_params(params, rng);
    const auto x = random_vector(4, rng);
    const auto w = random_vector(4, rng);
    const double k = 0.7;
    auto loss = [&] {
      const auto o = unit.forward(x);
      return dot(o.y, w) + k * o.logdet;
    };
    GradSet grads;
    unit.append_zero_grads(grads);
    unit.backward(x, w, k, grads);
    out.push_back(check("coupling_unit", params, grads, loss, rtol));
  }

  {
    auto flow = BijectionStack::create({4, 3, 5, 2.0}, rng);
    const auto params = flow.parameters("theta");
    randomize_params(params, rng, 0.3);
    std::vector<Observation> batch;
    for (int i = 0; i < 5; ++i) batch.push_back(random_vector(4, rng));
    auto loss = [&] { return flow_nll(flow, batch).loss; };
    out.push_back(check("flow_nll", params, flow_nll(flow, batch).grads, loss, rtol));
  }

  {
    auto model = AgingModel::create({4, 2, 5, 2.0}, 3, rng);
    const auto params = model.parameters();
    randomize_params(params, rng, 0.3);
    std::vector<PairSample> batch;
    for (int i = 0; i < 6; ++i) {
      batch.push_back({random_vector(4, rng), random_vector(4, rng), AgeAction(rng.uniform_int(0, 15))});
    }
    auto loss = [&] { return pair_objective(model, batch, 0.1, false).loss; };
    out.push_back(check("pair_objective", params, pair_objective(model, batch, 0.1).grads, loss, rtol));
  }

  {
    auto g = FactoredTransform::create(4, 3, kNumActions, rng);
    std::vector<NamedParam> params;
    g.append_params("theta3", params);
    randomize_params(params, rng);
    std::vector<AgeAction> actions;
    for (int i = 0; i < 6; ++i) actions.emplace_back(rng.uniform_int(0, 15));
    auto loss = [&] { return controller_gaussian_penalty(g.w_a, actions); };
    const auto pr = controller_gaussian_penalty_grad(g.w_a, actions);
    GradSet grads;
    g.append_zero_grads(grads);
    grads[2] = pr.grad_w_a;
    out.push_back(check("controller_penalty", params, grads, loss, rtol));
  }

  const AgeRange range;
  auto cost = CostNet::create(3, range, 6, rng);
  const auto cost_params = cost.parameters();
  randomize_params(cost_params, rng);
  auto policy = PolicyNet::create(3, kNumActions, range, 6, rng);
  randomize_params(policy.parameters(), rng, 0.3);
  const StaticDynamics dynamics;
  std::vector<RolloutStart> starts{{{random_vector(3, rng), 20}, 3}, {{random_vector(3, rng), 35}, 2}};

  {
    const auto demos = sample_trajectories(policy, dynamics, starts, 2, rng);
    auto loss = [&] {
      double e = 0.0;
      for (const auto& d : demos) e += sequence_energy(d, cost);
      return e;
    };
    GradSet grads = cost.zero_grads();
    for (const auto& d : demos) sequence_energy_backward(d, cost, 1.0, grads);
    out.push_back(check("sequence_energy", cost_params, grads, loss, rtol));
  }

  {
    const auto demos = sample_trajectories(policy, dynamics, starts, 4, rng);
    const auto drawn = sample_trajectories(policy, dynamics, starts, 6, rng);
    std::vector<ProposalSample> samples;
    for (const auto& d : demos) samples.push_back({d, traj_log_proposal_density(d, policy)});
    for (const auto& d : drawn) samples.push_back({d, traj_log_proposal_density(d, policy)});
    auto loss = [&] { return irl_loss_and_grad(demos, samples, cost, false).loglik; };
    out.push_back(check("irl_objective", cost_params, irl_loss_and_grad(demos, samples, cost).grads,
                        loss, rtol));
  }
  return out;
}

}  // namespace flowpath
