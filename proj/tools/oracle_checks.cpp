#include <cmath>
#include <sstream>

#include <flowpath_oracles/oracles.hpp>

#include "cli.hpp"
#include "flowpath/age_transform.hpp"
#include "flowpath/coupling_flow.hpp"
#include "flowpath/irl.hpp"
#include "flowpath/synth_world.hpp"

namespace flowpath::cli {

namespace orc = flowpath_oracles;

namespace {

orc::Dense dense(const ParamTensor& t) { return {t.rows(), t.cols(), t.values}; }

class AgeTableCost final : public StepCost {
 public:
  explicit AgeTableCost(std::uint64_t seed) : seed_(seed) {}
  double operator()(int age, int action) const {
    Rng r(derive_seed(seed_, static_cast<std::uint64_t>(age * 64 + action)));
    return r.uniform(0.0, 2.0);
  }
  double cost(const State& s, const AgeAction& a) const override { return (*this)(s.age, a.index()); }

 private:
  std::uint64_t seed_;
};

std::string format_error(double v) {
  std::ostringstream ss;
  ss << "max error " << v;
  return ss.str();
}

}  // namespace

std::vector<OracleCheck> run_oracle_checks(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<OracleCheck> out;

  {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto d = static_cast<std::size_t>(rng.uniform_int(1, 6));
      const auto f = static_cast<std::size_t>(rng.uniform_int(1, 6));
      const int n = rng.uniform_int(1, 6);
      auto g = FactoredTransform::create(d, f, static_cast<std::size_t>(n), rng);
      for (auto* t : {&g.w, &g.w_z, &g.w_a, &g.b}) {
        for (double& v : t->values) v = rng.normal();
      }
      std::vector<double> z(d);
      for (double& v : z) v = rng.normal();
      const AgeAction a(rng.uniform_int(0, n - 1), n);
      const auto fast = transform_apply(g, z, a);
      const auto slow = orc::three_way_contraction(dense(g.w), dense(g.w_z), dense(g.w_a),
                                                   g.b.values, z, a.one_hot());
      for (std::size_t i = 0; i < d; ++i) {
        worst = std::max(worst, std::abs(fast[i] - slow[i]) / std::max(std::abs(slow[i]), 1e-300));
      }
    }
    out.push_back({"factorization", worst <= 1e-12, "max relative " + format_error(worst)});
  }

  {
    double worst = 0.0;
    for (std::size_t dim : {2, 3, 4}) {
      auto flow = BijectionStack::create({dim, 4, 8, 2.0}, rng);
      for (const auto& p : flow.parameters("f")) {
        for (double& v : p.tensor->values) v = 0.4 * rng.normal();
      }
      std::vector<double> x(dim);
      for (double& v : x) v = rng.normal();
      const auto jac = orc::numerical_jacobian([&](const orc::Vec& v) { return flow.forward(v).z; }, x);
      const double expected = std::log(std::abs(orc::determinant(jac)));
      const double got = flow.forward(x).logdet;
      worst = std::max(worst, std::abs(got - expected) / std::max(std::abs(expected), 1.0));
    }
    out.push_back({"log_determinant", worst <= 1e-4, "relative " + format_error(worst)});
  }

  {
    int agree = 0;
    const int trials = 30;
    for (int trial = 0; trial < trials; ++trial) {
      const AgeTableCost cost(rng.next_u64());
      const int start = rng.uniform_int(10, 40);
      const int cap = rng.uniform_int(1, 3);
      const int target = start + rng.uniform_int(0, 15 * cap);
      const StaticDynamics dynamics;
      const auto bf = brute_force_optimal_path({{0.0}, start}, target, cost, cap, dynamics);
      const auto dp = orc::dp_optimal_path(start, target, cap, kNumActions, cost);
      std::vector<int> bf_actions;
      for (const auto& a : bf.actions) bf_actions.push_back(a.index());
      const double bf_cost = sequence_energy(bf, cost);
      if (bf_actions == dp.actions && std::abs(bf_cost - dp.cost) <= 1e-9) ++agree;
    }
    out.push_back({"optimal_path", agree == trials,
                   std::to_string(agree) + "/" + std::to_string(trials) + " instances agree"});
  }

  {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const AgeTableCost cost(rng.next_u64());
      const StaticDynamics dynamics(3);
      const int start = rng.uniform_int(10, 40);
      const auto e = enumerate_trajectories({{0.0}, start}, 3, cost, dynamics);
      const double expected = orc::enumerate_log_partition(start, 3, 3, cost);
      worst = std::max(worst, std::abs(e.log_partition - expected) / std::abs(expected));
      double total = 0.0;
      for (double p : e.probabilities()) total += p;
      worst = std::max(worst, std::abs(total - 1.0));
    }
    out.push_back({"partition_function", worst <= 1e-12, format_error(worst)});
  }
  return out;
}

}  // namespace flowpath::cli
