#include "flowpath/pipeline.hpp"

#include <array>
#include <filesystem>

#include <json.hpp>

#include "flowpath/errors.hpp"
#include "flowpath/io.hpp"

namespace flowpath {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kModelInitStream = 0x10;
constexpr std::uint64_t kIrlStream = 0x20;
constexpr std::uint64_t kPretrainStream = 0x30;
constexpr std::uint64_t kPairStream = 0x40;

const std::array<std::pair<Stage, const char*>, 4> kStageNames{{
    {Stage::initialized, "initialized"},
    {Stage::pretrained, "pretrained"},
    {Stage::pairs_trained, "pairs_trained"},
    {Stage::irl, "irl"},
}};

}  // namespace

std::string to_string(Stage stage) {
  for (const auto& [s, name] : kStageNames) {
    if (s == stage) return name;
  }
  return "unknown";
}

Stage stage_from_string(const std::string& name) {
  for (const auto& [s, n] : kStageNames) {
    if (name == n) return s;
  }
  throw CheckpointError("unknown training stage '" + name + "'");
}

TrainingState init_training(const RunConfig& config) {
  config.validate();
  Rng init(derive_seed(config.seed, kModelInitStream));
  TrainingState s{config, Stage::initialized,
                  AgingModel::create(config.flow_config(), config.transform.factors, init), {},
                  IrlState::create(config.world.dim, config.world.num_actions,
                                   config.world.range(), config.irl.cost_hidden,
                                   config.cost_optimizer(), config.policy_optimizer(),
                                   derive_seed(config.seed, kIrlStream))};
  if (config.irl.policy_hidden != config.irl.cost_hidden) {
    Rng policy_init(derive_seed(config.seed, kIrlStream + 1));
    s.irl.policy = PolicyNet::create(config.world.dim, config.world.num_actions,
                                     config.world.range(), config.irl.policy_hidden, policy_init);
    s.irl.policy_optimizer =
        OptimizerState::for_params(s.irl.policy.parameters(), config.policy_optimizer());
  }
  s.model_optimizer = OptimizerState::for_params(s.model.parameters(), config.optimizer);
  return s;
}

namespace {

ordered_json metrics_json(const IterationMetrics& m) {
  return {{"iteration", m.iteration},
          {"demo_energy", m.demo_energy},
          {"sample_energy", m.sample_energy},
          {"loglik_estimate", m.loglik_estimate},
          {"policy_entropy", m.policy_entropy},
          {"wall_seconds", m.wall_seconds},
          {"policy_collapsed", m.policy_collapsed}};
}

IterationMetrics metrics_from_json(const json& j) {
  IterationMetrics m;
  m.iteration = j.at("iteration").get<std::size_t>();
  m.demo_energy = j.at("demo_energy").get<double>();
  m.sample_energy = j.at("sample_energy").get<double>();
  m.loglik_estimate = j.at("loglik_estimate").get<double>();
  m.policy_entropy = j.at("policy_entropy").get<double>();
  m.wall_seconds = j.at("wall_seconds").get<double>();
  m.policy_collapsed = j.at("policy_collapsed").get<bool>();
  return m;
}

}  // namespace

Checkpoint to_checkpoint(TrainingState& state) {
  Checkpoint ckpt;
  ckpt.set("config", config_to_json(state.config));
  ordered_json progress;
  progress["stage"] = to_string(state.stage);
  progress["irl_iteration"] = state.irl.iteration;
  progress["metrics"] = ordered_json::array();
  for (const auto& m : state.irl.metrics) progress["metrics"].push_back(metrics_json(m));
  ckpt.set("progress", progress.dump());

  std::vector<NamedParam> t1, t2, t3;
  state.model.f1.append_params("theta1", t1);
  state.model.f2.append_params("theta2", t2);
  state.model.g.append_params("theta3", t3);
  ckpt.set("theta1", encode_tensors(t1));
  ckpt.set("theta2", encode_tensors(t2));
  ckpt.set("theta3", encode_tensors(t3));
  const auto gamma = state.irl.cost.parameters();
  const auto policy = state.irl.policy.parameters();
  ckpt.set("gamma", encode_tensors(gamma));
  ckpt.set("policy", encode_tensors(policy));
  ckpt.set("optimizer.model", encode_optimizer(state.model_optimizer, state.model.parameters()));
  ckpt.set("optimizer.gamma", encode_optimizer(state.irl.cost_optimizer, gamma));
  ckpt.set("optimizer.policy", encode_optimizer(state.irl.policy_optimizer, policy));
  ckpt.set("rng", state.irl.rng.serialize());
  return ckpt;
}

TrainingState from_checkpoint(const Checkpoint& ckpt) {
  RunConfig config;
  try {
    config = config_from_json(ckpt.section("config"));
  } catch (const ValidationError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  TrainingState s = init_training(config);
  try {
    const auto progress = json::parse(ckpt.section("progress"));
    s.stage = stage_from_string(progress.at("stage").get<std::string>());
    s.irl.iteration = progress.at("irl_iteration").get<std::size_t>();
    s.irl.metrics.clear();
    for (const auto& m : progress.at("metrics")) s.irl.metrics.push_back(metrics_from_json(m));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint progress section: ") + e.what());
  }

  std::vector<NamedParam> t1, t2, t3;
  s.model.f1.append_params("theta1", t1);
  s.model.f2.append_params("theta2", t2);
  s.model.g.append_params("theta3", t3);
  load_tensors_into(ckpt.section("theta1"), t1, "theta1");
  load_tensors_into(ckpt.section("theta2"), t2, "theta2");
  load_tensors_into(ckpt.section("theta3"), t3, "theta3");
  const auto gamma = s.irl.cost.parameters();
  const auto policy = s.irl.policy.parameters();
  load_tensors_into(ckpt.section("gamma"), gamma, "gamma");
  load_tensors_into(ckpt.section("policy"), policy, "policy");
  s.model_optimizer =
      decode_optimizer(ckpt.section("optimizer.model"), s.model.parameters(), "optimizer.model");
  s.irl.cost_optimizer = decode_optimizer(ckpt.section("optimizer.gamma"), gamma, "optimizer.gamma");
  s.irl.policy_optimizer =
      decode_optimizer(ckpt.section("optimizer.policy"), policy, "optimizer.policy");
  s.irl.rng = Rng::deserialize(ckpt.section("rng"));
  return s;
}

namespace {

template <typename T>
std::vector<T> draw_batch(const std::vector<T>& pool, std::size_t size, Rng& rng) {
  std::vector<T> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    out.push_back(pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))]);
  }
  return out;
}

void require_stage(const TrainingState& state, Stage expected, const char* what) {
  if (state.stage != expected) {
    throw ValidationError(std::string(what) + " needs a checkpoint at stage '" +
                          to_string(expected) + "', found '" + to_string(state.stage) + "'");
  }
}

}  // namespace

void pretrain_flows(TrainingState& state, const std::vector<Observation>& data) {
  require_stage(state, Stage::initialized, "pretrain-flow");
  if (data.empty()) throw InsufficientDataError("no observations to pretrain on");
  for (const auto& x : data) {
    if (x.size() != state.config.world.dim) {
      throw ShapeError("observation length " + std::to_string(x.size()) + ", expected " +
                       std::to_string(state.config.world.dim));
    }
  }
  Rng rng(derive_seed(state.config.seed, kPretrainStream));
  for (BijectionStack* flow : {&state.model.f1, &state.model.f2}) {
    const auto params = flow->parameters("flow");
    auto opt = OptimizerState::for_params(params, state.config.optimizer);
    for (std::size_t step = 0; step < state.config.flow.pretrain_steps; ++step) {
      const auto batch = draw_batch(data, state.config.flow.batch_size, rng);
      const auto lg = flow_nll(*flow, batch);
      optimizer_step(params, lg.grads, opt);
    }
  }
  state.stage = Stage::pretrained;
}

void train_pairs(TrainingState& state, const std::vector<PairSample>& pairs) {
  require_stage(state, Stage::pretrained, "train-pairs");
  if (pairs.size() < 2) throw InsufficientDataError("pair training needs at least two pairs");
  Rng rng(derive_seed(state.config.seed, kPairStream));
  const std::size_t batch_size = std::max<std::size_t>(2, state.config.transform.batch_size);
  for (std::size_t step = 0; step < state.config.transform.steps; ++step) {
    const auto batch = draw_batch(pairs, batch_size, rng);
    train_pair_step(state.model, batch, state.model_optimizer, state.config.transform.lambda);
  }
  state.stage = Stage::pairs_trained;
}

std::vector<AgingTrajectory> synthesized_demonstrations(const AgingModel& model,
                                                        const std::vector<AgingTrajectory>& demos) {
  std::vector<AgingTrajectory> out;
  out.reserve(demos.size());
  const SynthesisDynamics dynamics(model);
  for (const auto& d : demos) {
    d.validate();
    AgingTrajectory t{{d.start()}, {}};
    for (const auto& a : d.actions) {
      t.states.push_back(dynamics.step(t.last(), a));
      t.actions.push_back(a);
    }
    out.push_back(std::move(t));
  }
  return out;
}

void train_irl(TrainingState& state, const std::vector<AgingTrajectory>& demos,
               const IrlRunOptions& options) {
  if (state.stage != Stage::pairs_trained && state.stage != Stage::irl) {
    throw ValidationError("train-irl needs a checkpoint at stage 'pairs_trained' or 'irl', found '" +
                          to_string(state.stage) + "'");
  }
  const auto irl_demos = synthesized_demonstrations(state.model, demos);
  const SynthesisDynamics dynamics(state.model, state.config.world.num_actions);
  state.stage = Stage::irl;
  LearnOptions lo;
  lo.stop_after = options.stop_after;
  lo.record_wall_time = state.config.record_wall_time;
  if (options.on_iteration) lo.on_iteration = [&](const IrlState&) { options.on_iteration(state); };
  learn_sdap(irl_demos, dynamics, state.irl, state.config.irl.loop, lo);
}

std::string metrics_csv(const std::vector<IterationMetrics>& metrics) {
  std::string out = "iteration,demo_energy,sample_energy,loglik_estimate,policy_entropy,wall_seconds\n";
  for (const auto& m : metrics) {
    out += std::to_string(m.iteration) + "," + format_real(m.demo_energy) + "," +
           format_real(m.sample_energy) + "," + format_real(m.loglik_estimate) + "," +
           format_real(m.policy_entropy) + "," + format_real(m.wall_seconds) + "\n";
  }
  return out;
}

std::string metrics_summary_json(const TrainingState& state) {
  ordered_json j;
  j["seed"] = state.config.seed;
  j["stage"] = to_string(state.stage);
  j["iterations_completed"] = state.irl.iteration;
  j["iterations_planned"] = state.config.irl.loop.outer_iterations;
  std::size_t collapsed = 0;
  for (const auto& m : state.irl.metrics) collapsed += m.policy_collapsed ? 1 : 0;
  j["collapsed_iterations"] = collapsed;
  j["final"] = state.irl.metrics.empty() ? ordered_json(nullptr)
                                          : metrics_json(state.irl.metrics.back());
  return j.dump(2) + "\n";
}

void write_run_outputs(TrainingState& state) {
  const std::filesystem::path dir(state.config.output_dir);
  write_file_atomic((dir / "metrics.csv").string(), metrics_csv(state.irl.metrics));
  write_file_atomic((dir / "summary.json").string(), metrics_summary_json(state));
  save_checkpoint((dir / "checkpoint.ckpt").string(), to_checkpoint(state));
}

TrainingState run_pipeline(const RunConfig& config) {
  const auto world = generate_world(config.world, config.seed);
  std::vector<SequenceRecord> records;
  std::vector<AgingTrajectory> demos;
  for (const auto& s : world.train) {
    records.push_back(to_record(s.id, s.demo));
    demos.push_back(s.demo);
  }
  records.insert(records.end(), world.albums.begin(), world.albums.end());

  TrainingState state = init_training(config);
  pretrain_flows(state, album_observations(records));
  train_pairs(state, album_pairs(records));
  IrlRunOptions options;
  options.on_iteration = [](TrainingState& s) { write_run_outputs(s); };
  train_irl(state, demos, options);
  write_run_outputs(state);
  return state;
}

}  // namespace flowpath
