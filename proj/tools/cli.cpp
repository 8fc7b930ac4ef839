#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowpath/config.hpp"
#include "flowpath/diagnostics.hpp"
#include "flowpath/errors.hpp"
#include "flowpath/evaluation.hpp"
#include "flowpath/io.hpp"
#include "flowpath/pipeline.hpp"
#include "flowpath/planning.hpp"

namespace flowpath::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string metrics_dir;
  std::string observation;
  std::string inputs;
  std::size_t iterations = 0;
  int age = 0;
  int target = 0;
};

std::uint64_t resolve_seed(const Options& o, std::uint64_t fallback) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("FLOWPATH_SEED")) {
    std::uint64_t v = 0;
    std::istringstream ss(env);
    if (!(ss >> v) || !ss.eof()) throw ValidationError(std::string("FLOWPATH_SEED is not an integer: ") + env);
    return v;
  }
  return fallback;
}

RunConfig resolve_config(const Options& o, const std::string& fallback_path) {
  RunConfig config;
  if (!o.config.empty()) {
    config = load_config(o.config);
  } else if (!fallback_path.empty() && fs::exists(fallback_path)) {
    config = load_config(fallback_path);
  }
  config.seed = resolve_seed(o, config.seed);
  config.validate();
  return config;
}

TrainingState load_state(const Options& o) {
  auto state = from_checkpoint(load_checkpoint(o.checkpoint));
  if (o.seed && *o.seed != state.config.seed) {
    throw ValidationError("the checkpoint was trained with seed " +
                          std::to_string(state.config.seed) + "; --seed cannot change it");
  }
  return state;
}

std::vector<SequenceRecord> training_records(const std::string& dir) {
  auto records = load_sequences((fs::path(dir) / "train.jsonl").string());
  const auto albums = load_sequences((fs::path(dir) / "album.jsonl").string());
  records.insert(records.end(), albums.begin(), albums.end());
  return records;
}

Observation parse_observation(const std::string& text, std::size_t dim) {
  if (text.empty()) return Observation(dim, 0.0);
  Observation x;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      x.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("observation entry '" + item + "' is not a number");
    }
  }
  if (x.size() != dim) {
    throw ShapeError("observation has " + std::to_string(x.size()) + " entries, expected " +
                     std::to_string(dim));
  }
  return x;
}

State start_state(const Options& o, const TrainingState& state,
                  std::vector<AgeAction>* bridge = nullptr) {
  if (!o.inputs.empty()) {
    const auto records = load_sequences(o.inputs);
    if (records.empty()) throw InsufficientDataError(o.inputs + " holds no inputs");
    std::vector<State> inputs;
    for (std::size_t i = 0; i < records[0].ages.size(); ++i) {
      if (!state.config.world.range().contains(records[0].ages[i])) {
        throw DomainError("input age " + std::to_string(records[0].ages[i]) + " is out of range");
      }
      inputs.push_back({records[0].observations[i], records[0].ages[i]});
    }
    auto init = multi_input_init(inputs, state.model);
    if (bridge) *bridge = init.bridge_actions;
    return init.state;
  }
  if (!state.config.world.range().contains(o.age)) {
    throw DomainError("start age " + std::to_string(o.age) + " is outside the world age range");
  }
  return {parse_observation(o.observation, state.config.world.dim), o.age};
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  const auto config = resolve_config(o, "");
  const auto world = generate_world(config.world, config.seed);
  std::vector<SequenceRecord> train, heldout;
  for (const auto& s : world.train) train.push_back(to_record(s.id, s.demo));
  for (const auto& s : world.heldout) heldout.push_back(to_record(s.id, s.demo));
  const fs::path dir(o.out);
  save_sequences((dir / "train.jsonl").string(), train);
  save_sequences((dir / "heldout.jsonl").string(), heldout);
  save_sequences((dir / "album.jsonl").string(), world.albums);
  save_config((dir / "config.json").string(), config);
  out << "wrote " << train.size() << " training, " << heldout.size() << " held-out and "
      << world.albums.size() << " album sequences to " << dir.string() << "\n";
  return 0;
}

int cmd_pretrain(const Options& o, std::ostream& out) {
  const auto config = resolve_config(o, (fs::path(o.data) / "config.json").string());
  auto state = init_training(config);
  pretrain_flows(state, album_observations(training_records(o.data)));
  save_checkpoint(o.out, to_checkpoint(state));
  out << "pretrained flows, checkpoint " << o.out << "\n";
  return 0;
}

int cmd_train_pairs(const Options& o, std::ostream& out) {
  auto state = load_state(o);
  const auto pairs = album_pairs(training_records(o.data));
  train_pairs(state, pairs);
  save_checkpoint(o.out, to_checkpoint(state));
  out << "trained on " << pairs.size() << " pairs, checkpoint " << o.out << "\n";
  return 0;
}

int cmd_train_irl(const Options& o, std::ostream& out) {
  auto state = load_state(o);
  std::vector<AgingTrajectory> demos;
  for (const auto& r : load_sequences((fs::path(o.data) / "train.jsonl").string())) {
    demos.push_back(to_trajectory(r, state.config.world.num_actions));
  }
  const std::string metrics_dir =
      o.metrics_dir.empty() ? fs::path(o.out).parent_path().string() : o.metrics_dir;
  auto persist = [&](TrainingState& s) {
    const fs::path dir = metrics_dir.empty() ? fs::path(".") : fs::path(metrics_dir);
    write_file_atomic((dir / "metrics.csv").string(), metrics_csv(s.irl.metrics));
    write_file_atomic((dir / "summary.json").string(), metrics_summary_json(s));
    save_checkpoint(o.out, to_checkpoint(s));
  };
  IrlRunOptions options;
  if (o.iterations > 0) options.stop_after = o.iterations;
  options.on_iteration = [&](TrainingState& s) {
    persist(s);
    const auto& m = s.irl.metrics.back();
    out << "iteration " << m.iteration << " demo_energy " << format_real(m.demo_energy)
        << " sample_energy " << format_real(m.sample_energy) << " entropy "
        << format_real(m.policy_entropy) << (m.policy_collapsed ? " (policy collapsed)" : "")
        << "\n";
  };
  try {
    train_irl(state, demos, options);
  } catch (const IrlIterationError&) {
    persist(state);
    throw;
  }
  persist(state);
  return 0;
}

std::string actions_json(const AgingTrajectory& traj) {
  nlohmann::ordered_json j;
  std::vector<int> ages, actions;
  for (const auto& s : traj.states) ages.push_back(s.age);
  for (const auto& a : traj.actions) actions.push_back(a.index());
  j["ages"] = ages;
  j["actions"] = actions;
  return j.dump();
}

int cmd_plan(const Options& o, std::ostream& out, bool synthesize) {
  auto state = load_state(o);
  std::vector<AgeAction> bridge;
  const State start = start_state(o, state, &bridge);
  const SynthesisDynamics dynamics(state.model, state.config.world.num_actions);
  const auto traj = plan_trajectory(state.irl.policy, dynamics, start, o.target);
  if (!synthesize) {
    out << actions_json(traj) << "\n";
    return 0;
  }
  std::vector<SequenceRecord> records{to_record("synthesized", traj)};
  const std::string text = sequences_to_jsonl(records);
  if (!o.out.empty()) write_file_atomic(o.out, text);
  out << text;
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  auto state = load_state(o);
  const auto text = evaluate(state).to_json();
  if (!o.out.empty()) write_file_atomic(o.out, text);
  out << text;
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const auto seed = resolve_seed(o, 7);
  bool ok = true;
  for (const auto& c : run_gradient_checks(seed)) {
    ok = ok && c.report.passed;
    out << (c.report.passed ? "PASS " : "FAIL ") << c.name << " checked " << c.report.checked
        << " max_rel " << c.report.max_rel_error << " max_abs " << c.report.max_abs_error;
    if (!c.report.passed) out << " worst " << c.report.worst_param << "[" << c.report.worst_index << "]";
    out << "\n";
  }
  return ok ? 0 : 2;
}

int cmd_oracle_check(const Options& o, std::ostream& out) {
  const auto seed = resolve_seed(o, 7);
  bool ok = true;
  for (const auto& c : run_oracle_checks(seed)) {
    ok = ok && c.passed;
    out << (c.passed ? "PASS " : "FAIL ") << c.name << " " << c.detail << "\n";
  }
  return ok ? 0 : 2;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subject-dependent age progression on a synthetic longitudinal world", "flowpath"};
  app.require_subcommand(1, 1);
  Options o;

  auto seed_opt = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "random seed (falls back to FLOWPATH_SEED)");
  };
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  seed_opt(gen);
  gen->add_option("--config", o.config, "run config JSON");
  gen->add_option("--out", o.out, "output directory")->required();

  auto* pre = app.add_subcommand("pretrain-flow", "fit both bijection stacks to observations");
  seed_opt(pre);
  pre->add_option("--config", o.config, "run config JSON (default: <data>/config.json)");
  pre->add_option("--data", o.data, "dataset directory")->required();
  pre->add_option("--out", o.out, "checkpoint to write")->required();

  auto* pairs = app.add_subcommand("train-pairs", "train the aging model on same-subject pairs");
  seed_opt(pairs);
  pairs->add_option("--checkpoint", o.checkpoint, "input checkpoint")->required();
  pairs->add_option("--data", o.data, "dataset directory")->required();
  pairs->add_option("--out", o.out, "checkpoint to write")->required();

  auto* irl = app.add_subcommand("train-irl", "learn the cost and aging policy (resumable)");
  seed_opt(irl);
  irl->add_option("--checkpoint", o.checkpoint, "input checkpoint")->required();
  irl->add_option("--data", o.data, "dataset directory")->required();
  irl->add_option("--out", o.out, "checkpoint to write after every iteration")->required();
  irl->add_option("--metrics-dir", o.metrics_dir, "where metrics.csv and summary.json go");
  irl->add_option("--iterations", o.iterations, "stop after this many outer iterations");

  auto* plan = app.add_subcommand("plan", "print the greedy aging path");
  auto* synth = app.add_subcommand("synthesize", "synthesize states along the planned path");
  for (auto* c : {plan, synth}) {
    seed_opt(c);
    c->add_option("--checkpoint", o.checkpoint, "trained checkpoint")->required();
    c->add_option("--age", o.age, "start age");
    c->add_option("--target", o.target, "target age")->required();
    c->add_option("--observation", o.observation, "comma-separated start observation (default zeros)");
    c->add_option("--inputs", o.inputs, "sequence file whose first record lists several inputs");
  }
  synth->add_option("--out", o.out, "sequence file to write");

  auto* eval = app.add_subcommand("evaluate", "planning accuracy and age fidelity");
  seed_opt(eval);
  eval->add_option("--checkpoint", o.checkpoint, "trained checkpoint")->required();
  eval->add_option("--out", o.out, "report file");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  seed_opt(grad);
  auto* oracle = app.add_subcommand("oracle-check", "compare against reference oracles");
  seed_opt(oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o, out);
    if (pre->parsed()) return cmd_pretrain(o, out);
    if (pairs->parsed()) return cmd_train_pairs(o, out);
    if (irl->parsed()) return cmd_train_irl(o, out);
    if (plan->parsed()) return cmd_plan(o, out, false);
    if (synth->parsed()) return cmd_plan(o, out, true);
    if (eval->parsed()) return cmd_evaluate(o, out);
    if (grad->parsed()) return cmd_gradcheck(o, out);
    if (oracle->parsed()) return cmd_oracle_check(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"flowpath"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace flowpath::cli
