#include "flowpath/config.hpp"

#include <set>

#include <json.hpp>

#include "flowpath/errors.hpp"
#include "flowpath/io.hpp"

namespace flowpath {

using ordered = nlohmann::ordered_json;
using nlohmann::json;

void RunConfig::validate() const {
  world.validate();
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string(name) + " must be positive");
  };
  auto positive_real = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be > 0");
  };
  positive(flow.units, "flow.units");
  positive(flow.hidden, "flow.hidden");
  positive(flow.pretrain_steps, "flow.pretrain_steps");
  positive(flow.batch_size, "flow.batch_size");
  if (!(flow.clamp >= 0.0) || !std::isfinite(flow.clamp)) {
    throw ValidationError("flow.clamp must be >= 0");
  }
  positive(transform.factors, "transform.factors");
  positive(transform.steps, "transform.steps");
  positive(transform.batch_size, "transform.batch_size");
  if (!(transform.lambda >= 0.0) || !std::isfinite(transform.lambda)) {
    throw ValidationError("transform.lambda must be >= 0");
  }
  positive(irl.loop.outer_iterations, "irl.outer_iterations");
  positive(irl.loop.cost_steps, "irl.cost_steps");
  positive(irl.loop.paths_per_iteration, "irl.paths_per_iteration");
  positive(irl.loop.sample_batch, "irl.sample_batch");
  positive(irl.loop.demo_batch, "irl.demo_batch");
  positive(irl.loop.policy_rollouts, "irl.policy_rollouts");
  positive(irl.loop.policy_steps, "irl.policy_steps");
  positive(irl.loop.workers, "irl.workers");
  positive(irl.cost_hidden, "irl.cost_hidden");
  positive(irl.policy_hidden, "irl.policy_hidden");
  positive_real(irl.cost_learning_rate, "irl.cost_learning_rate");
  positive_real(irl.policy_learning_rate, "irl.policy_learning_rate");
  positive_real(optimizer.learning_rate, "optimizer.learning_rate");
  positive_real(optimizer.epsilon, "optimizer.epsilon");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ValidationError("optimizer betas must lie in [0, 1)");
  }
  if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
}

FlowConfig RunConfig::flow_config() const {
  return {world.dim, flow.units, flow.hidden, flow.clamp};
}

AdamConfig RunConfig::cost_optimizer() const {
  AdamConfig c = optimizer;
  c.learning_rate = irl.cost_learning_rate;
  return c;
}

AdamConfig RunConfig::policy_optimizer() const {
  AdamConfig c = optimizer;
  c.learning_rate = irl.policy_learning_rate;
  return c;
}

std::string config_to_json(const RunConfig& c) {
  ordered j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["record_wall_time"] = c.record_wall_time;
  j["world"] = {{"dim", c.world.dim},
                {"age_min", c.world.age_min},
                {"age_max", c.world.age_max},
                {"noise", c.world.noise},
                {"horizon", c.world.horizon},
                {"num_actions", c.world.num_actions},
                {"train_subjects", c.world.train_subjects},
                {"heldout_subjects", c.world.heldout_subjects},
                {"album_size", c.world.album_size}};
  j["flow"] = {{"units", c.flow.units},
               {"hidden", c.flow.hidden},
               {"clamp", c.flow.clamp},
               {"pretrain_steps", c.flow.pretrain_steps},
               {"batch_size", c.flow.batch_size}};
  j["transform"] = {{"factors", c.transform.factors},
                    {"lambda", c.transform.lambda},
                    {"steps", c.transform.steps},
                    {"batch_size", c.transform.batch_size}};
  const auto& l = c.irl.loop;
  j["irl"] = {{"outer_iterations", l.outer_iterations},
              {"cost_steps", l.cost_steps},
              {"paths_per_iteration", l.paths_per_iteration},
              {"sample_batch", l.sample_batch},
              {"demo_batch", l.demo_batch},
              {"policy_rollouts", l.policy_rollouts},
              {"policy_steps", l.policy_steps},
              {"workers", l.workers},
              {"cost_hidden", c.irl.cost_hidden},
              {"policy_hidden", c.irl.policy_hidden},
              {"cost_learning_rate", c.irl.cost_learning_rate},
              {"policy_learning_rate", c.irl.policy_learning_rate}};
  j["optimizer"] = {{"learning_rate", c.optimizer.learning_rate},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"epsilon", c.optimizer.epsilon}};
  return j.dump(2) + "\n";
}

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ValidationError("expected a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ValidationError("expected a string");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ValidationError("expected a number");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ValidationError("expected a non-negative integer");
      } else {
        if (!v.is_number_integer()) throw ValidationError("expected an integer");
      }
      out = v.get<T>();
    } catch (const ValidationError& e) {
      throw ValidationError(where() + "." + key + ": " + e.what());
    }
  }

  Reader child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : empty, path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw ValidationError("unknown config key " + where() + "." + k);
    }
  }

 private:
  std::string where() const { return path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Reader root(j, "config");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  root.get("record_wall_time", c.record_wall_time);

  Reader w = root.child("world");
  w.get("dim", c.world.dim);
  w.get("age_min", c.world.age_min);
  w.get("age_max", c.world.age_max);
  w.get("noise", c.world.noise);
  w.get("horizon", c.world.horizon);
  w.get("num_actions", c.world.num_actions);
  w.get("train_subjects", c.world.train_subjects);
  w.get("heldout_subjects", c.world.heldout_subjects);
  w.get("album_size", c.world.album_size);
  w.finish();

  Reader f = root.child("flow");
  f.get("units", c.flow.units);
  f.get("hidden", c.flow.hidden);
  f.get("clamp", c.flow.clamp);
  f.get("pretrain_steps", c.flow.pretrain_steps);
  f.get("batch_size", c.flow.batch_size);
  f.finish();

  Reader t = root.child("transform");
  t.get("factors", c.transform.factors);
  t.get("lambda", c.transform.lambda);
  t.get("steps", c.transform.steps);
  t.get("batch_size", c.transform.batch_size);
  t.finish();

  Reader i = root.child("irl");
  auto& l = c.irl.loop;
  i.get("outer_iterations", l.outer_iterations);
  i.get("cost_steps", l.cost_steps);
  i.get("paths_per_iteration", l.paths_per_iteration);
  i.get("sample_batch", l.sample_batch);
  i.get("demo_batch", l.demo_batch);
  i.get("policy_rollouts", l.policy_rollouts);
  i.get("policy_steps", l.policy_steps);
  i.get("workers", l.workers);
  i.get("cost_hidden", c.irl.cost_hidden);
  i.get("policy_hidden", c.irl.policy_hidden);
  i.get("cost_learning_rate", c.irl.cost_learning_rate);
  i.get("policy_learning_rate", c.irl.policy_learning_rate);
  i.finish();

  Reader o = root.child("optimizer");
  o.get("learning_rate", c.optimizer.learning_rate);
  o.get("beta1", c.optimizer.beta1);
  o.get("beta2", c.optimizer.beta2);
  o.get("epsilon", c.optimizer.epsilon);
  o.finish();
  root.finish();

  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) { return config_from_json(read_file(path)); }

void save_config(const std::string& path, const RunConfig& config) {
  write_file_atomic(path, config_to_json(config));
}

}  // namespace flowpath
