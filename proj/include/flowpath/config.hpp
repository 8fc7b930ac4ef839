#pragma once

#include <cstdint>
#include <string>

#include "flowpath/irl.hpp"
#include "flowpath/optimizer.hpp"
#include "flowpath/synth_world.hpp"

namespace flowpath {

struct FlowSettings {
  std::size_t units = 10;
  std::size_t hidden = 32;
  double clamp = 2.0;
  std::size_t pretrain_steps = 300;
  std::size_t batch_size = 64;
  friend bool operator==(const FlowSettings&, const FlowSettings&) = default;
};

struct TransformSettings {
  std::size_t factors = 32;
  double lambda = 0.1;
  std::size_t steps = 600;
  std::size_t batch_size = 64;
  friend bool operator==(const TransformSettings&, const TransformSettings&) = default;
};

struct IrlSettings {
  IrlConfig loop;
  std::size_t cost_hidden = 32;
  std::size_t policy_hidden = 32;
  double cost_learning_rate = 1e-2;
  double policy_learning_rate = 1e-2;
  friend bool operator==(const IrlSettings&, const IrlSettings&) = default;
};

struct RunConfig {
  WorldConfig world;
  FlowSettings flow;
  TransformSettings transform;
  IrlSettings irl;
  AdamConfig optimizer;  // aging model (flows and transform)
  std::uint64_t seed = 7;
  std::string output_dir = "run";
  bool record_wall_time = false;

  void validate() const;
  FlowConfig flow_config() const;
  AdamConfig cost_optimizer() const;
  AdamConfig policy_optimizer() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Pretty-printed JSON with a fixed key order.
std::string config_to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& config);

}  // namespace flowpath
