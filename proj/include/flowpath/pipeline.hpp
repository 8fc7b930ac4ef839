#pragma once

#include <functional>
#include <string>
#include <vector>

#include "flowpath/age_transform.hpp"
#include "flowpath/checkpoint.hpp"
#include "flowpath/config.hpp"
#include "flowpath/irl.hpp"
#include "flowpath/synth_world.hpp"

namespace flowpath {

/// Training progress, in order.
enum class Stage { initialized, pretrained, pairs_trained, irl };
std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);

struct TrainingState {
  RunConfig config;
  Stage stage = Stage::initialized;
  AgingModel model;
  OptimizerState model_optimizer;
  IrlState irl;
};

TrainingState init_training(const RunConfig& config);

Checkpoint to_checkpoint(TrainingState& state);
TrainingState from_checkpoint(const Checkpoint& ckpt);

/// Maximum-likelihood fit of both bijection stacks to unpaired observations.
void pretrain_flows(TrainingState& state, const std::vector<Observation>& data);
/// Minibatch training of the full aging model on same-subject pairs.
void train_pairs(TrainingState& state, const std::vector<PairSample>& pairs);

/// Demonstrations re-expressed under the synthesis dynamics: the real start
/// state followed by synthesized states along the demonstrated actions.
std::vector<AgingTrajectory> synthesized_demonstrations(const AgingModel& model,
                                                        const std::vector<AgingTrajectory>& demos);

struct IrlRunOptions {
  std::size_t stop_after = std::numeric_limits<std::size_t>::max();
  std::function<void(TrainingState&)> on_iteration;
};

void train_irl(TrainingState& state, const std::vector<AgingTrajectory>& demos,
               const IrlRunOptions& options = {});

std::string metrics_csv(const std::vector<IterationMetrics>& metrics);
std::string metrics_summary_json(const TrainingState& state);
/// metrics.csv, summary.json and checkpoint.ckpt under config.output_dir.
void write_run_outputs(TrainingState& state);

/// gen-data, pretrain-flow, train-pairs and train-irl back to back, writing
/// run outputs after every outer iteration.
TrainingState run_pipeline(const RunConfig& config);

}  // namespace flowpath
