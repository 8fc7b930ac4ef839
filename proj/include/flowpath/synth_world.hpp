#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "flowpath/age_transform.hpp"
#include "flowpath/irl.hpp"
#include "flowpath/mdp.hpp"

namespace flowpath {

struct WorldConfig {
  std::size_t dim = 16;
  int age_min = 10;
  int age_max = 60;
  double noise = 0.02;
  int horizon = 5;  // demo states per subject, at most
  int num_actions = kNumActions;
  std::size_t train_subjects = 64;
  std::size_t heldout_subjects = 16;
  std::size_t album_size = 8;  // extra unordered photos per training subject

  void validate() const;
  AgeRange range() const { return {age_min, age_max}; }
  friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

inline constexpr int kNumArchetypeClasses = 3;
inline constexpr std::array<int, kNumArchetypeClasses> kPreferredSteps{4, 8, 12};

/// traits = [rate, offset_0 .. offset_{D-1}, phase_0 .. phase_{D-1}]
struct SubjectArchetype {
  std::vector<double> traits;
  int archetype_class = 0;
  int preferred_step = kPreferredSteps[0];
  std::uint64_t seed = 0;

  double rate() const { return traits.front(); }
  friend bool operator==(const SubjectArchetype&, const SubjectArchetype&) = default;
};

SubjectArchetype make_archetype(const WorldConfig& config, std::uint64_t seed, int archetype_class);

/// Noise-free observation of a subject at an age.
Observation observe(const SubjectArchetype& subject, int age, const WorldConfig& config);

/// 1 + 0.6 |a - k*|; the same at every state.
double ground_truth_cost(const State& s, const AgeAction& a, const SubjectArchetype& subject);

class GroundTruthCost final : public StepCost {
 public:
  explicit GroundTruthCost(SubjectArchetype subject) : subject_(std::move(subject)) {}
  double cost(const State& s, const AgeAction& a) const override {
    return ground_truth_cost(s, a, subject_);
  }

 private:
  SubjectArchetype subject_;
};

/// True world transition: the subject observed, noise-free, at the new age.
class WorldDynamics final : public Dynamics {
 public:
  WorldDynamics(SubjectArchetype subject, WorldConfig config)
      : subject_(std::move(subject)), config_(std::move(config)) {}
  int num_actions() const override { return config_.num_actions; }
  State step(const State& s, const AgeAction& a) const override;

 private:
  SubjectArchetype subject_;
  WorldConfig config_;
};

/// Exhaustive search over action sequences of at most `horizon_cap` steps
/// that stop as soon as the age reaches `target_age`. Returns the cheapest;
/// among ties (1e-9) the lexicographically first action sequence wins.
AgingTrajectory brute_force_optimal_path(const State& start, int target_age, const StepCost& cost,
                                         int horizon_cap, const Dynamics& dynamics,
                                         std::size_t budget = kEnumerationBudget);

struct Subject {
  std::string id;
  SubjectArchetype archetype;
  AgingTrajectory demo;
};

Subject generate_subject(const WorldConfig& config, std::uint64_t seed);
Subject generate_subject(const WorldConfig& config, std::uint64_t seed, int archetype_class);

/// One line of a sequence file.
struct SequenceRecord {
  std::string subject_id;
  std::vector<int> ages;
  std::vector<Observation> observations;
  friend bool operator==(const SequenceRecord&, const SequenceRecord&) = default;
};

SequenceRecord to_record(const std::string& subject_id, const AgingTrajectory& traj);
/// Ages must be non-decreasing with gaps of at most 15.
AgingTrajectory to_trajectory(const SequenceRecord& record, int num_actions = kNumActions);

struct WorldDataset {
  std::vector<Subject> train;
  std::vector<Subject> heldout;
  std::vector<SequenceRecord> albums;  // one per training subject, sorted by age
};

WorldDataset generate_world(const WorldConfig& config, std::uint64_t seed);

/// All ordered pairs (i < j) inside each record whose age gap is at most
/// max_gap.
std::vector<PairSample> album_pairs(const std::vector<SequenceRecord>& records,
                                    int max_gap = kNumActions - 1);

/// Every observation in the records, in order.
std::vector<Observation> album_observations(const std::vector<SequenceRecord>& records);

}  // namespace flowpath
