#include "flowpath/synth_world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "flowpath/errors.hpp"
#include "flowpath/rng.hpp"

namespace flowpath {

namespace {

constexpr std::uint64_t kLayoutSeed = 0x5eedf10a7a9e11ULL;
constexpr std::array<double, kNumArchetypeClasses> kClassFrequency{0.5, 1.0, 1.5};

struct ClassLayout {
  std::vector<double> center;
  std::vector<double> slope;
  std::vector<double> amplitude;
};

ClassLayout make_layout(std::size_t dim, int archetype_class) {
  ClassLayout out;
  Rng shared(derive_seed(kLayoutSeed, 100));
  for (std::size_t d = 0; d < dim; ++d) {
    const double sign = shared.uniform() < 0.5 ? -1.0 : 1.0;
    out.slope.push_back(sign * shared.uniform(0.4, 0.8));
    out.amplitude.push_back(shared.uniform(0.1, 0.3));
  }
  Rng own(derive_seed(kLayoutSeed, static_cast<std::uint64_t>(archetype_class)));
  for (std::size_t d = 0; d < dim; ++d) out.center.push_back(1.2 * own.normal());
  return out;
}

const ClassLayout& class_layout(std::size_t dim, int archetype_class) {
  thread_local std::map<std::pair<std::size_t, int>, ClassLayout> cache;
  const auto key = std::make_pair(dim, archetype_class);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, make_layout(dim, archetype_class)).first;
  return it->second;
}

void check_class(int archetype_class) {
  if (archetype_class < 0 || archetype_class >= kNumArchetypeClasses) {
    throw DomainError("archetype class " + std::to_string(archetype_class) + " out of range");
  }
}

}  // namespace

void WorldConfig::validate() const {
  if (dim < 2) throw ValidationError("world dim must be at least 2");
  if (horizon < 2) throw ValidationError("world horizon must be at least 2");
  if (age_max <= age_min) throw ValidationError("world age range is empty");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ValidationError("world noise must be >= 0");
  if (num_actions != kNumActions) {
    throw ValidationError("world action count must be " + std::to_string(kNumActions));
  }
  if (train_subjects < 1 || heldout_subjects < 1) {
    throw ValidationError("world needs training and held-out subjects");
  }
  if (age_max - age_min < kPreferredSteps.back()) {
    throw ValidationError("world age range is shorter than the largest preferred step");
  }
}

SubjectArchetype make_archetype(const WorldConfig& config, std::uint64_t seed,
                                int archetype_class) {
  check_class(archetype_class);
  Rng rng(derive_seed(seed, 0xa7c));
  SubjectArchetype s;
  s.seed = seed;
  s.archetype_class = archetype_class;
  s.preferred_step = kPreferredSteps[static_cast<std::size_t>(archetype_class)];
  s.traits.push_back(rng.uniform(0.7, 1.3));
  for (std::size_t d = 0; d < config.dim; ++d) s.traits.push_back(rng.normal(0.0, 0.2));
  for (std::size_t d = 0; d < config.dim; ++d) {
    s.traits.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  return s;
}

Observation observe(const SubjectArchetype& subject, int age, const WorldConfig& config) {
  check_class(subject.archetype_class);
  const std::size_t dim = config.dim;
  if (subject.traits.size() != 1 + 2 * dim) {
    throw ShapeError("archetype trait vector does not match world dim " + std::to_string(dim));
  }
  const auto& layout = class_layout(dim, subject.archetype_class);
  const double u = config.range().normalize(age);
  const double freq = kClassFrequency[static_cast<std::size_t>(subject.archetype_class)];
  Observation x(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    const double offset = subject.traits[1 + d];
    const double phase = subject.traits[1 + dim + d];
    const double drift =
        layout.slope[d] * u + layout.amplitude[d] * std::sin(std::numbers::pi * freq * u + phase);
    x[d] = layout.center[d] + offset + subject.rate() * drift;
  }
  return x;
}

double ground_truth_cost(const State&, const AgeAction& a, const SubjectArchetype& subject) {
  return 1.0 + 0.6 * std::abs(a.index() - subject.preferred_step);
}

State WorldDynamics::step(const State& s, const AgeAction& a) const {
  const int age = s.age + a.index();
  return {observe(subject_, age, config_), age};
}

namespace {

struct SearchState {
  const StepCost* cost;
  const Dynamics* dynamics;
  int target;
  int cap;
  std::size_t budget;
  std::size_t visited = 0;
  AgingTrajectory current;
  double current_cost = 0.0;
  AgingTrajectory best;
  double best_cost = std::numeric_limits<double>::infinity();
};

void search(SearchState& st) {
  if (st.current.last().age >= st.target) {
    if (st.current_cost < st.best_cost - 1e-9) {
      st.best = st.current;
      st.best_cost = st.current_cost;
    }
    return;
  }
  if (static_cast<int>(st.current.num_steps()) >= st.cap) return;
  const State here = st.current.last();
  for (int k = 0; k < st.dynamics->num_actions(); ++k) {
    if (++st.visited > st.budget) {
      throw BudgetError("brute-force search exceeded " + std::to_string(st.budget) + " nodes");
    }
    const AgeAction a(k, st.dynamics->num_actions());
    const double c = st.cost->cost(here, a);
    st.current.actions.push_back(a);
    st.current.states.push_back(st.dynamics->step(here, a));
    st.current_cost += c;
    search(st);
    st.current_cost -= c;
    st.current.actions.pop_back();
    st.current.states.pop_back();
  }
}

}  // namespace

AgingTrajectory brute_force_optimal_path(const State& start, int target_age, const StepCost& cost,
                                         int horizon_cap, const Dynamics& dynamics,
                                         std::size_t budget) {
  if (target_age < start.age) throw DomainError("target age is below the start age");
  if (horizon_cap < 0) throw DomainError("horizon cap must be non-negative");
  const long long reach = static_cast<long long>(dynamics.num_actions() - 1) * horizon_cap;
  if (target_age - start.age > reach) {
    throw DomainError("target age " + std::to_string(target_age) + " is unreachable from " +
                      std::to_string(start.age) + " within " + std::to_string(horizon_cap) +
                      " steps");
  }
  SearchState st;
  st.cost = &cost;
  st.dynamics = &dynamics;
  st.target = target_age;
  st.cap = horizon_cap;
  st.budget = budget;
  st.current.states.push_back(start);
  search(st);
  return st.best;
}

Subject generate_subject(const WorldConfig& config, std::uint64_t seed) {
  Rng pick(derive_seed(seed, 0xc1a5));
  return generate_subject(config, seed, pick.uniform_int(0, kNumArchetypeClasses - 1));
}

Subject generate_subject(const WorldConfig& config, std::uint64_t seed, int archetype_class) {
  config.validate();
  Subject out;
  out.archetype = make_archetype(config, seed, archetype_class);
  const int k = out.archetype.preferred_step;
  Rng rng(derive_seed(seed, 0xde70));
  const int start_age = rng.uniform_int(config.age_min, config.age_max - k);
  const int max_len = std::min(config.horizon - 1, (config.age_max - start_age) / k);
  const int len = rng.uniform_int(1, max_len);
  const int target = start_age + len * k;

  const State start{observe(out.archetype, start_age, config), start_age};
  out.demo = brute_force_optimal_path(start, target, GroundTruthCost(out.archetype),
                                      config.horizon - 1, WorldDynamics(out.archetype, config));
  if (config.noise > 0.0) {
    for (auto& s : out.demo.states) {
      for (double& v : s.observation) v += config.noise * rng.normal();
    }
  }
  return out;
}

SequenceRecord to_record(const std::string& subject_id, const AgingTrajectory& traj) {
  SequenceRecord r;
  r.subject_id = subject_id;
  for (const auto& s : traj.states) {
    r.ages.push_back(s.age);
    r.observations.push_back(s.observation);
  }
  return r;
}

AgingTrajectory to_trajectory(const SequenceRecord& record, int num_actions) {
  if (record.ages.empty()) throw ValidationError("sequence " + record.subject_id + " is empty");
  if (record.ages.size() != record.observations.size()) {
    throw ShapeError("sequence " + record.subject_id + ": ages and observations differ in length");
  }
  AgingTrajectory t;
  for (std::size_t i = 0; i < record.ages.size(); ++i) {
    if (i > 0) {
      const int gap = record.ages[i] - record.ages[i - 1];
      if (gap < 0 || gap >= num_actions) {
        throw ValidationError("sequence " + record.subject_id + ": age gap " +
                              std::to_string(gap) + " is not a valid action");
      }
      t.actions.emplace_back(gap, num_actions);
    }
    t.states.push_back({record.observations[i], record.ages[i]});
  }
  return t;
}

WorldDataset generate_world(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  WorldDataset out;
  char id[32];
  for (std::size_t i = 0; i < config.train_subjects; ++i) {
    const auto s = derive_seed(seed, i);
    auto subject = generate_subject(config, s, static_cast<int>(i % kNumArchetypeClasses));
    std::snprintf(id, sizeof id, "train-%04zu", i);
    subject.id = id;

    Rng rng(derive_seed(s, 0xa1b));
    std::vector<int> ages(config.album_size);
    for (int& a : ages) a = rng.uniform_int(config.age_min, config.age_max);
    std::sort(ages.begin(), ages.end());
    SequenceRecord album{subject.id, ages, {}};
    for (int a : ages) {
      auto x = observe(subject.archetype, a, config);
      for (double& v : x) v += config.noise * rng.normal();
      album.observations.push_back(std::move(x));
    }
    out.albums.push_back(std::move(album));
    out.train.push_back(std::move(subject));
  }
  for (std::size_t i = 0; i < config.heldout_subjects; ++i) {
    const auto s = derive_seed(seed, (1ULL << 32) | i);
    auto subject = generate_subject(config, s, static_cast<int>(i % kNumArchetypeClasses));
    std::snprintf(id, sizeof id, "heldout-%04zu", i);
    subject.id = id;
    out.heldout.push_back(std::move(subject));
  }
  return out;
}

std::vector<PairSample> album_pairs(const std::vector<SequenceRecord>& records, int max_gap) {
  std::vector<PairSample> out;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.ages.size(); ++i) {
      for (std::size_t j = i + 1; j < r.ages.size(); ++j) {
        const int gap = r.ages[j] - r.ages[i];
        if (gap < 0 || gap > max_gap) continue;
        out.push_back({r.observations[i], r.observations[j], AgeAction(gap)});
      }
    }
  }
  return out;
}

std::vector<Observation> album_observations(const std::vector<SequenceRecord>& records) {
  std::vector<Observation> out;
  for (const auto& r : records) out.insert(out.end(), r.observations.begin(), r.observations.end());
  return out;
}

}  // namespace flowpath
