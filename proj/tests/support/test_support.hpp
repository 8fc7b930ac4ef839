#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "flowpath/config.hpp"
#include "flowpath/rng.hpp"
#include "flowpath/tensor.hpp"

namespace flowpath::testing {

inline Observation random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  Observation v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline bool rel_close(double a, double b, double rtol, double floor = 0.0) {
  return std::abs(a - b) <= std::max(rtol * std::max(std::abs(a), std::abs(b)), floor);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "flowpath-XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// A run small enough to finish in a couple of seconds.
inline RunConfig tiny_run_config(const std::string& output_dir) {
  RunConfig c;
  c.world.dim = 4;
  c.world.train_subjects = 6;
  c.world.heldout_subjects = 3;
  c.world.album_size = 4;
  c.flow.units = 2;
  c.flow.hidden = 6;
  c.flow.pretrain_steps = 10;
  c.flow.batch_size = 8;
  c.transform.factors = 4;
  c.transform.steps = 10;
  c.transform.batch_size = 8;
  c.irl.loop.outer_iterations = 3;
  c.irl.loop.cost_steps = 2;
  c.irl.loop.paths_per_iteration = 8;
  c.irl.loop.sample_batch = 4;
  c.irl.loop.demo_batch = 4;
  c.irl.loop.policy_rollouts = 8;
  c.irl.loop.policy_steps = 2;
  c.irl.cost_hidden = 6;
  c.irl.policy_hidden = 6;
  c.seed = 11;
  c.output_dir = output_dir;
  return c;
}

}  // namespace flowpath::testing
