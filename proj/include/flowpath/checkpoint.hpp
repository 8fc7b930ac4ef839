#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowpath/optimizer.hpp"
#include "flowpath/tensor.hpp"

namespace flowpath {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointSection {
  std::string name;
  std::string payload;
  friend bool operator==(const CheckpointSection&, const CheckpointSection&) = default;
};

/// "FPCK", u32 version, u32 section count, then per section u32 name length,
/// name, u64 payload length, payload. Integers are little-endian.
struct Checkpoint {
  std::vector<CheckpointSection> sections;

  bool has(const std::string& name) const;
  const std::string& section(const std::string& name) const;
  void set(const std::string& name, std::string payload);
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// u32 count, then per tensor u32 name length, name, u32 rank, u64 dims,
/// f64 values.
std::string encode_tensors(std::span<const NamedParam> params);
std::vector<std::pair<std::string, ParamTensor>> decode_tensors(const std::string& payload);
/// Copies a tensor payload into `params`; names and shapes must match.
void load_tensors_into(const std::string& payload, std::span<const NamedParam> params,
                       const std::string& section);

/// Adam hyperparameters, step count, then first and second moments as
/// tensors named "m.<param>" and "v.<param>".
std::string encode_optimizer(const OptimizerState& state, std::span<const NamedParam> params);
OptimizerState decode_optimizer(const std::string& payload, std::span<const NamedParam> params,
                                const std::string& section);

}  // namespace flowpath
