#include "flowpath/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "flowpath/errors.hpp"
#include "flowpath/io.hpp"

namespace flowpath {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'C', 'K'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const std::string& s) { out_ += s; }
  void name(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& in, std::string what) : in_(in), what_(std::move(what)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string bytes(std::uint64_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string name() { return bytes(u32()); }
  bool done() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw CheckpointError(what_ + ": " + msg + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) fail("truncated payload");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::string& in_;
  std::string what_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::string& name, const ParamTensor& t) {
  w.name(name);
  w.u32(static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) w.u64(d);
  for (double v : t.values) w.f64(v);
}

std::pair<std::string, ParamTensor> read_tensor(Reader& r) {
  std::string name = r.name();
  const auto rank = r.u32();
  if (rank > 8) r.fail("tensor " + name + " has implausible rank " + std::to_string(rank));
  std::vector<std::size_t> shape(rank);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    d = r.u64();
    count *= d;
  }
  if (count > r.remaining() / 8) r.fail("truncated payload in tensor " + name);
  std::vector<double> values(count);
  for (auto& v : values) v = r.f64();
  return {std::move(name), ParamTensor(std::move(shape), std::move(values))};
}

}  // namespace

bool Checkpoint::has(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return true;
  }
  return false;
}

const std::string& Checkpoint::section(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return s.payload;
  }
  throw CheckpointError("checkpoint has no section '" + name + "'");
}

void Checkpoint::set(const std::string& name, std::string payload) {
  for (auto& s : sections) {
    if (s.name == name) {
      s.payload = std::move(payload);
      return;
    }
  }
  sections.push_back({name, std::move(payload)});
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(std::string(kMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.sections.size()));
  for (const auto& s : ckpt.sections) {
    w.name(s.name);
    w.u64(s.payload.size());
    w.bytes(s.payload);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes, "checkpoint");
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("checkpoint: bad magic bytes");
  }
  r.bytes(4);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.u32();
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointSection s;
    s.name = r.name();
    s.payload = r.bytes(r.u64());
    if (ckpt.has(s.name)) r.fail("duplicate section " + s.name);
    ckpt.sections.push_back(std::move(s));
  }
  if (!r.done()) r.fail("trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

std::string encode_tensors(std::span<const NamedParam> params) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) write_tensor(w, p.name, *p.tensor);
  return w.take();
}

std::vector<std::pair<std::string, ParamTensor>> decode_tensors(const std::string& payload) {
  Reader r(payload, "tensor section");
  const auto count = r.u32();
  std::vector<std::pair<std::string, ParamTensor>> out;
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(read_tensor(r));
  if (!r.done()) r.fail("trailing bytes");
  return out;
}

void load_tensors_into(const std::string& payload, std::span<const NamedParam> params,
                       const std::string& section) {
  const auto tensors = decode_tensors(payload);
  if (tensors.size() != params.size()) {
    throw CheckpointError("section " + section + " holds " + std::to_string(tensors.size()) +
                          " tensors, expected " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = tensors[i];
    if (name != params[i].name || t.shape != params[i].tensor->shape) {
      throw CheckpointError("section " + section + ": tensor " + name + " " +
                            shape_string(t.shape) + " does not match " + params[i].name + " " +
                            shape_string(params[i].tensor->shape));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = tensors[i].second;
}

std::string encode_optimizer(const OptimizerState& state, std::span<const NamedParam> params) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("optimizer state does not match its parameters");
  }
  Writer w;
  w.f64(state.config.learning_rate);
  w.f64(state.config.beta1);
  w.f64(state.config.beta2);
  w.f64(state.config.epsilon);
  w.u64(state.step);
  w.u32(static_cast<std::uint32_t>(2 * params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    write_tensor(w, "m." + params[i].name, state.first_moment[i]);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    write_tensor(w, "v." + params[i].name, state.second_moment[i]);
  }
  return w.take();
}

OptimizerState decode_optimizer(const std::string& payload, std::span<const NamedParam> params,
                                const std::string& section) {
  Reader r(payload, "section " + section);
  OptimizerState s;
  s.config.learning_rate = r.f64();
  s.config.beta1 = r.f64();
  s.config.beta2 = r.f64();
  s.config.epsilon = r.f64();
  s.step = r.u64();
  const auto count = r.u32();
  if (count != 2 * params.size()) r.fail("moment count does not match the parameters");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, t] = read_tensor(r);
    const auto& p = params[i % params.size()];
    const std::string expected = (i < params.size() ? "m." : "v.") + p.name;
    if (name != expected || t.shape != p.tensor->shape) {
      r.fail("moment " + name + " does not match " + expected);
    }
    (i < params.size() ? s.first_moment : s.second_moment).push_back(std::move(t));
  }
  if (!r.done()) r.fail("trailing bytes");
  return s;
}

}  // namespace flowpath
