#include "flowpath/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "flowpath/errors.hpp"

namespace flowpath {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void write_file_atomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + tmp + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw ValidationError("failed writing " + tmp);
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ValidationError("cannot rename " + tmp + " to " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string sequences_to_jsonl(const std::vector<SequenceRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    if (r.ages.size() != r.observations.size()) {
      throw ShapeError("sequence " + r.subject_id + ": ages and observations differ in length");
    }
    for (const auto& x : r.observations) {
      for (double v : x) {
        if (!std::isfinite(v)) throw NumericError("sequence " + r.subject_id + " is not finite");
      }
    }
    ordered_json j;
    j["subject_id"] = r.subject_id;
    j["ages"] = r.ages;
    j["observations"] = r.observations;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<SequenceRecord> sequences_from_jsonl(const std::string& text) {
  std::vector<SequenceRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SequenceRecord r;
      r.subject_id = j.at("subject_id").get<std::string>();
      r.ages = j.at("ages").get<std::vector<int>>();
      r.observations = j.at("observations").get<std::vector<Observation>>();
      if (r.ages.size() != r.observations.size()) {
        throw ValidationError("ages and observations differ in length");
      }
      for (std::size_t i = 1; i < r.observations.size(); ++i) {
        if (r.observations[i].size() != r.observations[0].size()) {
          throw ValidationError("observations differ in length");
        }
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("sequence line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("sequence line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_sequences(const std::string& path, const std::vector<SequenceRecord>& records) {
  write_file_atomic(path, sequences_to_jsonl(records));
}

std::vector<SequenceRecord> load_sequences(const std::string& path) {
  return sequences_from_jsonl(read_file(path));
}

}  // namespace flowpath
