#pragma once

#include <string>
#include <vector>

#include "flowpath/synth_world.hpp"

namespace flowpath {

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

/// Line-delimited {subject_id, ages, observations} records.
std::string sequences_to_jsonl(const std::vector<SequenceRecord>& records);
std::vector<SequenceRecord> sequences_from_jsonl(const std::string& text);
void save_sequences(const std::string& path, const std::vector<SequenceRecord>& records);
std::vector<SequenceRecord> load_sequences(const std::string& path);

/// Shortest text that parses back to the same double.
std::string format_real(double v);

}  // namespace flowpath
