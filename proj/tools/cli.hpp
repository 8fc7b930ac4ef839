#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace flowpath::cli {

/// Runs one subcommand. Returns 0 on success, 1 on invalid input, 2 on a
/// numeric or checkpoint failure.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct OracleCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Library results compared against the independent reference oracles.
std::vector<OracleCheck> run_oracle_checks(std::uint64_t seed);

}  // namespace flowpath::cli
