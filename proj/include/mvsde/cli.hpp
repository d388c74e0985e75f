#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvsde/config.hpp"

namespace mvsde {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigError = 2,
  kExitBlowUp = 3,
  kExitGateFailure = 4,
};

struct CliOptions {
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool gate = false;
};

/// Flat "key = value" summary, in insertion order.
using Summary = std::vector<std::pair<std::string, std::string>>;

struct CommandResult {
  std::filesystem::path out_dir;
  Summary summary;
  bool gate_passed = true;
  std::vector<std::string> gate_failures;
};

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

/// --out, then output.dir, then $MVSDE_OUT/<experiment>, then mvsde_out/<experiment>.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const CliOptions& opts,
                                         const std::string& experiment);

CommandResult cmd_run(const ExperimentConfig& cfg, const CliOptions& opts);
CommandResult cmd_rate(const ExperimentConfig& cfg, const CliOptions& opts);
CommandResult cmd_moments(const ExperimentConfig& cfg, const CliOptions& opts);
CommandResult cmd_metric(const ExperimentConfig& cfg, const CliOptions& opts);
CommandResult cmd_check(const ExperimentConfig& cfg, const CliOptions& opts);

/// Quick internal consistency checks; true iff all pass.
bool selftest(std::ostream& out);

/// Full command line entry point. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mvsde
