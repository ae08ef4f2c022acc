#pragma once

// Pipeline stages behind the command-line tool. Each stage reads and writes
// files in the output directory and returns a process exit code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace gfrbess::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kInputError = 2,
  kInfeasible = 3,
  kSimulationError = 4,
  kEvaluationError = 5,
};

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out = ".";
  std::uint64_t seed = 0;
  int days = 56;                       ///< synth-history only
  std::optional<double> droop_lag_s;   ///< simulate: overrides the config
  std::optional<bool> track_dispatch;  ///< simulate: overrides the config
};

int cmd_synth_history(const CommandOptions& options, std::ostream& err);
int cmd_forecast(const CommandOptions& options, std::ostream& err);
int cmd_schedule(const CommandOptions& options, std::ostream& err);
int cmd_simulate(const CommandOptions& options, std::ostream& err);
int cmd_evaluate(const CommandOptions& options, std::ostream& err);
/// forecast, schedule, simulate and evaluate in sequence.
int cmd_run(const CommandOptions& options, std::ostream& err);

/// Parses argv and dispatches; used by main() and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gfrbess::cli
