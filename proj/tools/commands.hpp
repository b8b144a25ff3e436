#pragma once

#include <functional>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace ctrace::cli {

inline constexpr const char *kVersion = "0.1.0";
inline constexpr const char *kDataDirEnv = "CTRACE_DATA_DIR";

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

/// Entry point shared by the binary and the tests.
int run(int argc, const char *const *argv);
int run(const std::vector<std::string> &args);

// Each register_* adds a subcommand and returns a slot the dispatcher calls
// after parsing; the slot returns the process exit code.
struct Command {
  CLI::App *app = nullptr;
  std::function<int()> run;
};

Command register_simulate(CLI::App &root);
Command register_trace(CLI::App &root);
Command register_serve(CLI::App &root);
Command register_ingest(CLI::App &root);

std::string default_data_dir(const std::string &fallback);

} // namespace ctrace::cli
