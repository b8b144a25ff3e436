#pragma once

// Runs `ctrace serve` as a child process.

#include <string>
#include <sys/types.h>
#include <vector>

namespace ctrace::acceptance {

class ServerProcess {
public:
  ServerProcess() = default;
  ~ServerProcess();
  ServerProcess(const ServerProcess &) = delete;
  ServerProcess &operator=(const ServerProcess &) = delete;

  /// Starts the binary with `args` and waits for its "listening on" line.
  /// Returns the bound port; throws std::runtime_error on failure.
  int start(const std::string &binary, const std::vector<std::string> &args);
  /// Sends `sig` and reaps the child; returns the raw wait status.
  int kill(int sig);
  bool running() const noexcept { return pid_ > 0; }

private:
  pid_t pid_ = -1;
  int out_fd_ = -1;
};

} // namespace ctrace::acceptance
