#pragma once

// HTTP JSON API over the registry, and the bridge that feeds confirmed
// positives into the operator network.

#include <atomic>
#include <memory>
#include <mutex>
#include <string>

#include "ctrace/opnet.hpp"
#include "ctrace/registry.hpp"

namespace httplib {
class Server;
}

namespace ctrace::service {

/// Runs a trace round per forwarded positive and serves the resulting
/// suspect store to status checks.
class TracingBridge final : public registry::PositiveSink, public registry::SuspectDirectory {
public:
  TracingBridge(const opnet::Deployment &deployment, const opnet::TraceParams &params);

  bool forward(const PhoneNumber &number) override;
  std::optional<trace::SuspectEntry> lookup(const PhoneNumber &number) const override;

  trace::SuspectList suspects() const;

private:
  mutable std::mutex mutex_;
  opnet::Network network_;
  trace::SuspectList suspects_;
};

/// Registers every /v1 route on `server`.
void mount_routes(httplib::Server &server, registry::Registry &registry);

/// Owns an httplib server bound to the registry.
class ApiServer {
public:
  explicit ApiServer(registry::Registry &registry);
  ~ApiServer();

  /// Binds to host:port (port 0 picks a free port). Throws Error(Io) when
  /// the port is unavailable; returns the bound port.
  int bind(const std::string &host, int port);
  /// Blocks until stop() is called.
  void listen();
  void stop();

private:
  std::unique_ptr<httplib::Server> server_;
};

} // namespace ctrace::service
