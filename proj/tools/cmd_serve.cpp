#include <csignal>
#include <iostream>
#include <memory>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commands.hpp"
#include "ctrace/error.hpp"
#include "ctrace/registry.hpp"
#include "ctrace/service.hpp"

namespace ctrace::cli {

namespace {

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
  std::string rules;
  std::string fixtures;
  std::string geocoder;
  double distance = trace::kDefaultContactMeters;
  std::int64_t bucket = kDefaultBucketWidth;
  std::size_t threshold = trace::kDefaultMultiplicity;
};

int run_serve(const ServeOptions &o) {
  // block termination signals before any thread starts; a dedicated thread
  // waits for them and stops the server
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  triage::RuleTable rules = triage::RuleTable::defaults();
  if (!o.rules.empty()) {
    try {
      rules = triage::RuleTable::load(o.rules);
    } catch (const Error &e) {
      std::cerr << "refusing to start: bad rule table: " << e.what() << '\n';
      return kRuntimeError;
    }
  }

  const std::string data_dir = o.data_dir.empty() ? default_data_dir("ctrace-data") : o.data_dir;
  registry::Registry reg(data_dir, std::move(rules));
  if (!o.geocoder.empty())
    reg.set_geocoder(
        std::make_shared<registry::FixtureGeocoder>(registry::FixtureGeocoder::load(o.geocoder)));

  std::unique_ptr<service::TracingBridge> bridge;
  if (!o.fixtures.empty()) {
    opnet::TraceParams params;
    params.distance = o.distance;
    params.bucket_width = o.bucket;
    params.threshold = o.threshold;
    params.validate();
    opnet::FixtureReport report;
    const auto deployment = opnet::load_fixtures(o.fixtures, params, std::nullopt, &report);
    for (const auto &w : report.warnings)
      std::cerr << "warning: " << w << '\n';
    bridge = std::make_unique<service::TracingBridge>(deployment, params);
    // rebuild the suspect store from positives already in the log
    for (const auto &n : reg.positive_numbers())
      bridge->forward(n);
    reg.set_positive_sink(bridge.get());
    reg.set_suspect_directory(bridge.get());
  }

  service::ApiServer server(reg);
  int port = 0;
  try {
    port = server.bind(o.host, o.port);
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  std::cout << fmt::format("listening on {}:{} (data dir {})", o.host, port, data_dir)
            << std::endl;

  std::jthread waiter([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  // listen() also returns if the server fails; wake the waiter either way
  pthread_kill(waiter.native_handle(), SIGTERM);
  return kOk;
}

} // namespace

Command register_serve(CLI::App &root) {
  auto opts = std::make_shared<ServeOptions>();
  auto *app = root.add_subcommand("serve", "Run the registry HTTP API");
  app->add_option("--host", opts->host, "bind address")->capture_default_str();
  app->add_option("--port", opts->port, "TCP port (0 picks a free one)")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  app->add_option("--data-dir", opts->data_dir,
                  fmt::format("registry data directory (default ${} or ./ctrace-data)", kDataDirEnv));
  app->add_option("--rules", opts->rules, "triage rule table (JSON)");
  app->add_option("--fixtures", opts->fixtures, "operator fixtures for tracing positives");
  app->add_option("--geocoder", opts->geocoder, "address -> [lat, lon] table (JSON)");
  app->add_option("--distance", opts->distance, "contact distance for tracing")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--bucket", opts->bucket, "time bucket width in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--threshold", opts->threshold, "multiplicity threshold M")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  return {app, [opts] { return run_serve(*opts); }};
}

} // namespace ctrace::cli
