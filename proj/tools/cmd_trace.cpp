#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commands.hpp"
#include "ctrace/error.hpp"
#include "ctrace/opnet.hpp"

namespace ctrace::cli {

namespace {

namespace fs = std::filesystem;

struct TraceOptions {
  std::string fixtures;
  double distance = trace::kDefaultContactMeters;
  std::int64_t bucket = kDefaultBucketWidth;
  std::size_t threshold = trace::kDefaultMultiplicity;
  std::optional<std::int64_t> now;
  std::vector<std::string> positives;
  std::uint64_t timeout = opnet::kDefaultTimeoutSteps;
  std::string out;
};

void write_file(const fs::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out)
    throw Error(ErrorKind::Io, "cannot write " + path.string());
}

int run_trace(const TraceOptions &o) {
  opnet::TraceParams params;
  params.distance = o.distance;
  params.bucket_width = o.bucket;
  params.threshold = o.threshold;
  params.timeout_steps = o.timeout;
  params.validate();

  opnet::FixtureReport report;
  auto deployment = opnet::load_fixtures(o.fixtures, params, o.now, &report);
  for (const auto &w : report.warnings)
    std::cerr << "warning: " << w << '\n';
  for (const auto &p : o.positives)
    deployment.positives.push_back(PhoneNumber::parse(p));

  opnet::Network net(deployment, params);
  std::size_t unknown = 0;
  for (const auto &p : deployment.positives) {
    try {
      net.submit_positive(p);
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::UnknownSubscriber && e.kind() != ErrorKind::DuplicateWorkflow)
        throw;
      std::cerr << "warning: " << e.what() << '\n';
      ++unknown;
    }
  }
  const auto suspects = net.run_trace_round();

  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (!fs::is_directory(o.out))
    throw Error(ErrorKind::Io, "cannot create output directory " + o.out);
  write_file(fs::path(o.out) / "suspects.csv", opnet::suspects_csv(suspects));
  std::string log;
  for (const auto &line : net.trace_log())
    log += line + '\n';
  write_file(fs::path(o.out) / "trace.log", log);

  std::size_t partial = 0;
  for (const auto &[id, wf] : net.central().workflows())
    partial += wf.partial_coverage ? 1 : 0;
  std::cout << fmt::format("{} operators, {} samples, {} workflows ({} partial), {} unrouted; "
                           "{} suspects, {} flagged (M={})\n",
                           deployment.operators.size(), report.accepted,
                           net.central().workflows().size(), partial, unknown,
                           suspects.entries.size(), suspects.flagged().size(), params.threshold);
  return kOk;
}

} // namespace

Command register_trace(CLI::App &root) {
  auto opts = std::make_shared<TraceOptions>();
  auto *app = root.add_subcommand("trace", "Run the multi-operator tracing protocol on fixtures");
  app->add_option("--fixtures", opts->fixtures, "fixture directory (one subdirectory per operator)")
      ->required();
  app->add_option("--distance", opts->distance,
                  "contact distance (meters in geo mode, scaled units in planar mode)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--bucket", opts->bucket, "time bucket width in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--threshold", opts->threshold, "multiplicity threshold M")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--now", opts->now, "end of the lookback window (default: latest sample)");
  app->add_option("--positive", opts->positives, "extra confirmed-positive number (repeatable)");
  app->add_option("--timeout-steps", opts->timeout, "operator timeout in simulated steps")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--out", opts->out, "output directory")->required();
  return {app, [opts] { return run_trace(*opts); }};
}

} // namespace ctrace::cli
