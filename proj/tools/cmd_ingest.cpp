#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commands.hpp"
#include "ctrace/error.hpp"
#include "ctrace/ingest.hpp"

namespace ctrace::cli {

namespace {

namespace fs = std::filesystem;

struct IngestOptions {
  std::string operator_id;
  std::string file;
  std::string store;
};

int run_ingest(const IngestOptions &o) {
  if (o.operator_id.empty() || o.operator_id.find('/') != std::string::npos ||
      o.operator_id == "." || o.operator_id == "..")
    throw Error(ErrorKind::InvalidArgument, "invalid operator id '" + o.operator_id + "'");

  const fs::path target_dir = fs::path(o.store) / o.operator_id;
  const fs::path target = target_dir / "samples.jsonl";

  // new lines must match the mode of what the store already holds
  std::optional<trace::CoordMode> mode;
  std::set<std::pair<PhoneNumber, std::int64_t>> existing;
  if (fs::exists(target)) {
    const auto current = trace::read_samples_file(target);
    mode = current.mode;
    for (const auto &s : current.accepted)
      existing.emplace(s.subscriber, s.timestamp);
  }

  auto report = trace::read_samples_file(o.file, mode);
  std::vector<trace::LocationSample> fresh;
  for (auto &s : report.accepted)
    if (existing.contains({s.subscriber, s.timestamp}))
      report.rejected.push_back({0, fmt::format("sample for {} at {} already stored",
                                                s.subscriber.str(), s.timestamp)});
    else
      fresh.push_back(std::move(s));

  for (const auto &err : report.rejected) {
    if (err.line > 0)
      std::cerr << fmt::format("{}:{}: {}\n", o.file, err.line, err.message);
    else
      std::cerr << fmt::format("{}: {}\n", o.file, err.message);
  }
  std::cout << fmt::format("{} accepted, {} rejected\n", fresh.size(), report.rejected.size());
  if (fresh.empty())
    return kRuntimeError;

  std::error_code ec;
  fs::create_directories(target_dir, ec);
  std::ofstream out(target, std::ios::binary | std::ios::app);
  trace::write_samples(out, fresh);
  if (!out)
    throw Error(ErrorKind::Io, "cannot append to " + target.string());
  return kOk;
}

} // namespace

Command register_ingest(CLI::App &root) {
  auto opts = std::make_shared<IngestOptions>();
  auto *app = root.add_subcommand("ingest", "Validate and load trajectory samples into an operator store");
  app->add_option("--operator", opts->operator_id, "operator id")->required();
  app->add_option("--file", opts->file, "line-delimited sample file")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--store", opts->store,
                  fmt::format("fixture store root (default ${}/fixtures or ./fixtures)",
                              kDataDirEnv));
  return {app, [opts] {
            IngestOptions o = *opts;
            if (o.store.empty())
              o.store = std::getenv(kDataDirEnv)
                            ? (fs::path(default_data_dir("")) / "fixtures").string()
                            : "fixtures";
            return run_ingest(o);
          }};
}

} // namespace ctrace::cli
