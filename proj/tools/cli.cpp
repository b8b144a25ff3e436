#include <cstdlib>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ctrace/error.hpp"

namespace ctrace::cli {

std::string default_data_dir(const std::string &fallback) {
  const char *env = std::getenv(kDataDirEnv);
  return env && *env ? std::string(env) : fallback;
}

int run(int argc, const char *const *argv) {
  CLI::App app{"Cellular-geolocation contact tracing toolkit", "ctrace"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::vector<Command> commands{register_simulate(app), register_trace(app), register_serve(app),
                                register_ingest(app)};
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kUsageError;
  }

  for (auto &cmd : commands) {
    if (!cmd.app->parsed())
      continue;
    try {
      return cmd.run();
    } catch (const Error &e) {
      std::cerr << "error: " << e.what() << '\n';
      return e.kind() == ErrorKind::InvalidArgument ? kUsageError : kRuntimeError;
    } catch (const std::exception &e) {
      std::cerr << "error: " << e.what() << '\n';
      return kRuntimeError;
    }
  }
  return kUsageError;
}

int run(const std::vector<std::string> &args) {
  std::vector<const char *> argv{"ctrace"};
  for (const auto &a : args)
    argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace ctrace::cli
