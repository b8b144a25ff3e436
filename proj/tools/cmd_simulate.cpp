#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "commands.hpp"
#include "ctrace/error.hpp"
#include "ctrace/ppp.hpp"

namespace ctrace::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct SimulateOptions {
  std::optional<double> density_all;
  std::optional<double> density_smart;
  std::optional<double> infection_rate;
  double radius = 0.03;
  std::size_t trials = 4;
  std::uint64_t seed = ppp::SimConfig{}.seed;
  std::string out;
  std::string country;
  std::string from_manifest;
  unsigned workers = 0;
};

json config_json(const ppp::SimConfig &c) {
  return json{{"density_all", c.density_all},       {"density_smart", c.density_smart},
              {"infection_rate", c.infection_rate}, {"contact_radius", c.contact_radius},
              {"region_radius", c.region_radius},   {"trials", c.trials},
              {"seed", c.seed}};
}

void write_manifest(const fs::path &dir, const json &body) {
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body.dump(2) << '\n';
  if (!out)
    throw Error(ErrorKind::Io, "cannot write " + path.string());
}

json manifest(const std::string &country, const ppp::SimConfig &c,
              const std::vector<std::string> &outputs) {
  json args = json::array();
  if (country.empty()) {
    args = {"--density-all", fmt::format("{}", c.density_all), "--density-smart",
            fmt::format("{}", c.density_smart), "--infection-rate",
            fmt::format("{}", c.infection_rate)};
  } else {
    args = {"--country", country};
  }
  for (const auto &a : {std::string("--radius"), fmt::format("{}", c.contact_radius),
                        std::string("--trials"), std::to_string(c.trials), std::string("--seed"),
                        std::to_string(c.seed)})
    args.push_back(a);
  return json{{"tool", "ctrace"},     {"version", kVersion},  {"command", "simulate"},
              {"country", country},   {"seed", c.seed},       {"config", config_json(c)},
              {"args", args},         {"outputs", outputs}};
}

std::vector<std::string> names(const std::vector<fs::path> &paths, const fs::path &base) {
  std::vector<std::string> out;
  for (const auto &p : paths)
    out.push_back(fs::relative(p, base).generic_string());
  return out;
}

/// Runs one configuration into `dir`; returns the summary.
ppp::ScenarioSummary simulate_into(const fs::path &dir, const std::string &label,
                                   const std::string &country, const ppp::SimConfig &config,
                                   unsigned workers) {
  const auto outcomes = ppp::run_experiment(config, workers);
  std::vector<ppp::TrialResult> results;
  for (const auto &o : outcomes)
    results.push_back(o.result);
  const auto summary = ppp::summarize(label, results);

  auto files = ppp::emit_results(outcomes, dir);
  files.push_back(ppp::emit_scenarios(std::span(&summary, 1), dir));
  auto out_names = names(files, dir);
  out_names.push_back("manifest.json");
  write_manifest(dir, manifest(country, config, out_names));
  return summary;
}

void print_summary(const ppp::ScenarioSummary &s) {
  std::cout << fmt::format("{}: trials={} mean_count_all={:.4f} mean_count_smart={:.4f} "
                           "pct_change_of_means={} undefined_trials={}\n",
                           s.country, s.trials, s.mean_count_all, s.mean_count_smart,
                           s.mean_pct_change ? fmt::format("{:.2f}%", *s.mean_pct_change) : "NA",
                           s.undefined_trials);
}

void load_manifest(const std::string &path, SimulateOptions &o) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::Io, "cannot read manifest " + path);
  json m;
  try {
    m = json::parse(in);
    const auto &c = m.at("config");
    o.country = m.value("country", "");
    if (o.country.empty()) {
      o.density_all = c.at("density_all").get<double>();
      o.density_smart = c.at("density_smart").get<double>();
      o.infection_rate = c.at("infection_rate").get<double>();
    }
    o.radius = c.at("contact_radius").get<double>();
    o.trials = c.at("trials").get<std::size_t>();
    o.seed = c.at("seed").get<std::uint64_t>();
  } catch (const json::exception &e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

int run_simulate(SimulateOptions o) {
  if (!o.from_manifest.empty())
    load_manifest(o.from_manifest, o);
  const fs::path out_dir = o.out;

  if (o.country == "all") {
    std::vector<ppp::ScenarioSummary> summaries;
    json sub = json::array();
    for (const auto &c : ppp::country_presets()) {
      const auto config = ppp::scenario_config(c, o.radius, o.trials, o.seed);
      summaries.push_back(simulate_into(out_dir / c.code, c.name, c.code, config, o.workers));
      print_summary(summaries.back());
      sub.push_back(c.code + "/manifest.json");
    }
    ppp::emit_scenarios(summaries, out_dir);
    auto config = ppp::scenario_config(ppp::bangladesh(), o.radius, o.trials, o.seed);
    json m = manifest("all", config, {"scenarios.csv", "manifest.json"});
    m.erase("config");
    m["radius"] = o.radius;
    m["trials"] = o.trials;
    m["scenario_manifests"] = sub;
    write_manifest(out_dir, m);
    return kOk;
  }

  ppp::SimConfig config;
  std::string label = "custom";
  if (!o.country.empty()) {
    const auto c = ppp::find_country(o.country);
    config = ppp::scenario_config(c, o.radius, o.trials, o.seed);
    label = c.name;
  } else {
    config.density_all = o.density_all.value_or(config.density_all);
    config.density_smart = o.density_smart.value_or(config.density_smart);
    config.infection_rate = o.infection_rate.value_or(config.infection_rate);
    config.contact_radius = o.radius;
    config.trials = o.trials;
    config.seed = o.seed;
  }
  config.validate();
  print_summary(simulate_into(out_dir, label, o.country, config, o.workers));
  return kOk;
}

} // namespace

Command register_simulate(CLI::App &root) {
  auto opts = std::make_shared<SimulateOptions>();
  auto *app = root.add_subcommand("simulate", "Run the PPP any-phone vs smartphone experiment");
  auto *da = app->add_option("--density-all", opts->density_all, "PPP intensity, any-phone users")
                 ->check(CLI::NonNegativeNumber);
  auto *ds = app->add_option("--density-smart", opts->density_smart,
                             "PPP intensity, smartphone users")
                 ->check(CLI::NonNegativeNumber);
  auto *ir = app->add_option("--infection-rate", opts->infection_rate, "fraction marked positive")
                 ->check(CLI::Range(0.0, 1.0));
  app->add_option("--radius", opts->radius, "contact radius in scaled units (1 = 100 m)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--trials", opts->trials, "number of trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--seed", opts->seed, "root seed")->capture_default_str();
  app->add_option("--out", opts->out, "output directory")->required();
  auto *country = app->add_option("--country", opts->country, "country preset")
                      ->check(CLI::IsMember({"bd", "in", "kr", "all"}));
  country->excludes(da)->excludes(ds)->excludes(ir);
  app->add_option("--from-manifest", opts->from_manifest,
                  "rerun the configuration recorded in a manifest")
      ->check(CLI::ExistingFile)
      ->excludes(country)
      ->excludes(da)
      ->excludes(ds)
      ->excludes(ir);
  app->add_option("--workers", opts->workers, "worker threads (0 = all cores)");
  return {app, [opts] { return run_simulate(*opts); }};
}

} // namespace ctrace::cli
