#pragma once

// Poisson-point-process comparison between any-phone and smartphone-only
// tracing coverage on a unit disk (1 unit = 100 m).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctrace/geo.hpp"
#include "ctrace/rng.hpp"

namespace ctrace::ppp {

struct SimConfig {
  double density_all = 100.0;
  double density_smart = 58.0;
  double infection_rate = 0.18;
  double contact_radius = 0.03;
  double region_radius = 1.0;
  std::size_t trials = 4;
  std::uint64_t seed = 20200601;

  /// Throws Error(InvalidArgument) naming the first violated constraint.
  void validate() const;
};

struct Population {
  std::vector<PlanarPoint> points;
  /// Sorted, unique indices into points.
  std::vector<std::size_t> infected;

  std::vector<bool> infection_mask() const;
};

/// Population role, part of the sub-stream derivation.
enum class Role : std::uint64_t { AnyPhone = 0, Smartphone = 1 };

/// N ~ Poisson(density), then N points uniform on the unit disk (polar method,
/// radius = sqrt(u)). Throws on negative or non-finite density.
std::vector<PlanarPoint> sample_ppp(double density, Engine &rng);

/// Marks each point independently with probability p; replaces any previous
/// marking and returns the infected index set.
const std::vector<std::size_t> &mark_infected(Population &population, double p, Engine &rng);

/// Number of non-infected points within distance r (inclusive) of at least
/// one infected point. Grid-accelerated.
std::size_t count_contacts(const Population &population, double r);

/// |sample cov(x, y)| with n-1 denominator. Throws for fewer than two points.
double coordinate_covariance(std::span<const PlanarPoint> points);

/// 100 * (all - smart) / smart; nullopt when smart == 0.
std::optional<double> percentage_change(double count_all, double count_smart);

struct TrialResult {
  std::size_t trial_index = 0;
  std::size_t count_all = 0;
  std::size_t count_smart = 0;
  std::optional<double> pct_change;
  std::optional<double> cov_all;   // nullopt when the population has < 2 points
  std::optional<double> cov_smart;

  friend bool operator==(const TrialResult &, const TrialResult &) = default;
};

struct TrialOutcome {
  TrialResult result;
  Population all;
  Population smart;
};

/// Fully determined by (config.seed, trial_index).
TrialOutcome run_trial_full(const SimConfig &config, std::size_t trial_index);
TrialResult run_trial(const SimConfig &config, std::size_t trial_index);

/// Runs trials [0, config.trials) on up to `workers` threads (0 = hardware
/// concurrency). Output is ordered by trial index regardless of scheduling.
std::vector<TrialOutcome> run_experiment(const SimConfig &config, unsigned workers = 0);
std::vector<TrialResult> run_trials(const SimConfig &config, unsigned workers = 0);

struct CountryScenario {
  std::string code;
  std::string name;
  double density_all = 0.0;
  double density_smart = 0.0;
  double infection_rate = 0.0;
};

CountryScenario bangladesh();
CountryScenario india();
CountryScenario south_korea();
const std::vector<CountryScenario> &country_presets();
/// Looks up "bd", "in" or "kr"; throws Error(InvalidArgument) otherwise.
CountryScenario find_country(const std::string &code);

SimConfig scenario_config(const CountryScenario &scenario, double radius,
                          std::size_t trials, std::uint64_t seed);

struct ScenarioSummary {
  std::string country;
  std::size_t trials = 0;
  double mean_count_all = 0.0;
  double mean_count_smart = 0.0;
  /// Percentage change of the mean counts; nullopt when mean_count_smart == 0.
  std::optional<double> mean_pct_change;
  /// Mean of the per-trial percentage changes over trials where it is defined.
  std::optional<double> mean_trial_pct_change;
  std::size_t undefined_trials = 0;
  std::optional<double> mean_cov_all;
  std::optional<double> mean_cov_smart;
};

ScenarioSummary summarize(const std::string &country, std::span<const TrialResult> results);

/// Throws Error(InvalidArgument) when trials == 0.
ScenarioSummary run_scenario(const CountryScenario &scenario, double radius,
                             std::size_t trials, std::uint64_t seed, unsigned workers = 0);

/// Writes scatter.csv, counts.csv and covariance.csv into `dir` (created if
/// missing) and returns the written paths. Throws Error(Io) with the path
/// when the directory or a file cannot be written.
std::vector<std::filesystem::path> emit_results(std::span<const TrialOutcome> outcomes,
                                                const std::filesystem::path &dir);

/// Writes scenarios.csv.
std::filesystem::path emit_scenarios(std::span<const ScenarioSummary> summaries,
                                     const std::filesystem::path &dir);

} // namespace ctrace::ppp
