#include "ctrace/ppp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "ctrace/error.hpp"

namespace ctrace::ppp {

namespace {

void require(bool ok, const std::string &what) {
  if (!ok)
    throw Error(ErrorKind::InvalidArgument, what);
}

std::uint64_t cell_key(std::int64_t cx, std::int64_t cy) {
  return (static_cast<std::uint64_t>(cx) << 32) ^ static_cast<std::uint32_t>(cy);
}

std::int64_t cell_of(double v, double size) {
  return static_cast<std::int64_t>(std::floor(v / size));
}

std::string fmt_opt(const std::optional<double> &v, int precision) {
  return v ? fmt::format("{:.{}f}", *v, precision) : std::string("NA");
}

std::ofstream open_for_write(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream &out, const std::filesystem::path &path) {
  out.flush();
  if (!out)
    throw Error(ErrorKind::Io, "write failed: " + path.string());
}

void ensure_dir(const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error(ErrorKind::Io, "cannot create output directory " + dir.string() +
                                   (ec ? ": " + ec.message() : std::string()));
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn &&fn) {
  if (workers == 0)
    workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++)
        fn(i);
    });
}

Population draw_population(const SimConfig &config, std::size_t trial, Role role) {
  Engine rng = make_stream(config.seed, trial, static_cast<std::uint64_t>(role));
  const double density = role == Role::AnyPhone ? config.density_all : config.density_smart;
  Population pop;
  pop.points = sample_ppp(density, rng);
  mark_infected(pop, config.infection_rate, rng);
  return pop;
}

std::optional<double> covariance_or_none(const Population &pop) {
  if (pop.points.size() < 2)
    return std::nullopt;
  return coordinate_covariance(pop.points);
}

} // namespace

void SimConfig::validate() const {
  require(std::isfinite(density_all) && std::isfinite(density_smart),
          "densities must be finite");
  require(density_smart >= 0.0, "density_smart must be >= 0");
  require(density_all >= density_smart, "density_all must be >= density_smart");
  require(infection_rate >= 0.0 && infection_rate <= 1.0, "infection_rate must lie in [0, 1]");
  require(std::isfinite(contact_radius) && contact_radius > 0.0, "contact_radius must be > 0");
  require(region_radius == 1.0, "region_radius is fixed at 1.0");
  require(trials >= 1, "trials must be >= 1");
}

std::vector<bool> Population::infection_mask() const {
  std::vector<bool> mask(points.size(), false);
  for (std::size_t i : infected)
    mask.at(i) = true;
  return mask;
}

std::vector<PlanarPoint> sample_ppp(double density, Engine &rng) {
  require(std::isfinite(density) && density >= 0.0, "PPP density must be finite and >= 0");
  std::vector<PlanarPoint> points;
  if (density == 0.0)
    return points;
  const auto n = std::poisson_distribution<std::int64_t>(density)(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  points.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double radius = std::sqrt(unit(rng));
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    PlanarPoint p{radius * std::cos(angle), radius * std::sin(angle)};
    // guard the boundary against cos/sin rounding
    const double norm2 = p.x * p.x + p.y * p.y;
    if (norm2 > 1.0) {
      const double s = 1.0 / std::sqrt(norm2);
      p.x *= s;
      p.y *= s;
      if (p.x * p.x + p.y * p.y > 1.0) {
        p.x = std::nextafter(p.x, 0.0);
        p.y = std::nextafter(p.y, 0.0);
      }
    }
    points.push_back(p);
  }
  return points;
}

const std::vector<std::size_t> &mark_infected(Population &population, double p, Engine &rng) {
  require(p >= 0.0 && p <= 1.0, "infection rate must lie in [0, 1]");
  population.infected.clear();
  std::bernoulli_distribution coin(p);
  for (std::size_t i = 0; i < population.points.size(); ++i)
    if (coin(rng))
      population.infected.push_back(i);
  return population.infected;
}

std::size_t count_contacts(const Population &population, double r) {
  require(std::isfinite(r) && r > 0.0, "contact radius must be > 0");
  if (population.infected.empty())
    return 0;

  std::unordered_map<std::uint64_t, std::vector<PlanarPoint>> grid;
  for (std::size_t i : population.infected) {
    const auto &p = population.points.at(i);
    grid[cell_key(cell_of(p.x, r), cell_of(p.y, r))].push_back(p);
  }

  const auto mask = population.infection_mask();
  std::size_t count = 0;
  for (std::size_t i = 0; i < population.points.size(); ++i) {
    if (mask[i])
      continue;
    const auto &p = population.points[i];
    const std::int64_t cx = cell_of(p.x, r);
    const std::int64_t cy = cell_of(p.y, r);
    bool hit = false;
    for (std::int64_t dx = -1; dx <= 1 && !hit; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && !hit; ++dy) {
        auto it = grid.find(cell_key(cx + dx, cy + dy));
        if (it == grid.end())
          continue;
        hit = std::any_of(it->second.begin(), it->second.end(),
                          [&](const PlanarPoint &q) { return euclidean_distance(p, q) <= r; });
      }
    }
    count += hit ? 1 : 0;
  }
  return count;
}

double coordinate_covariance(std::span<const PlanarPoint> points) {
  require(points.size() >= 2, "covariance needs at least 2 points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto &p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  double s = 0.0;
  for (const auto &p : points)
    s += (p.x - mx) * (p.y - my);
  return std::abs(s / (n - 1.0));
}

std::optional<double> percentage_change(double count_all, double count_smart) {
  if (count_smart == 0.0)
    return std::nullopt;
  return 100.0 * (count_all - count_smart) / count_smart;
}

TrialOutcome run_trial_full(const SimConfig &config, std::size_t trial_index) {
  config.validate();
  TrialOutcome out;
  out.all = draw_population(config, trial_index, Role::AnyPhone);
  out.smart = draw_population(config, trial_index, Role::Smartphone);

  auto &r = out.result;
  r.trial_index = trial_index;
  r.count_all = count_contacts(out.all, config.contact_radius);
  r.count_smart = count_contacts(out.smart, config.contact_radius);
  r.pct_change = percentage_change(static_cast<double>(r.count_all),
                                   static_cast<double>(r.count_smart));
  r.cov_all = covariance_or_none(out.all);
  r.cov_smart = covariance_or_none(out.smart);
  return out;
}

TrialResult run_trial(const SimConfig &config, std::size_t trial_index) {
  return run_trial_full(config, trial_index).result;
}

std::vector<TrialOutcome> run_experiment(const SimConfig &config, unsigned workers) {
  config.validate();
  std::vector<TrialOutcome> outcomes(config.trials);
  parallel_for(config.trials, workers,
               [&](std::size_t i) { outcomes[i] = run_trial_full(config, i); });
  return outcomes;
}

std::vector<TrialResult> run_trials(const SimConfig &config, unsigned workers) {
  config.validate();
  std::vector<TrialResult> results(config.trials);
  parallel_for(config.trials, workers,
               [&](std::size_t i) { results[i] = run_trial(config, i); });
  return results;
}

CountryScenario bangladesh() { return {"bd", "Bangladesh", 100.0, 58.0, 0.18}; }
CountryScenario india() { return {"in", "India", 64.0, 24.0, 0.0416}; }
CountryScenario south_korea() { return {"kr", "South Korea", 100.0, 95.0, 0.0106}; }

const std::vector<CountryScenario> &country_presets() {
  static const std::vector<CountryScenario> presets{bangladesh(), india(), south_korea()};
  return presets;
}

CountryScenario find_country(const std::string &code) {
  for (const auto &c : country_presets())
    if (c.code == code)
      return c;
  throw Error(ErrorKind::InvalidArgument, "unknown country code '" + code + "' (bd|in|kr)");
}

SimConfig scenario_config(const CountryScenario &scenario, double radius, std::size_t trials,
                          std::uint64_t seed) {
  SimConfig c;
  c.density_all = scenario.density_all;
  c.density_smart = scenario.density_smart;
  c.infection_rate = scenario.infection_rate;
  c.contact_radius = radius;
  c.trials = trials;
  c.seed = seed;
  return c;
}

ScenarioSummary summarize(const std::string &country, std::span<const TrialResult> results) {
  require(!results.empty(), "cannot summarize zero trials");
  ScenarioSummary s;
  s.country = country;
  s.trials = results.size();

  double sum_all = 0.0, sum_smart = 0.0, sum_pct = 0.0;
  double sum_cov_all = 0.0, sum_cov_smart = 0.0;
  std::size_t defined = 0, n_cov_all = 0, n_cov_smart = 0;
  for (const auto &r : results) {
    sum_all += static_cast<double>(r.count_all);
    sum_smart += static_cast<double>(r.count_smart);
    if (r.pct_change) {
      sum_pct += *r.pct_change;
      ++defined;
    } else {
      ++s.undefined_trials;
    }
    if (r.cov_all) {
      sum_cov_all += *r.cov_all;
      ++n_cov_all;
    }
    if (r.cov_smart) {
      sum_cov_smart += *r.cov_smart;
      ++n_cov_smart;
    }
  }
  const double n = static_cast<double>(results.size());
  s.mean_count_all = sum_all / n;
  s.mean_count_smart = sum_smart / n;
  s.mean_pct_change = percentage_change(s.mean_count_all, s.mean_count_smart);
  if (defined > 0)
    s.mean_trial_pct_change = sum_pct / static_cast<double>(defined);
  if (n_cov_all > 0)
    s.mean_cov_all = sum_cov_all / static_cast<double>(n_cov_all);
  if (n_cov_smart > 0)
    s.mean_cov_smart = sum_cov_smart / static_cast<double>(n_cov_smart);
  return s;
}

ScenarioSummary run_scenario(const CountryScenario &scenario, double radius, std::size_t trials,
                             std::uint64_t seed, unsigned workers) {
  require(trials > 0, "scenario needs at least one trial");
  const auto results = run_trials(scenario_config(scenario, radius, trials, seed), workers);
  return summarize(scenario.name, results);
}

std::vector<std::filesystem::path> emit_results(std::span<const TrialOutcome> outcomes,
                                                const std::filesystem::path &dir) {
  require(!outcomes.empty(), "no results to emit");
  ensure_dir(dir);

  const auto scatter_path = dir / "scatter.csv";
  const auto counts_path = dir / "counts.csv";
  const auto cov_path = dir / "covariance.csv";

  auto scatter = open_for_write(scatter_path);
  scatter << "trial,role,x,y,infected\n";
  for (const auto &o : outcomes) {
    const auto emit_pop = [&](const Population &pop, const char *role) {
      const auto mask = pop.infection_mask();
      for (std::size_t i = 0; i < pop.points.size(); ++i)
        scatter << fmt::format("{},{},{:.9f},{:.9f},{}\n", o.result.trial_index, role,
                               pop.points[i].x, pop.points[i].y, mask[i] ? 1 : 0);
    };
    emit_pop(o.smart, "smart");
    emit_pop(o.all, "all");
  }
  finish(scatter, scatter_path);

  auto counts = open_for_write(counts_path);
  counts << "trial,count_all,count_smart,pct_change\n";
  for (const auto &o : outcomes)
    counts << fmt::format("{},{},{},{}\n", o.result.trial_index, o.result.count_all,
                          o.result.count_smart, fmt_opt(o.result.pct_change, 2));
  finish(counts, counts_path);

  auto cov = open_for_write(cov_path);
  cov << "trial,cov_smart,cov_all\n";
  for (const auto &o : outcomes)
    cov << fmt::format("{},{},{}\n", o.result.trial_index, fmt_opt(o.result.cov_smart, 6),
                       fmt_opt(o.result.cov_all, 6));
  finish(cov, cov_path);

  return {scatter_path, counts_path, cov_path};
}

std::filesystem::path emit_scenarios(std::span<const ScenarioSummary> summaries,
                                     const std::filesystem::path &dir) {
  require(!summaries.empty(), "no scenarios to emit");
  ensure_dir(dir);
  const auto path = dir / "scenarios.csv";
  auto out = open_for_write(path);
  out << "country,mean_count_all,mean_count_smart,mean_pct_change,undefined_trials\n";
  for (const auto &s : summaries)
    out << fmt::format("{},{:.6f},{:.6f},{},{}\n", s.country, s.mean_count_all,
                       s.mean_count_smart, fmt_opt(s.mean_pct_change, 4), s.undefined_trials);
  finish(out, path);
  return path;
}

} // namespace ctrace::ppp
