// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "acceptance/server_process.hpp"
#include "ctrace/opnet.hpp"
#include "ctrace/ppp.hpp"
#include "ctrace/registry.hpp"
#include "ctrace/trace.hpp"
#include "ctrace/triage.hpp"
#include "test_support.hpp"

using namespace ctrace;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string &name) {
  auto dir = fs::temp_directory_path() / ("ctrace_acceptance_" + name);
  fs::remove_all(dir);
  return dir;
}

// ------------------------------------------------------------ scaling law

// Expected contact count for small r: each of the (1-p)λ healthy points is
// missed by all pλ infected points with probability (1 - r²)^{pλ}.
double closed_form(double lambda, double p, double r) {
  return (1 - p) * lambda * (1 - std::pow(1 - r * r, p * lambda));
}

struct Estimate {
  double mean = 0;
  double se = 0; // standard error of the mean
};

Estimate estimate(const std::vector<double> &xs) {
  double m = 0;
  for (double x : xs)
    m += x;
  m /= static_cast<double>(xs.size());
  double v = 0;
  for (double x : xs)
    v += (x - m) * (x - m);
  v /= static_cast<double>(xs.size() - 1);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

// The closed form ignores the disk boundary, which lowers real counts by a
// few percent; allow 5% for that plus 4 standard errors of sampling noise.
bool agrees(const Estimate &e, double expected) {
  return std::abs(e.mean - expected) <= 0.05 * expected + 4 * e.se;
}

// Independent Monte Carlo: Poisson count, rejection sampling in the square,
// all-pairs counting.
Estimate brute_force_mean(double lambda, double p, double r, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::bernoulli_distribution infected(p);
  std::poisson_distribution<int> count(lambda);
  std::vector<double> counts;
  for (int t = 0; t < trials; ++t) {
    double total = 0;
    const int n = count(rng);
    std::vector<std::pair<double, double>> pts;
    while (static_cast<int>(pts.size()) < n) {
      const double x = u(rng), y = u(rng);
      if (x * x + y * y <= 1)
        pts.emplace_back(x, y);
    }
    std::vector<char> inf(pts.size());
    for (auto &f : inf)
      f = infected(rng);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (inf[i])
        continue;
      for (std::size_t j = 0; j < pts.size(); ++j)
        if (inf[j] && std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second) <= r) {
          total += 1;
          break;
        }
    }
    counts.push_back(total);
  }
  return estimate(counts);
}

Verdict scaling_law() {
  constexpr std::size_t kTrials = 20000;
  constexpr double kTarget = (100.0 / 58.0) * (100.0 / 58.0);
  bool pass = true;
  std::string detail;
  double runtime = 0;
  for (double r : {0.02, 0.03}) {
    // the oracle itself is checked against brute force first
    const double cf_all = closed_form(100, 0.18, r), cf_smart = closed_form(58, 0.18, r);
    const auto mc_all = brute_force_mean(100, 0.18, r, 20000, 11);
    const auto mc_smart = brute_force_mean(58, 0.18, r, 20000, 12);
    const bool oracle_ok = agrees(mc_all, cf_all) && agrees(mc_smart, cf_smart);

    const auto cfg = ppp::scenario_config(ppp::bangladesh(), r, kTrials, 20200601);
    const auto t0 = Clock::now();
    const auto results = ppp::run_trials(cfg);
    runtime += seconds_since(t0);
    std::vector<double> all_counts, smart_counts;
    for (const auto &res : results) {
      all_counts.push_back(static_cast<double>(res.count_all));
      smart_counts.push_back(static_cast<double>(res.count_smart));
    }
    const auto all_est = estimate(all_counts), smart_est = estimate(smart_counts);
    const double all = all_est.mean, smart = smart_est.mean;
    const double ratio = all / smart;
    const bool ratio_ok = std::abs(ratio / kTarget - 1) <= 0.15;
    const bool engine_ok = agrees(all_est, cf_all) && agrees(smart_est, cf_smart);
    pass = pass && oracle_ok && ratio_ok && engine_ok;
    detail += fmt::format(
        "r={}: ratio {:.3f} (target {:.3f} ±15%), means {:.3f}/{:.3f} vs closed form {:.3f}/{:.3f}, "
        "brute force {:.3f}/{:.3f}; ",
        r, ratio, kTarget, all, smart, cf_all, cf_smart, mc_all.mean, mc_smart.mean);
  }
  pass = pass && runtime < 60.0;
  detail += fmt::format("{} trials per radius in {:.2f} s (limit 60 s)", kTrials, runtime);
  return {pass, detail};
}

// ----------------------------------------------------- percentage change

Verdict percentage_cells() {
  const struct {
    double all, smart, pct;
  } cells[] = {{19, 9, 111.11}, {22, 11, 100}, {19, 6, 216.67}, {20, 5, 300},
               {9, 5, 80},      {10, 4, 150},  {8, 5, 60},      {11, 3, 266.67}};
  bool pass = true;
  std::string detail;
  for (const auto &c : cells) {
    const auto pct = ppp::percentage_change(c.all, c.smart);
    const bool ok = pct && std::abs(*pct - c.pct) <= 0.01;
    pass = pass && ok;
    detail += fmt::format("({},{})->{:.2f} ", c.all, c.smart, pct.value_or(NAN));
  }
  return {pass, detail + "(tolerance 0.01)"};
}

// ------------------------------------------------------- covariance trend

Verdict covariance_trend() {
  constexpr std::size_t kTrials = 5000;
  const auto results = ppp::run_trials(ppp::scenario_config(ppp::bangladesh(), 0.03, kTrials, 424242));
  std::vector<double> all, smart;
  for (const auto &r : results) {
    if (r.cov_all)
      all.push_back(*r.cov_all);
    if (r.cov_smart)
      smart.push_back(*r.cov_smart);
  }
  const auto mean_var = [](const std::vector<double> &v) {
    double m = 0;
    for (double x : v)
      m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v)
      s += (x - m) * (x - m);
    return std::pair{m, s / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = mean_var(all);
  const auto [ms, vs] = mean_var(smart);
  // one-sided Welch z test, H1: mean |cov| at λ=100 < mean |cov| at λ=58
  const double z = (ms - ma) / std::sqrt(va / static_cast<double>(all.size()) +
                                         vs / static_cast<double>(smart.size()));
  constexpr double kZ99 = 2.3263;
  return {ma < ms && z > kZ99,
          fmt::format("mean |cov| {:.5f} (λ=100) vs {:.5f} (λ=58) over {} trials, z = {:.2f} "
                      "(critical {:.3f})",
                      ma, ms, kTrials, z, kZ99)};
}

// -------------------------------------------------------- country ordering

Verdict country_ordering() {
  constexpr std::size_t kTrials = 20000;
  std::map<std::string, double> pct;
  std::string detail;
  bool defined = true;
  for (const auto &c : ppp::country_presets()) {
    const auto s = ppp::run_scenario(c, 0.03, kTrials, 20200601);
    defined = defined && s.mean_pct_change.has_value();
    pct[c.code] = s.mean_pct_change.value_or(NAN);
    detail += fmt::format("{} {:.1f}% ", c.code, pct[c.code]);
  }
  const bool pass = defined && pct["in"] > pct["bd"] && pct["bd"] > pct["kr"];
  return {pass, detail + fmt::format("(percentage change of mean counts, r=0.03, {} trials each)", kTrials)};
}

// -------------------------------------------------------- join correctness

Verdict join_correctness() {
  Engine rng(5150);
  const auto t0 = Clock::now();
  int mismatches = 0;
  std::size_t events = 0;
  for (int i = 0; i < 200; ++i) {
    const auto inst =
        test::random_instance(rng, 500, i % 2 == 0 ? trace::CoordMode::Planar : trace::CoordMode::Geo);
    trace::SpatialIndex idx(inst.samples, inst.mode, inst.d, inst.d, inst.bucket_width);
    const auto fast = trace::find_contacts(inst.infected, idx, inst.d, inst.bucket_width);
    const auto slow = trace::brute_force_contacts(inst.infected, inst.samples, inst.d, inst.bucket_width);
    mismatches += fast == slow ? 0 : 1;
    events += fast.size();
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 30.0,
          fmt::format("200 instances, {} events, {} mismatches, {:.2f} s (limit 30 s)", events,
                      mismatches, t)};
}

// ------------------------------------------------- distributed equivalence

struct RoundResult {
  std::string csv;
  std::vector<std::string> log;
  bool equal_to_reference = false;
  std::size_t suspects = 0;
};

RoundResult trace_fixture(const fs::path &dir) {
  opnet::TraceParams params;
  params.distance = 10.0;
  const auto dep = opnet::load_fixtures(dir, params);
  opnet::Network net(dep, params);
  for (const auto &p : dep.positives)
    net.submit_positive(p);
  const auto store = net.run_trace_round();
  return {opnet::suspects_csv(store), net.trace_log(),
          store == opnet::centralized_suspects(dep, params, dep.positives), store.entries.size()};
}

Verdict distributed_equivalence() {
  bool pass = true;
  std::string detail;

  // golden fixture at the default 2 m
  {
    const auto dir = fs::path(CTRACE_FIXTURES) / "three_operators";
    opnet::TraceParams params;
    const auto dep = opnet::load_fixtures(dir, params);
    opnet::Network net(dep, params);
    for (const auto &p : dep.positives)
      net.submit_positive(p);
    const auto store = net.run_trace_round();
    const bool golden = opnet::suspects_csv(store) == slurp(dir / "golden_suspects.csv");
    const bool central = store == opnet::centralized_suspects(dep, params, dep.positives);
    pass = golden && central;
    detail += fmt::format("golden fixture: {} suspects, golden file {}, centralized {}; ",
                          store.entries.size(), golden ? "equal" : "DIFFERENT",
                          central ? "equal" : "DIFFERENT");
  }

  int unequal = 0, nondeterministic = 0;
  std::size_t suspects = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    RoundResult runs[2];
    std::string written[2];
    for (int k = 0; k < 2; ++k) {
      Engine rng(derive_seed(777, i, 0));
      const auto dep = test::random_deployment(rng, 1590000000);
      const auto dir = scratch(fmt::format("fixture_{}_{}", i, k));
      test::write_deployment(dep, dir);
      for (const auto &[id, data] : dep.operators)
        written[k] += slurp(dir / id / "samples.jsonl");
      runs[k] = trace_fixture(dir);
      fs::remove_all(dir);
    }
    unequal += runs[0].equal_to_reference ? 0 : 1;
    nondeterministic +=
        (runs[0].csv == runs[1].csv && runs[0].log == runs[1].log && written[0] == written[1]) ? 0 : 1;
    suspects += runs[0].suspects;
  }
  pass = pass && unequal == 0 && nondeterministic == 0;
  detail += fmt::format("50 random fixtures: {} suspects total, {} differ from centralized, "
                        "{} replays not byte-identical",
                        suspects, unequal, nondeterministic);
  return {pass, detail};
}

// ------------------------------------------------------- service durability

class AuditLog {
public:
  void add(const std::string &body) {
    std::lock_guard lock(mutex_);
    bodies_.push_back(body);
  }
  void add_number(const std::string &n) {
    std::lock_guard lock(mutex_);
    numbers_.insert(n.substr(n.front() == '+' ? 1 : 0));
  }
  // Violations: a known phone number or a location/number field in any body.
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    const std::set<std::string> banned_keys{"lat", "lon", "x", "y", "timestamp", "number", "numbers",
                                            "samples", "trajectory"};
    for (const auto &b : bodies_) {
      for (const auto &n : numbers_)
        if (b.find(n) != std::string::npos)
          out.push_back("number in response: " + b);
      json j;
      try {
        j = json::parse(b);
      } catch (const json::exception &) {
        out.push_back("non-JSON response: " + b);
        continue;
      }
      std::function<void(const json &)> walk = [&](const json &v) {
        if (v.is_object()) {
          for (const auto &[k, x] : v.items()) {
            if (banned_keys.contains(k))
              out.push_back("field '" + k + "' in response: " + b);
            walk(x);
          }
        } else if (v.is_array()) {
          for (const auto &x : v)
            walk(x);
        }
      };
      walk(j);
    }
    return out;
  }
  std::size_t size() const { return bodies_.size(); }

private:
  mutable std::mutex mutex_;
  std::vector<std::string> bodies_;
  std::set<std::string> numbers_;
};

struct Acked {
  std::map<std::string, std::string> results; // record id -> acknowledged result
  std::map<std::string, std::string> tokens;  // token -> number
  std::mutex mutex;
};

// One client thread issuing records, results, registrations and
// questionnaires until `stop` is set or the server goes away.
void drive_load(int port, int thread, int max_ops, const std::atomic<bool> &stop, Acked &acked,
                AuditLog &audit) {
  httplib::Client c("127.0.0.1", port);
  c.set_connection_timeout(2);
  c.set_read_timeout(5);
  Engine rng(derive_seed(99, static_cast<std::uint64_t>(thread), 1));
  std::uniform_int_distribution<int> cell(0, 4), digit(0, 99999999);
  const auto post = [&](const std::string &path, const json &body, const std::string &token = "") {
    httplib::Headers h;
    if (!token.empty())
      h.emplace("X-Registration-Token", token);
    auto r = c.Post(path, h, body.dump(), "application/json");
    if (r)
      audit.add(r->body);
    return r;
  };

  for (int i = 0; i < max_ops && !stop; ++i) {
    const std::string number = fmt::format("+88016{:08d}", digit(rng));
    audit.add_number(number);
    const json rec{{"request_id", fmt::format("t{}-{}-{}", thread, i, max_ops)},
                   {"address", "test center"},
                   {"numbers", {number}},
                   {"lat", 23.805 + 0.01 * cell(rng)},
                   {"lon", 90.405 + 0.01 * cell(rng)}};
    auto r = post("/v1/tests", rec);
    if (!r)
      return;
    if (r->status != 201 && r->status != 200)
      continue;
    const auto id = json::parse(r->body).at("record_id").get<std::string>();
    {
      std::lock_guard lock(acked.mutex);
      acked.results[id] = "pending";
    }
    const bool positive = i % 3 != 2;
    r = post("/v1/tests/" + id + (positive ? "/positive" : "/negative"), json::object());
    if (!r)
      return;
    if (r->status == 200) {
      std::lock_guard lock(acked.mutex);
      acked.results[id] = positive ? "positive" : "negative";
    }
    if (i % 5 == 0) {
      r = post("/v1/users", json{{"number", number}});
      if (!r)
        return;
      if (r->status == 201) {
        const auto token = json::parse(r->body).at("token").get<std::string>();
        {
          std::lock_guard lock(acked.mutex);
          acked.tokens[token] = number;
        }
        r = post("/v1/questionnaire", json{{"answers", json::array({true, false, false, false, false,
                                                                     false, false, false, true})}},
                 token);
        if (!r)
          return;
        if (auto s = c.Get("/v1/status", {{"X-Registration-Token", token}}))
          audit.add(s->body);
        else
          return;
      }
    }
    if (auto a = c.Get("/v1/areas?bbox=23.80,90.40,23.86,90.46"))
      audit.add(a->body);
  }
}

Verdict service_durability() {
  const auto dir = scratch("durability");
  const auto fixtures = fs::path(CTRACE_FIXTURES) / "three_operators";
  const std::vector<std::string> args{"serve", "--port", "0", "--data-dir", dir.string(),
                                      "--fixtures", fixtures.string(), "--rules",
                                      (fs::path(CTRACE_DATA) / "triage_rules.json").string()};
  AuditLog audit;
  for (const auto &e : fs::directory_iterator(fixtures))
    if (e.is_directory())
      for (const auto &s : trace::read_samples_file(e.path() / "samples.jsonl").accepted)
        audit.add_number(s.subscriber.str());

  Acked acked;
  std::map<std::string, json> quiesced; // record id -> GET body before phase two
  json quiesced_areas;
  int kill_status = 0;
  std::string failure;
  {
    acceptance::ServerProcess server;
    const int port = server.start(CTRACE_BINARY, args);
    std::atomic<bool> stop{false};

    // phase one: load, then a quiet checkpoint read through the API
    {
      std::vector<std::jthread> threads;
      for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] { drive_load(port, t, 40, stop, acked, audit); });
    }
    httplib::Client c("127.0.0.1", port);
    for (const auto &[id, result] : acked.results) {
      auto r = c.Get("/v1/tests/" + id);
      if (!r || r->status != 200) {
        failure = "checkpoint read of " + id + " failed";
        break;
      }
      audit.add(r->body);
      quiesced[id] = json::parse(r->body);
    }
    if (auto r = c.Get("/v1/areas")) {
      audit.add(r->body);
      quiesced_areas = json::parse(r->body);
    }

    // phase two: kill mid-load
    {
      std::vector<std::jthread> threads;
      for (int t = 4; t < 8; ++t)
        threads.emplace_back([&, t] { drive_load(port, t, 100000, stop, acked, audit); });
      std::this_thread::sleep_for(std::chrono::milliseconds(400));
      kill_status = server.kill(SIGKILL);
      stop = true;
    }
  }
  if (!failure.empty())
    return {false, failure};
  const bool killed = WIFSIGNALED(kill_status) && WTERMSIG(kill_status) == SIGKILL;

  const auto log = dir / "registry.log";
  const auto replayed = registry::Registry::replay(log);

  // every acknowledged write survived
  std::size_t lost = 0;
  for (const auto &[id, result] : acked.results) {
    auto it = replayed.records.find(id);
    if (it == replayed.records.end()) {
      ++lost;
      continue;
    }
    const std::string got = registry::to_string(it->second.result);
    if (result != "pending" && got != result)
      ++lost;
  }
  for (const auto &[token, number] : acked.tokens) {
    auto it = replayed.tokens.find(PhoneNumber::parse(number));
    if (it == replayed.tokens.end() || it->second != token)
      ++lost;
  }

  // restart and compare the served state with the log fold
  std::size_t mismatched = 0;
  std::size_t checkpoint_diffs = 0;
  bool areas_equal = false;
  {
    acceptance::ServerProcess server;
    const int port = server.start(CTRACE_BINARY, args);
    httplib::Client c("127.0.0.1", port);
    for (const auto &[id, rec] : replayed.records) {
      auto r = c.Get("/v1/tests/" + id);
      if (!r || r->status != 200) {
        ++mismatched;
        continue;
      }
      audit.add(r->body);
      const auto j = json::parse(r->body);
      if (j.at("result") != registry::to_string(rec.result) ||
          j.at("area_cell") != (rec.area_cell ? json(rec.area_cell->id()) : json(nullptr)) ||
          j.at("recorded_at") != rec.recorded_at)
        ++mismatched;
      if (auto q = quiesced.find(id); q != quiesced.end() && q->second != j)
        ++checkpoint_diffs;
    }
    json expected_areas = json::array();
    for (const auto &a : replayed.area_counts)
      expected_areas.push_back(a.cell.id() + ":" + std::to_string(a.positive_count));
    json served_areas = json::array();
    if (auto r = c.Get("/v1/areas")) {
      audit.add(r->body);
      for (const auto &a : json::parse(r->body))
        served_areas.push_back(a.at("cell").get<std::string>() + ":" +
                               std::to_string(a.at("positive_count").get<std::size_t>()));
    }
    areas_equal = served_areas == expected_areas && !served_areas.empty();
    for (const auto &[token, number] : acked.tokens) {
      auto r = c.Get("/v1/status", {{"X-Registration-Token", token}});
      if (!r || r->status != 200)
        ++mismatched;
      else
        audit.add(r->body);
    }
    server.kill(SIGTERM);
  }

  // reopening the log in-process folds to the same state
  registry::Registry reopened(dir);
  const bool fold_equal = reopened.snapshot() == replayed &&
                          reopened.recompute_area_counts() == replayed.area_counts;
  const bool checkpoint_kept = quiesced.size() > 0 && checkpoint_diffs == 0 &&
                               quiesced_areas.is_array() && !quiesced_areas.empty();

  const auto violations = audit.violations();
  const bool pass = killed && lost == 0 && mismatched == 0 && areas_equal && fold_equal &&
                    checkpoint_kept && violations.empty();
  std::string detail = fmt::format(
      "{} acknowledged records ({} in the log), {} tokens; killed with SIGKILL: {}; "
      "lost acknowledged writes: {}; restarted server vs log fold: {} mismatches, areas {}; "
      "checkpointed records changed: {}; reopen fold equal: {}; privacy audit: {} responses, "
      "{} violations",
      acked.results.size(), replayed.records.size(), acked.tokens.size(), killed ? "yes" : "no", lost,
      mismatched, areas_equal ? "equal" : "DIFFERENT", checkpoint_diffs, fold_equal ? "yes" : "no",
      audit.size(), violations.size());
  if (!violations.empty())
    detail += "; first: " + violations.front().substr(0, 200);
  return {pass, detail};
}

// --------------------------------------------------------------- triage

Verdict triage_determinism() {
  using triage::Recommendation;
  const auto shipped = triage::RuleTable::load(fs::path(CTRACE_DATA) / "triage_rules.json");
  bool pass = true;
  std::string detail;
  for (const auto *table : {&shipped}) {
    const auto yes = [](std::initializer_list<const char *> ids) {
      triage::Answers a{};
      for (const char *id : ids)
        a[triage::question_index(id)] = true;
      return a;
    };
    const auto none = triage::score_questionnaire(triage::Answers{}, *table);
    const auto a = triage::score_questionnaire(yes({"fever", "cough"}), *table);
    const auto b = triage::score_questionnaire(
        yes({"runny_nose", "hoarse_voice", "fatigue", "gastrointestinal"}), *table);
    const bool fixtures = none.recommendation == Recommendation::SelfMonitor && none.yes_count == 0 &&
                          a.recommendation == Recommendation::TestAdvised &&
                          b.recommendation == Recommendation::TestAdvised && b.yes_count == 4;
    pass = pass && fixtures;
    detail += fmt::format("forced fixtures {}; ", fixtures ? "ok" : "WRONG");

    int violations = 0, advised = 0;
    for (unsigned bits = 0; bits < 512; ++bits) {
      triage::Answers ans{};
      for (std::size_t i = 0; i < triage::kQuestionCount; ++i)
        ans[i] = (bits >> i) & 1u;
      const auto r = triage::score_questionnaire(ans, *table);
      if (!(r == triage::score_questionnaire(ans, *table)))
        ++violations;
      if (r.recommendation != Recommendation::TestAdvised)
        continue;
      ++advised;
      for (std::size_t i = 0; i < triage::kQuestionCount; ++i) {
        if (ans[i])
          continue;
        auto flipped = ans;
        flipped[i] = true;
        if (triage::score_questionnaire(flipped, *table).recommendation != Recommendation::TestAdvised)
          ++violations;
      }
    }
    pass = pass && violations == 0;
    detail += fmt::format("512 vectors, {} test_advised, {} monotonicity violations", advised, violations);
  }
  return {pass, detail};
}

} // namespace

int main() {
  const std::pair<const char *, Verdict (*)()> criteria[] = {
      {"scaling law", scaling_law},
      {"percentage change cells", percentage_cells},
      {"covariance trend", covariance_trend},
      {"country ordering", country_ordering},
      {"join correctness", join_correctness},
      {"distributed equivalence", distributed_equivalence},
      {"service durability", service_durability},
      {"triage determinism", triage_determinism},
  };
  int failed = 0;
  for (const auto &[name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception &e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", std::size(criteria) - failed, std::size(criteria))
            << std::endl;
  return failed == 0 ? 0 : 1;
}
