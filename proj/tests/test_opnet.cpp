#include <doctest.h>

#include <json.hpp>

#include "ctrace/error.hpp"
#include "ctrace/opnet.hpp"
#include "test_support.hpp"

using namespace ctrace;
using namespace ctrace::opnet;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = fs::path(CTRACE_FIXTURES) / "three_operators";
constexpr std::int64_t T0 = 1590000000;

PhoneNumber pn(const char *s) { return PhoneNumber::parse(s); }

struct Loaded {
  TraceParams params;
  Deployment dep;
  FixtureReport report;
};

Loaded load() {
  Loaded l;
  l.dep = load_fixtures(kFixture, l.params, std::nullopt, &l.report);
  return l;
}

std::vector<PhoneNumber> numbers(const ZoneResponse &r) {
  std::vector<PhoneNumber> out;
  for (const auto &m : r.matches)
    out.push_back(m.number);
  return out;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Minimal bus for driving the tracer by hand.
struct Queue : Outbox {
  std::deque<Envelope> q;
  void send(Envelope env) override { q.push_back(std::move(env)); }
};

} // namespace

TEST_CASE("load_fixtures") {
  const auto l = load();
  CHECK(l.params.now == T0 + 3250);
  CHECK(l.dep.operators.size() == 3);
  CHECK(l.report.dropped_outside_window == 1);
  CHECK(l.report.accepted == 20);
  CHECK(l.dep.positives == std::vector<PhoneNumber>{pn("+8801711000001"), pn("+8801711000003")});
  CHECK(l.dep.operators.at("op-a").extra_subscribers ==
        std::vector<PhoneNumber>{pn("+8801711000004")});

  TraceParams p;
  CHECK_THROWS_AS(load_fixtures(kFixture / "missing", p), Error);
}

TEST_CASE("TraceParams validation") {
  TraceParams p;
  CHECK_NOTHROW(p.validate());
  p.distance = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.bucket_width = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.threshold = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.timeout_steps = 0;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("operator mobility requests") {
  auto l = load();
  const auto &a = l.dep.operators.at("op-a");
  OperatorNode node("op-a", l.dep.mode, a.samples, a.extra_subscribers, l.params);
  const auto window = l.params.window();

  const auto r1 = node.handle_mobility_request({7, pn("+8801711000001"), window});
  CHECK(r1.workflow == 7);
  CHECK(r1.found);
  REQUIRE(r1.trajectory.samples.size() == 4);
  CHECK(r1.trajectory.samples.front().timestamp == T0);

  const auto r2 = node.handle_mobility_request({1, pn("+8801711000004"), window});
  CHECK(r2.found);
  CHECK(r2.trajectory.samples.empty());

  const auto r3 = node.handle_mobility_request({1, pn("+8801811000001"), window});
  CHECK_FALSE(r3.found);
  CHECK(r3.trajectory.samples.empty());

  // clipped to the requested window
  const auto r4 = node.handle_mobility_request({1, pn("+8801711000001"), {T0 + 1, T0 + 1200}});
  CHECK(r4.trajectory.samples.size() == 2);
}

TEST_CASE("operator zone queries match hand-enumerated contacts") {
  auto l = load();
  std::map<std::string, std::unique_ptr<OperatorNode>> nodes;
  for (const auto &[id, data] : l.dep.operators)
    nodes[id] = std::make_unique<OperatorNode>(id, l.dep.mode, data.samples,
                                               data.extra_subscribers, l.params);
  const auto traj = nodes.at("op-a")->handle_mobility_request(
      {1, pn("+8801711000001"), l.params.window()}).trajectory;
  ZoneQuery q{1, pn("+8801711000001"), {}, 2.0, 300};
  for (const auto &s : traj.samples)
    q.zone.push_back({time_bucket(s.timestamp).index, s.position});

  const auto a = nodes.at("op-a")->handle_zone_query(q);
  CHECK(a.operator_id == "op-a");
  CHECK(numbers(a) == std::vector<PhoneNumber>{pn("+8801711000002"), pn("+8801711000003")});

  const auto b = nodes.at("op-b")->handle_zone_query(q);
  CHECK(numbers(b) == std::vector<PhoneNumber>{pn("+8801811000001"), pn("+8801811000002")});
  REQUIRE(b.matches.size() == 2);
  CHECK(b.matches[0].samples.size() == 2);
  CHECK(b.matches[1].samples.size() == 1);
  CHECK(b.matches[1].samples[0].timestamp == T0 + 1250);

  const auto c = nodes.at("op-c")->handle_zone_query(q);
  REQUIRE(c.matches.size() == 1);
  CHECK(c.matches[0].number == pn("+8801911000001"));
  CHECK(c.matches[0].samples.size() == 1);
  CHECK(c.matches[0].samples[0].timestamp == T0 + 1810);

  SUBCASE("a larger query distance widens the match") {
    auto wide = q;
    wide.distance = 4.0;
    const auto b4 = nodes.at("op-b")->handle_zone_query(wide);
    REQUIRE(b4.matches.size() == 2);
    CHECK(b4.matches[1].samples.size() == 2); // t = T0 + 120 at 3.3 m now counts
  }
  SUBCASE("errors") {
    auto empty = q;
    empty.zone.clear();
    CHECK_THROWS_AS(nodes.at("op-a")->handle_zone_query(empty), Error);
    auto flat = q;
    flat.zone = {{0, PlanarPoint{0, 0}}};
    try {
      nodes.at("op-a")->handle_zone_query(flat);
      FAIL("expected mode mismatch");
    } catch (const Error &e) {
      CHECK(e.kind() == ErrorKind::ModeMismatch);
    }
  }
}

TEST_CASE("submit_positive") {
  auto l = load();
  Network net(l.dep, l.params);
  CHECK(net.submit_positive(pn("+8801711000001")) == 1);
  try {
    net.submit_positive(pn("+8801711000001"));
    FAIL("expected duplicate");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::DuplicateWorkflow);
  }
  try {
    net.submit_positive(pn("+8801599999999"));
    FAIL("expected unknown subscriber");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::UnknownSubscriber);
  }
  net.run_trace_round();
  // a finished workflow can be resubmitted
  CHECK(net.submit_positive(pn("+8801711000001")) == 2);
}

TEST_CASE("run_trace_round") {
  auto l = load();

  SUBCASE("no workflows is a no-op") {
    Network net(l.dep, l.params);
    CHECK(net.run_trace_round().entries.empty());
    CHECK(net.trace_log().empty());
    CHECK(net.steps() == 0);
  }

  SUBCASE("matches the golden store and the centralized reference") {
    Network net(l.dep, l.params);
    for (const auto &p : l.dep.positives)
      net.submit_positive(p);
    const auto store = net.run_trace_round();
    CHECK(suspects_csv(store) == slurp(kFixture / "golden_suspects.csv"));
    CHECK(store == centralized_suspects(l.dep, l.params, l.dep.positives));
    for (const auto &[id, wf] : net.central().workflows()) {
      CHECK(wf.phase == Phase::SuspectsStored);
      CHECK_FALSE(wf.partial_coverage);
    }
  }

  SUBCASE("a positive with no samples produces no suspects") {
    Network net(l.dep, l.params);
    net.submit_positive(pn("+8801711000004"));
    CHECK(net.run_trace_round().entries.empty());
    const auto &wf = net.central().workflows().at(1);
    CHECK(wf.mobility_found);
    CHECK_FALSE(wf.partial_coverage);
    for (const auto &[op, c] : wf.coverage)
      CHECK(c == Coverage::Skipped);
  }

  SUBCASE("replays are byte-identical") {
    std::vector<std::string> logs[2];
    std::string csv[2];
    for (int i = 0; i < 2; ++i) {
      Network net(l.dep, l.params);
      for (const auto &p : l.dep.positives)
        net.submit_positive(p);
      csv[i] = suspects_csv(net.run_trace_round());
      logs[i] = net.trace_log();
    }
    CHECK(logs[0] == logs[1]);
    CHECK(csv[0] == csv[1]);
  }

  SUBCASE("a silent operator times out and the store is partial") {
    auto params = l.params;
    params.timeout_steps = 50;
    Network net(l.dep, params);
    net.set_silent("op-c", true);
    for (const auto &p : l.dep.positives)
      net.submit_positive(p);
    const auto store = net.run_trace_round();
    CHECK(net.steps() >= 50);
    for (const auto &[id, wf] : net.central().workflows()) {
      CHECK(wf.phase == Phase::SuspectsStored);
      CHECK(wf.partial_coverage);
      CHECK(wf.coverage.at("op-c") == Coverage::TimedOut);
      CHECK(wf.coverage.at("op-b") == Coverage::Responded);
    }
    CHECK(store.find(pn("+8801911000001")) == nullptr);
    CHECK(store.find(pn("+8801811000001")) != nullptr);
  }

  SUBCASE("a silent owner times out before the broadcast") {
    auto params = l.params;
    params.timeout_steps = 20;
    Network net(l.dep, params);
    net.set_silent("op-a", true);
    net.submit_positive(pn("+8801711000001"));
    CHECK(net.run_trace_round().entries.empty());
    const auto &wf = net.central().workflows().at(1);
    CHECK(wf.partial_coverage);
    CHECK(wf.coverage.at("op-a") == Coverage::TimedOut);
  }

  SUBCASE("central is a reserved operator id") {
    auto dep = l.dep;
    dep.operators[kCentralId] = {};
    CHECK_THROWS_AS(Network(dep, l.params), Error);
  }
}

TEST_CASE("trace log respects data locality") {
  auto l = load();
  Network net(l.dep, l.params);
  for (const auto &p : l.dep.positives)
    net.submit_positive(p);
  net.run_trace_round();

  std::map<std::string, std::string> owner;
  for (const auto &[id, data] : l.dep.operators) {
    for (const auto &s : data.samples)
      owner[s.subscriber.str()] = id;
    for (const auto &n : data.extra_subscribers)
      owner[n.str()] = id;
  }
  REQUIRE_FALSE(net.trace_log().empty());
  for (const auto &line : net.trace_log()) {
    const auto j = nlohmann::json::parse(line);
    const auto from = j.at("from").get<std::string>();
    const auto to = j.at("to").get<std::string>();
    const auto type = j.at("type").get<std::string>();
    // operators only ever talk to the central tracer
    CHECK((from == kCentralId) != (to == kCentralId));
    const auto &body = j.at("body");
    if (type == "mobility_response") {
      CHECK(owner.at(body.at("infected_number").get<std::string>()) == from);
      for (const auto &s : body.at("trajectory"))
        CHECK(owner.at(s.at("subscriber").get<std::string>()) == from);
    } else if (type == "zone_response") {
      for (const auto &m : body.at("matches")) {
        CHECK(owner.at(m.at("number").get<std::string>()) == from);
        for (const auto &s : m.at("samples"))
          CHECK(owner.at(s.at("subscriber").get<std::string>()) == from);
      }
    } else if (type == "zone_query") {
      // the only foreign data an operator sees is the positive's own zone
      CHECK(body.at("zone").size() > 0);
      CHECK_FALSE(body.contains("trajectory"));
    }
  }
}

TEST_CASE("workflow phases never regress") {
  auto l = load();
  std::map<PhoneNumber, std::string> routing;
  std::vector<std::string> ops;
  std::map<std::string, std::unique_ptr<OperatorNode>> nodes;
  for (const auto &[id, data] : l.dep.operators) {
    ops.push_back(id);
    nodes[id] = std::make_unique<OperatorNode>(id, l.dep.mode, data.samples,
                                               data.extra_subscribers, l.params);
    for (const auto &[number, t] : nodes[id]->directory())
      routing[number] = id;
  }
  CentralTracer central(routing, ops, l.params);
  Queue bus;
  std::uint64_t step = 0;
  for (const auto &p : l.dep.positives)
    central.submit_positive(p, bus, step);

  std::map<std::uint64_t, Phase> last;
  while (central.has_active_workflows()) {
    ++step;
    REQUIRE(step < 10000);
    if (!bus.q.empty()) {
      auto env = std::move(bus.q.front());
      bus.q.pop_front();
      if (env.to == kCentralId) {
        central.handle(env, bus, step);
      } else {
        const auto &node = *nodes.at(env.to);
        if (const auto *req = std::get_if<MobilityRequest>(&env.body))
          bus.send({env.to, kCentralId, node.handle_mobility_request(*req)});
        else if (const auto *q = std::get_if<ZoneQuery>(&env.body))
          bus.send({env.to, kCentralId, node.handle_zone_query(*q)});
      }
    }
    central.tick(bus, step);
    for (const auto &[id, wf] : central.workflows()) {
      if (last.contains(id))
        CHECK(static_cast<int>(wf.phase) >= static_cast<int>(last[id]));
      last[id] = wf.phase;
    }
  }
  CHECK(central.suspects() == centralized_suspects(l.dep, l.params, l.dep.positives));
}

TEST_CASE("distributed equals centralized on random deployments") {
  Engine rng(99);
  for (int i = 0; i < 20; ++i) {
    const auto dep = test::random_deployment(rng, T0);
    TraceParams params;
    params.now = T0;
    params.distance = 10.0;
    Network net(dep, params);
    for (const auto &p : dep.positives)
      net.submit_positive(p);
    CHECK(net.run_trace_round() == centralized_suspects(dep, params, dep.positives));
  }
}
