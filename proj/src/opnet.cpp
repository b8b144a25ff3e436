#include "ctrace/opnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ctrace/error.hpp"

namespace ctrace::opnet {

namespace {

using nlohmann::json;

json position_json(const Position &p) {
  if (const auto *pt = std::get_if<PlanarPoint>(&p))
    return json{{"x", pt->x}, {"y", pt->y}};
  const auto &g = std::get<GeoCoordinate>(p);
  return json{{"lat", g.lat()}, {"lon", g.lon()}};
}

json sample_json(const LocationSample &s) {
  json j = position_json(s.position);
  j["subscriber"] = s.subscriber.str();
  j["timestamp"] = s.timestamp;
  return j;
}

json body_json(const Message &m) {
  return std::visit(
      [](const auto &msg) -> json {
        using T = std::decay_t<decltype(msg)>;
        json j;
        j["workflow"] = msg.workflow;
        if constexpr (std::is_same_v<T, MobilityRequest>) {
          j["infected_number"] = msg.infected_number.str();
          j["window"] = {msg.window.start, msg.window.end};
        } else if constexpr (std::is_same_v<T, MobilityResponse>) {
          j["infected_number"] = msg.infected_number.str();
          j["found"] = msg.found;
          j["trajectory"] = json::array();
          for (const auto &s : msg.trajectory.samples)
            j["trajectory"].push_back(sample_json(s));
        } else if constexpr (std::is_same_v<T, ZoneQuery>) {
          j["infected_number"] = msg.infected_number.str();
          j["distance"] = msg.distance;
          j["bucket_width"] = msg.bucket_width;
          j["zone"] = json::array();
          for (const auto &z : msg.zone) {
            json e = position_json(z.position);
            e["bucket"] = z.bucket;
            j["zone"].push_back(std::move(e));
          }
        } else {
          j["operator"] = msg.operator_id;
          j["matches"] = json::array();
          for (const auto &m : msg.matches) {
            json e;
            e["number"] = m.number.str();
            e["samples"] = json::array();
            for (const auto &s : m.samples)
              e["samples"].push_back(sample_json(s));
            j["matches"].push_back(std::move(e));
          }
        }
        return j;
      },
      m);
}

} // namespace

void TraceParams::validate() const {
  if (!std::isfinite(distance) || distance <= 0.0)
    throw Error(ErrorKind::InvalidArgument, "contact distance must be > 0");
  if (bucket_width <= 0)
    throw Error(ErrorKind::InvalidArgument, "bucket width must be > 0");
  if (threshold == 0)
    throw Error(ErrorKind::InvalidArgument, "multiplicity threshold must be >= 1");
  if (lookback <= 0 || lookback > trace::kLookbackSeconds)
    throw Error(ErrorKind::InvalidArgument, "lookback must lie in (0, 7 days]");
  if (timeout_steps == 0)
    throw Error(ErrorKind::InvalidArgument, "timeout must be >= 1 step");
}

const char *message_type(const Message &m) noexcept {
  switch (m.index()) {
  case 0: return "mobility_request";
  case 1: return "mobility_response";
  case 2: return "zone_query";
  default: return "zone_response";
  }
}

std::string to_log_line(std::uint64_t step, const Envelope &env, bool dropped) {
  json j;
  j["step"] = step;
  j["from"] = env.from;
  j["to"] = env.to;
  j["type"] = message_type(env.body);
  j["dropped"] = dropped;
  j["body"] = body_json(env.body);
  return j.dump();
}

const char *to_string(Phase phase) noexcept {
  switch (phase) {
  case Phase::Requested: return "requested";
  case Phase::MobilityReceived: return "mobility-received";
  case Phase::ZonesBroadcast: return "zones-broadcast";
  case Phase::ResponsesCollected: return "responses-collected";
  case Phase::SuspectsStored: return "suspects-stored";
  }
  return "?";
}

// ---------------------------------------------------------------- operator

OperatorNode::OperatorNode(std::string id, CoordMode mode, std::vector<LocationSample> samples,
                           const std::vector<PhoneNumber> &extra_subscribers,
                           const TraceParams &params)
    : id_(std::move(id)), mode_(mode) {
  for (const auto &number : extra_subscribers)
    directory_[number].subscriber = number;
  for (auto &t : trace::group_trajectories(samples)) {
    t.validate();
    directory_[t.subscriber] = std::move(t);
  }
  index_ = std::make_unique<trace::SpatialIndex>(std::move(samples), mode_, params.distance,
                                                 params.distance, params.bucket_width);
}

MobilityResponse OperatorNode::handle_mobility_request(const MobilityRequest &request) const {
  MobilityResponse resp{request.workflow, request.infected_number, false, {}};
  resp.trajectory.subscriber = request.infected_number;
  auto it = directory_.find(request.infected_number);
  if (it == directory_.end())
    return resp;
  resp.found = true;
  for (const auto &s : it->second.samples)
    if (request.window.contains(s.timestamp))
      resp.trajectory.samples.push_back(s);
  return resp;
}

ZoneResponse OperatorNode::handle_zone_query(const ZoneQuery &query) const {
  if (query.zone.empty())
    throw Error(ErrorKind::Validation, "zone query without zone entries");
  for (const auto &z : query.zone)
    if (trace::mode_of(z.position) != mode_)
      throw Error(ErrorKind::ModeMismatch, "zone query in " +
                                               std::string(trace::to_string(
                                                   trace::mode_of(z.position))) +
                                               " mode sent to " + trace::to_string(mode_) +
                                               " operator " + id_);

  const trace::SpatialIndex *index = index_.get();
  std::unique_ptr<trace::SpatialIndex> adhoc;
  if (query.distance > index->cell_size() || query.bucket_width != index->bucket_width()) {
    adhoc = std::make_unique<trace::SpatialIndex>(index->samples(), mode_, query.distance,
                                                  query.distance, query.bucket_width);
    index = adhoc.get();
  }

  std::map<PhoneNumber, std::set<std::size_t>> hits;
  for (const auto &z : query.zone)
    for (std::size_t i : index->radius_query(z.bucket, z.position, query.distance)) {
      const auto &s = index->samples()[i];
      if (s.subscriber != query.infected_number)
        hits[s.subscriber].insert(i);
    }

  ZoneResponse resp{query.workflow, id_, {}};
  for (const auto &[number, idx] : hits) {
    ZoneMatch m{number, {}};
    for (std::size_t i : idx)
      m.samples.push_back(index->samples()[i]);
    std::sort(m.samples.begin(), m.samples.end(),
              [](const auto &a, const auto &b) { return a.timestamp < b.timestamp; });
    resp.matches.push_back(std::move(m));
  }
  return resp;
}

// ----------------------------------------------------------------- central

CentralTracer::CentralTracer(std::map<PhoneNumber, std::string> routing,
                             std::vector<std::string> operators, const TraceParams &params)
    : routing_(std::move(routing)), operators_(std::move(operators)), params_(params) {
  params_.validate();
  std::sort(operators_.begin(), operators_.end());
}

std::uint64_t CentralTracer::submit_positive(const PhoneNumber &number, Outbox &out,
                                             std::uint64_t step) {
  auto route = routing_.find(number);
  if (route == routing_.end())
    throw Error(ErrorKind::UnknownSubscriber,
                "number " + number.str() + " is not registered with any operator");
  for (const auto &[id, wf] : workflows_)
    if (wf.active() && wf.infected_number == number)
      throw Error(ErrorKind::DuplicateWorkflow,
                  "workflow " + std::to_string(id) + " for " + number.str() + " is still active");

  WorkflowState wf;
  wf.id = next_id_++;
  wf.infected_number = number;
  wf.owner = route->second;
  wf.window = params_.window();
  wf.waiting_since = step;
  positives_.insert(number);
  out.send(Envelope{kCentralId, wf.owner, MobilityRequest{wf.id, number, wf.window}});
  const auto id = wf.id;
  workflows_.emplace(id, std::move(wf));
  return id;
}

void CentralTracer::handle(const Envelope &env, Outbox &out, std::uint64_t step) {
  if (const auto *resp = std::get_if<MobilityResponse>(&env.body)) {
    auto it = workflows_.find(resp->workflow);
    if (it == workflows_.end() || it->second.phase != Phase::Requested)
      return; // late reply after a timeout
    auto &wf = it->second;
    wf.mobility_found = resp->found;
    wf.trajectory = resp->trajectory;
    wf.phase = Phase::MobilityReceived;
    broadcast_zones(wf, out, step);
  } else if (const auto *resp = std::get_if<ZoneResponse>(&env.body)) {
    auto it = workflows_.find(resp->workflow);
    if (it == workflows_.end() || it->second.phase != Phase::ZonesBroadcast)
      return;
    auto &wf = it->second;
    auto cov = wf.coverage.find(resp->operator_id);
    if (cov == wf.coverage.end() || cov->second != Coverage::Pending)
      return;
    cov->second = Coverage::Responded;
    wf.responses[resp->operator_id] = *resp;
    maybe_finish(wf);
  }
}

void CentralTracer::broadcast_zones(WorkflowState &wf, Outbox &out, std::uint64_t step) {
  for (const auto &op : operators_)
    wf.coverage[op] = Coverage::Skipped;
  if (!wf.trajectory.samples.empty()) {
    ZoneQuery q{wf.id, wf.infected_number, {}, params_.distance, params_.bucket_width};
    for (const auto &s : wf.trajectory.samples)
      q.zone.push_back({time_bucket(s.timestamp, params_.bucket_width).index, s.position});
    for (const auto &op : operators_) {
      wf.coverage[op] = Coverage::Pending;
      out.send(Envelope{kCentralId, op, q});
    }
  }
  wf.waiting_since = step;
  wf.phase = Phase::ZonesBroadcast;
  maybe_finish(wf);
}

void CentralTracer::maybe_finish(WorkflowState &wf) {
  for (const auto &[op, c] : wf.coverage)
    if (c == Coverage::Pending)
      return;
  wf.phase = Phase::ResponsesCollected;

  std::vector<LocationSample> matched;
  for (const auto &[op, resp] : wf.responses)
    for (const auto &m : resp.matches)
      matched.insert(matched.end(), m.samples.begin(), m.samples.end());

  std::vector<trace::ContactEvent> events;
  if (!wf.trajectory.samples.empty()) {
    const CoordMode mode = wf.trajectory.samples.front().mode();
    trace::SpatialIndex index(std::move(matched), mode, params_.distance, params_.distance,
                              params_.bucket_width);
    const Trajectory infected[] = {wf.trajectory};
    events = trace::find_contacts(infected, index, params_.distance, params_.bucket_width);
  }
  events_by_infected_[wf.infected_number] = std::move(events);
  wf.phase = Phase::SuspectsStored;
}

void CentralTracer::tick(Outbox &out, std::uint64_t step) {
  for (auto &[id, wf] : workflows_) {
    if (!wf.active() || step - wf.waiting_since < params_.timeout_steps)
      continue;
    if (wf.phase == Phase::Requested) {
      wf.partial_coverage = true;
      wf.trajectory = Trajectory{wf.infected_number, {}};
      wf.phase = Phase::MobilityReceived;
      broadcast_zones(wf, out, step);
      wf.coverage[wf.owner] = Coverage::TimedOut;
    } else if (wf.phase == Phase::ZonesBroadcast) {
      for (auto &[op, c] : wf.coverage)
        if (c == Coverage::Pending) {
          c = Coverage::TimedOut;
          wf.partial_coverage = true;
        }
      maybe_finish(wf);
    }
  }
}

bool CentralTracer::has_active_workflows() const {
  return std::any_of(workflows_.begin(), workflows_.end(),
                     [](const auto &kv) { return kv.second.active(); });
}

SuspectList CentralTracer::suspects() const {
  std::vector<trace::ContactEvent> events;
  for (const auto &[number, evs] : events_by_infected_)
    for (const auto &ev : evs)
      if (!positives_.contains(ev.contact_number))
        events.push_back(ev);
  trace::sort_events(events);
  return trace::aggregate_suspects(events, params_.threshold);
}

// -------------------------------------------------------------- deployment

void Deployment::validate() const {
  std::map<PhoneNumber, std::string> owner;
  const auto claim = [&](const PhoneNumber &n, const std::string &op) {
    auto [it, inserted] = owner.emplace(n, op);
    if (!inserted && it->second != op)
      throw Error(ErrorKind::Validation, "number " + n.str() + " belongs to both " +
                                             it->second + " and " + op);
  };
  for (const auto &[op, data] : operators) {
    for (const auto &s : data.samples) {
      if (s.mode() != mode)
        throw Error(ErrorKind::ModeMismatch, "operator " + op + " has a " +
                                                 trace::to_string(s.mode()) + " sample in a " +
                                                 trace::to_string(mode) + " deployment");
      claim(s.subscriber, op);
    }
    for (const auto &n : data.extra_subscribers)
      claim(n, op);
  }
}

std::int64_t Deployment::latest_timestamp() const {
  std::optional<std::int64_t> latest;
  for (const auto &[op, data] : operators)
    for (const auto &s : data.samples)
      latest = std::max(latest.value_or(s.timestamp), s.timestamp);
  return latest.value_or(0);
}

Deployment load_fixtures(const std::filesystem::path &dir, TraceParams &params,
                         std::optional<std::int64_t> now, FixtureReport *report) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw Error(ErrorKind::Io, "fixture directory not found: " + dir.string());

  FixtureReport local;
  FixtureReport &rep = report ? *report : local;
  Deployment dep;
  std::optional<CoordMode> mode;

  std::vector<fs::path> op_dirs;
  for (const auto &entry : fs::directory_iterator(dir))
    if (entry.is_directory())
      op_dirs.push_back(entry.path());
  std::sort(op_dirs.begin(), op_dirs.end());

  for (const auto &op_dir : op_dirs) {
    const std::string op = op_dir.filename().string();
    auto &data = dep.operators[op];
    const auto samples_path = op_dir / "samples.jsonl";
    if (fs::exists(samples_path)) {
      auto ingest = trace::read_samples_file(samples_path, mode);
      for (const auto &err : ingest.rejected)
        rep.warnings.push_back(
            fmt::format("{}:{}: {}", samples_path.string(), err.line, err.message));
      if (ingest.mode)
        mode = ingest.mode;
      data.samples = std::move(ingest.accepted);
    }
    const auto subs_path = op_dir / "subscribers.txt";
    if (fs::exists(subs_path)) {
      std::ifstream in(subs_path);
      std::string line;
      for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.empty() || line.front() == '#')
          continue;
        if (PhoneNumber::is_valid(line))
          data.extra_subscribers.push_back(PhoneNumber::parse(line));
        else
          rep.warnings.push_back(fmt::format("{}:{}: invalid number", subs_path.string(), lineno));
      }
    }
  }
  dep.mode = mode.value_or(CoordMode::Geo);

  const auto positives_path = dir / "positives.txt";
  if (fs::exists(positives_path)) {
    std::ifstream in(positives_path);
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (line.empty() || line.front() == '#')
        continue;
      try {
        dep.positives.push_back(PhoneNumber::parse(line));
      } catch (const Error &e) {
        throw Error(ErrorKind::Parse,
                    fmt::format("{}:{}: {}", positives_path.string(), lineno, e.what()));
      }
    }
  }

  params.now = now.value_or(dep.latest_timestamp());
  const auto window = params.window();
  for (auto &[op, data] : dep.operators) {
    auto filtered = trace::filter_window(data.samples, window);
    rep.dropped_outside_window += filtered.dropped;
    data.samples = std::move(filtered.kept);
    rep.accepted += data.samples.size();
  }
  if (rep.dropped_outside_window > 0)
    rep.warnings.push_back(fmt::format("{} samples outside the lookback window dropped",
                                       rep.dropped_outside_window));
  dep.validate();
  return dep;
}

// ----------------------------------------------------------------- network

namespace {

std::map<PhoneNumber, std::string> routing_table(const Deployment &d) {
  std::map<PhoneNumber, std::string> routes;
  for (const auto &[op, data] : d.operators) {
    for (const auto &s : data.samples)
      routes.emplace(s.subscriber, op);
    for (const auto &n : data.extra_subscribers)
      routes.emplace(n, op);
  }
  return routes;
}

std::vector<std::string> operator_ids(const Deployment &d) {
  std::vector<std::string> ids;
  for (const auto &[op, data] : d.operators)
    ids.push_back(op);
  return ids;
}

} // namespace

Network::Network(const Deployment &deployment, const TraceParams &params)
    : params_(params),
      central_((deployment.validate(), routing_table(deployment)), operator_ids(deployment),
               params) {
  order_.push_back(kCentralId);
  for (const auto &[op, data] : deployment.operators) {
    if (op == kCentralId)
      throw Error(ErrorKind::Validation, "operator id '" + op + "' is reserved");
    nodes_.emplace(op, std::make_unique<OperatorNode>(op, deployment.mode, data.samples,
                                                      data.extra_subscribers, params_));
    order_.push_back(op);
  }
}

std::uint64_t Network::submit_positive(const PhoneNumber &number) {
  return central_.submit_positive(number, *this, step_);
}

void Network::set_silent(const std::string &operator_id, bool silent) {
  node(operator_id);
  if (silent)
    silent_.insert(operator_id);
  else
    silent_.erase(operator_id);
}

const OperatorNode &Network::node(const std::string &id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end())
    throw Error(ErrorKind::NotFound, "no operator '" + id + "'");
  return *it->second;
}

void Network::send(Envelope env) { inbox_[env.to].push_back(std::move(env)); }

std::size_t Network::step_once() {
  std::size_t delivered = 0;
  for (const auto &id : order_) {
    auto &queue = inbox_[id];
    if (queue.empty())
      continue;
    Envelope env = std::move(queue.front());
    queue.pop_front();
    ++delivered;
    const bool dropped = silent_.contains(id);
    log_.push_back(to_log_line(step_, env, dropped));
    if (dropped)
      continue;
    if (id == kCentralId) {
      central_.handle(env, *this, step_);
      continue;
    }
    const auto &op = *nodes_.at(id);
    if (const auto *req = std::get_if<MobilityRequest>(&env.body))
      send(Envelope{id, env.from, op.handle_mobility_request(*req)});
    else if (const auto *q = std::get_if<ZoneQuery>(&env.body))
      send(Envelope{id, env.from, op.handle_zone_query(*q)});
  }
  return delivered;
}

SuspectList Network::run_trace_round() {
  while (central_.has_active_workflows()) {
    ++step_;
    step_once();
    central_.tick(*this, step_);
  }
  return central_.suspects();
}

// --------------------------------------------------------------- reference

SuspectList centralized_suspects(const Deployment &deployment, const TraceParams &params,
                                 const std::vector<PhoneNumber> &positives) {
  params.validate();
  std::vector<LocationSample> all;
  for (const auto &[op, data] : deployment.operators)
    all.insert(all.end(), data.samples.begin(), data.samples.end());

  const std::set<PhoneNumber> positive_set(positives.begin(), positives.end());
  std::vector<LocationSample> infected_samples;
  for (const auto &s : all)
    if (positive_set.contains(s.subscriber) && params.window().contains(s.timestamp))
      infected_samples.push_back(s);
  const auto infected = trace::group_trajectories(infected_samples);

  trace::SpatialIndex index(std::move(all), deployment.mode, params.distance, params.distance,
                            params.bucket_width);
  auto events = trace::find_contacts(infected, index, params.distance, params.bucket_width);
  std::erase_if(events, [&](const auto &ev) { return positive_set.contains(ev.contact_number); });
  return trace::aggregate_suspects(events, params.threshold);
}

std::string suspects_csv(const SuspectList &list) {
  std::string out = "contact_number,event_count,distinct_infected,first_seen,last_seen,flagged\n";
  for (const auto &e : list.entries)
    out += fmt::format("{},{},{},{},{},{}\n", e.contact_number.str(), e.event_count,
                       e.distinct_infected, e.first_seen, e.last_seen, e.flagged ? 1 : 0);
  return out;
}

} // namespace ctrace::opnet
