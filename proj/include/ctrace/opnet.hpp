#pragma once

// Simulated multi-operator tracing protocol. A central tracer asks the
// owning operator for a positive subscriber's recent trajectory, then sends
// that trajectory (as a bucketed zone) to every operator, which answers with
// its own subscribers seen near the zone. All traffic goes through an
// in-process bus with deterministic delivery order.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ctrace/ingest.hpp"
#include "ctrace/trace.hpp"

namespace ctrace::opnet {

using trace::CoordMode;
using trace::LocationSample;
using trace::Position;
using trace::SuspectList;
using trace::TimeWindow;
using trace::Trajectory;

inline constexpr std::uint64_t kDefaultTimeoutSteps = 1000;
inline const std::string kCentralId = "central";

struct TraceParams {
  double distance = trace::kDefaultContactMeters; // native unit of the coordinate mode
  std::int64_t bucket_width = kDefaultBucketWidth;
  std::size_t threshold = trace::kDefaultMultiplicity;
  std::int64_t lookback = trace::kLookbackSeconds;
  std::int64_t now = 0;
  std::uint64_t timeout_steps = kDefaultTimeoutSteps;

  TimeWindow window() const { return TimeWindow::ending_at(now, lookback); }
  void validate() const;
};

struct MobilityRequest {
  std::uint64_t workflow = 0;
  PhoneNumber infected_number;
  TimeWindow window;
};

struct MobilityResponse {
  std::uint64_t workflow = 0;
  PhoneNumber infected_number;
  bool found = false;
  Trajectory trajectory;
};

struct ZoneEntry {
  std::int64_t bucket = 0;
  Position position;
};

struct ZoneQuery {
  std::uint64_t workflow = 0;
  PhoneNumber infected_number;
  std::vector<ZoneEntry> zone;
  double distance = 0.0;
  std::int64_t bucket_width = kDefaultBucketWidth;
};

struct ZoneMatch {
  PhoneNumber number;
  /// Only the samples that matched the zone, time-ordered.
  std::vector<LocationSample> samples;
};

struct ZoneResponse {
  std::uint64_t workflow = 0;
  std::string operator_id;
  std::vector<ZoneMatch> matches; // ordered by number
};

using Message = std::variant<MobilityRequest, MobilityResponse, ZoneQuery, ZoneResponse>;

struct Envelope {
  std::string from;
  std::string to;
  Message body;
};

const char *message_type(const Message &m) noexcept;

/// One-line JSON rendering used for the trace log.
std::string to_log_line(std::uint64_t step, const Envelope &env, bool dropped);

/// A mobile operator holding trajectories of its own subscribers only.
class OperatorNode {
public:
  OperatorNode(std::string id, CoordMode mode, std::vector<LocationSample> samples,
               const std::vector<PhoneNumber> &extra_subscribers, const TraceParams &params);

  const std::string &id() const noexcept { return id_; }
  CoordMode mode() const noexcept { return mode_; }
  bool owns(const PhoneNumber &number) const { return directory_.contains(number); }
  const std::map<PhoneNumber, Trajectory> &directory() const noexcept { return directory_; }

  /// Trajectory clipped to the request window, or not-found for numbers
  /// this operator does not serve.
  MobilityResponse handle_mobility_request(const MobilityRequest &request) const;

  /// Subscribers (other than the infected number) with a sample within the
  /// query distance of a zone entry in the same bucket. Throws
  /// Error(Validation) for an empty zone, Error(ModeMismatch) for a zone in
  /// the other coordinate mode.
  ZoneResponse handle_zone_query(const ZoneQuery &query) const;

private:
  std::string id_;
  CoordMode mode_;
  std::map<PhoneNumber, Trajectory> directory_;
  std::unique_ptr<trace::SpatialIndex> index_;
};

enum class Phase { Requested, MobilityReceived, ZonesBroadcast, ResponsesCollected, SuspectsStored };
const char *to_string(Phase phase) noexcept;

enum class Coverage { Pending, Responded, TimedOut, Skipped };

struct WorkflowState {
  std::uint64_t id = 0;
  PhoneNumber infected_number;
  std::string owner;
  Phase phase = Phase::Requested;
  TimeWindow window;
  bool mobility_found = false;
  Trajectory trajectory;
  std::map<std::string, Coverage> coverage; // every operator, once zones are out
  std::map<std::string, ZoneResponse> responses;
  bool partial_coverage = false;
  std::uint64_t waiting_since = 0; // step of the last outbound request

  bool active() const noexcept { return phase != Phase::SuspectsStored; }
};

/// Outbound message sink; the bus implements it.
class Outbox {
public:
  virtual ~Outbox() = default;
  virtual void send(Envelope env) = 0;
};

class CentralTracer {
public:
  CentralTracer(std::map<PhoneNumber, std::string> routing, std::vector<std::string> operators,
                const TraceParams &params);

  /// Throws Error(UnknownSubscriber) or Error(DuplicateWorkflow).
  std::uint64_t submit_positive(const PhoneNumber &number, Outbox &out, std::uint64_t step);

  void handle(const Envelope &env, Outbox &out, std::uint64_t step);
  /// Applies step-based timeouts.
  void tick(Outbox &out, std::uint64_t step);

  bool has_active_workflows() const;
  const std::map<std::uint64_t, WorkflowState> &workflows() const noexcept { return workflows_; }
  const std::set<PhoneNumber> &positives() const noexcept { return positives_; }

  /// Suspects from every completed workflow, excluding known positives.
  SuspectList suspects() const;
  const TraceParams &params() const noexcept { return params_; }

private:
  void broadcast_zones(WorkflowState &wf, Outbox &out, std::uint64_t step);
  void maybe_finish(WorkflowState &wf);

  std::map<PhoneNumber, std::string> routing_;
  std::vector<std::string> operators_;
  TraceParams params_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, WorkflowState> workflows_;
  std::set<PhoneNumber> positives_;
  std::map<PhoneNumber, std::vector<trace::ContactEvent>> events_by_infected_;
};

/// Operator data as loaded from a fixture directory.
struct OperatorData {
  std::vector<LocationSample> samples;
  std::vector<PhoneNumber> extra_subscribers;
};

struct Deployment {
  CoordMode mode = CoordMode::Geo;
  std::map<std::string, OperatorData> operators;
  std::vector<PhoneNumber> positives;

  /// Throws Error(Validation) if a number belongs to two operators or a
  /// sample is in the wrong mode.
  void validate() const;
  /// Latest sample timestamp, 0 when there are none.
  std::int64_t latest_timestamp() const;
};

struct FixtureReport {
  std::size_t accepted = 0;
  std::size_t dropped_outside_window = 0;
  std::vector<std::string> warnings;
};

/// Reads `<dir>/<operator>/samples.jsonl` (plus optional subscribers.txt)
/// for every operator subdirectory and `<dir>/positives.txt`. Malformed
/// lines are reported as warnings. Sets params.now to `now`, or to the
/// latest sample when unset; samples outside [now - lookback, now] are
/// dropped. Throws Error(Io) if `dir` is missing, Error(Parse) for a bad
/// positives file.
Deployment load_fixtures(const std::filesystem::path &dir, TraceParams &params,
                         std::optional<std::int64_t> now = std::nullopt,
                         FixtureReport *report = nullptr);

/// Drives the central tracer and operator nodes over the bus. Delivery is
/// per-destination FIFO; each step visits the central node and then the
/// operators in id order, delivering at most one message to each.
class Network : private Outbox {
public:
  Network(const Deployment &deployment, const TraceParams &params);

  std::uint64_t submit_positive(const PhoneNumber &number);
  /// Runs until every workflow has stored its suspects; returns the store.
  SuspectList run_trace_round();

  /// Silent operators swallow every message (fault injection).
  void set_silent(const std::string &operator_id, bool silent);

  const CentralTracer &central() const noexcept { return central_; }
  const OperatorNode &node(const std::string &id) const;
  const std::vector<std::string> &trace_log() const noexcept { return log_; }
  std::uint64_t steps() const noexcept { return step_; }

private:
  void send(Envelope env) override;
  std::size_t step_once();

  TraceParams params_;
  std::vector<std::string> order_; // central, then operators by id
  std::map<std::string, std::unique_ptr<OperatorNode>> nodes_;
  CentralTracer central_;
  std::map<std::string, std::deque<Envelope>> inbox_;
  std::set<std::string> silent_;
  std::vector<std::string> log_;
  std::uint64_t step_ = 0;
};

/// Reference result: the trace engine run once over the union of all
/// operators' data, with every positive as an infected trajectory.
SuspectList centralized_suspects(const Deployment &deployment, const TraceParams &params,
                                 const std::vector<PhoneNumber> &positives);

/// CSV rendering of a suspect store:
/// contact_number,event_count,distinct_infected,first_seen,last_seen,flagged
std::string suspects_csv(const SuspectList &list);

} // namespace ctrace::opnet
