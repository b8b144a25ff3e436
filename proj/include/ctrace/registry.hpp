#pragma once

// Test-center records, the infected registry with per-area counts, user
// registration, suspect status and questionnaire intake. State lives in an
// append-only line-delimited log under the data directory and is rebuilt
// from it at startup.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ctrace/geo.hpp"
#include "ctrace/phone.hpp"
#include "ctrace/trace.hpp"
#include "ctrace/triage.hpp"

namespace ctrace::registry {

enum class TestResult { Pending, Positive, Negative };
const char *to_string(TestResult r) noexcept;

/// Area cells are 0.01 degree squares indexed by floor(degrees * 100).
inline constexpr double kCellDegrees = 0.01;

struct AreaCell {
  std::int64_t lat_index = 0;
  std::int64_t lon_index = 0;

  static AreaCell of(const GeoCoordinate &c);
  /// "<lat_index>_<lon_index>", e.g. "2381_9041".
  std::string id() const;
  static AreaCell parse(const std::string &id);
  double south() const noexcept { return static_cast<double>(lat_index) * kCellDegrees; }
  double west() const noexcept { return static_cast<double>(lon_index) * kCellDegrees; }

  friend auto operator<=>(const AreaCell &, const AreaCell &) = default;
};

struct BoundingBox {
  double south = -90.0;
  double west = -180.0;
  double north = 90.0;
  double east = 180.0;

  /// "south,west,north,east" in degrees. Throws Error(Validation) for
  /// malformed, out-of-range or inverted boxes.
  static BoundingBox parse(const std::string &text);
  bool intersects(const AreaCell &cell) const noexcept;
};

struct AreaCount {
  AreaCell cell;
  std::size_t positive_count = 0;
  friend bool operator==(const AreaCount &, const AreaCount &) = default;
};

struct TestRecord {
  std::string record_id;
  std::string request_id;
  std::string address;
  std::optional<AreaCell> area_cell;
  std::vector<PhoneNumber> numbers;
  TestResult result = TestResult::Pending;
  std::int64_t recorded_at = 0;
  std::optional<std::int64_t> resolved_at;

  friend bool operator==(const TestRecord &, const TestRecord &) = default;
};

struct NewTest {
  std::string request_id; // optional idempotency key
  std::string address;
  std::vector<std::string> numbers;
  std::optional<GeoCoordinate> location; // overrides geocoding when present
};

/// Address lookup. The shipped implementation is a fixture table.
class Geocoder {
public:
  virtual ~Geocoder() = default;
  virtual std::optional<GeoCoordinate> geocode(const std::string &address) const = 0;
};

/// Exact-match table: JSON object {"address": [lat, lon], ...}; matching is
/// case-insensitive on whitespace-trimmed addresses.
class FixtureGeocoder final : public Geocoder {
public:
  FixtureGeocoder() = default;
  explicit FixtureGeocoder(std::map<std::string, GeoCoordinate> table);
  static FixtureGeocoder load(const std::filesystem::path &path);
  std::optional<GeoCoordinate> geocode(const std::string &address) const override;

private:
  std::map<std::string, GeoCoordinate> table_;
};

/// Receives confirmed-positive numbers for tracing.
class PositiveSink {
public:
  virtual ~PositiveSink() = default;
  /// Returns false when the number could not be routed (unknown or already
  /// being traced).
  virtual bool forward(const PhoneNumber &number) = 0;
};

/// Read access to the suspect store.
class SuspectDirectory {
public:
  virtual ~SuspectDirectory() = default;
  virtual std::optional<trace::SuspectEntry> lookup(const PhoneNumber &number) const = 0;
};

struct RecordOutcome {
  std::string record_id;
  bool created = false;
};

struct PositiveOutcome {
  std::string record_id;
  std::size_t forwarded = 0;
  std::size_t unrouted = 0;
};

struct Status {
  bool listed = false;
  std::size_t event_count = 0;
  bool flagged = false;
  friend bool operator==(const Status &, const Status &) = default;
};

struct QuestionnaireRecord {
  PhoneNumber number;
  triage::Answers answers{};
  triage::TriageResult result;
  std::int64_t submitted_at = 0;
  friend bool operator==(const QuestionnaireRecord &, const QuestionnaireRecord &) = default;
};

/// Complete registry state; two registries are equivalent iff snapshots match.
struct Snapshot {
  std::map<std::string, TestRecord> records;
  std::map<std::string, std::string> request_ids;
  std::map<PhoneNumber, std::string> tokens; // number -> current token
  std::vector<QuestionnaireRecord> questionnaires;
  std::vector<AreaCount> area_counts;
  std::uint64_t next_record = 1;
  friend bool operator==(const Snapshot &, const Snapshot &) = default;
};

using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_seconds();

class Registry {
public:
  /// Opens (creating if needed) `<data_dir>/registry.log` and replays it. A
  /// torn final line is truncated; corruption elsewhere throws Error(Parse).
  Registry(const std::filesystem::path &data_dir, triage::RuleTable rules = triage::RuleTable::defaults(),
           Clock clock = system_clock_seconds);
  ~Registry();
  Registry(const Registry &) = delete;
  Registry &operator=(const Registry &) = delete;

  void set_geocoder(std::shared_ptr<const Geocoder> geocoder);
  void set_positive_sink(PositiveSink *sink);
  void set_suspect_directory(const SuspectDirectory *directory);

  /// Persists before returning. A repeated request id returns the original
  /// record id. Throws Error(Validation) for no or malformed numbers.
  RecordOutcome record_test(const NewTest &test);
  std::optional<TestRecord> get_test(const std::string &record_id) const;

  /// pending -> positive; bumps the area count and forwards every number.
  /// Throws Error(NotFound) or Error(Conflict).
  PositiveOutcome report_positive(const std::string &record_id);
  /// pending -> negative.
  void report_negative(const std::string &record_id);

  /// Non-zero cells intersecting `box` (all cells when unset), ordered by cell.
  std::vector<AreaCount> area_counts(const std::optional<BoundingBox> &box = std::nullopt) const;

  /// Issues a new opaque token; earlier tokens for the number stop working.
  std::string register_user(const std::string &raw_number);
  /// Throws Error(InvalidToken).
  PhoneNumber resolve_token(const std::string &token) const;
  Status status_check(const std::string &token) const;
  triage::TriageResult submit_questionnaire(const std::string &token, const triage::Answers &answers);

  /// Every number on a positive record, ordered.
  std::vector<PhoneNumber> positive_numbers() const;

  Snapshot snapshot() const;
  /// Area counts recomputed from the records alone.
  std::vector<AreaCount> recompute_area_counts() const;
  const triage::RuleTable &rules() const noexcept { return rules_; }
  const std::filesystem::path &log_path() const noexcept { return log_path_; }

  /// Folds a log file into a snapshot without opening it for writing.
  static Snapshot replay(const std::filesystem::path &log_path);

private:
  class LogWriter;
  struct State;

  void append(const std::string &line);

  std::filesystem::path log_path_;
  triage::RuleTable rules_;
  Clock clock_;
  std::shared_ptr<const Geocoder> geocoder_;
  PositiveSink *sink_ = nullptr;
  const SuspectDirectory *suspects_ = nullptr;

  mutable std::shared_mutex mutex_;
  std::unique_ptr<State> state_;
  std::unique_ptr<LogWriter> writer_;
};

} // namespace ctrace::registry
