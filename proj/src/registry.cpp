#include "ctrace/registry.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

#include "ctrace/error.hpp"

namespace ctrace::registry {

using nlohmann::json;

namespace {

std::int64_t cell_index(double degrees) {
  // the epsilon keeps exact multiples of 0.01 (e.g. 23.81) in their own cell
  return static_cast<std::int64_t>(std::floor(degrees / kCellDegrees + 1e-9));
}

std::string normalize_address(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  const auto last = s.find_last_not_of(" \t\r\n");
  s = first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string new_token() {
  std::random_device rd;
  std::uint64_t hi = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  std::uint64_t lo = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  return fmt::format("{:016x}{:016x}", hi, lo);
}

TestResult parse_result(const std::string &s) {
  if (s == "positive") return TestResult::Positive;
  if (s == "negative") return TestResult::Negative;
  if (s == "pending") return TestResult::Pending;
  throw Error(ErrorKind::Parse, "unknown test result '" + s + "'");
}

triage::Recommendation parse_recommendation(const std::string &s) {
  if (s == "test_advised") return triage::Recommendation::TestAdvised;
  if (s == "self_monitor") return triage::Recommendation::SelfMonitor;
  throw Error(ErrorKind::Parse, "unknown recommendation '" + s + "'");
}

} // namespace

const char *to_string(TestResult r) noexcept {
  switch (r) {
  case TestResult::Pending: return "pending";
  case TestResult::Positive: return "positive";
  case TestResult::Negative: return "negative";
  }
  return "?";
}

std::int64_t system_clock_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// ------------------------------------------------------------------- cells

AreaCell AreaCell::of(const GeoCoordinate &c) { return {cell_index(c.lat()), cell_index(c.lon())}; }

std::string AreaCell::id() const { return fmt::format("{}_{}", lat_index, lon_index); }

AreaCell AreaCell::parse(const std::string &id) {
  AreaCell c;
  char sep = 0;
  std::istringstream in(id);
  if (!(in >> c.lat_index >> sep >> c.lon_index) || sep != '_' || !in.eof())
    throw Error(ErrorKind::Parse, "malformed area cell id '" + id + "'");
  return c;
}

BoundingBox BoundingBox::parse(const std::string &text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size())
        throw std::invalid_argument(part);
    } catch (const std::exception &) {
      throw Error(ErrorKind::Validation, "bbox component '" + part + "' is not a number");
    }
  }
  if (v.size() != 4)
    throw Error(ErrorKind::Validation, "bbox must be south,west,north,east");
  BoundingBox b{v[0], v[1], v[2], v[3]};
  for (double lat : {b.south, b.north})
    if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0)
      throw Error(ErrorKind::Validation, "bbox latitude out of range");
  for (double lon : {b.west, b.east})
    if (!std::isfinite(lon) || lon < -180.0 || lon > 180.0)
      throw Error(ErrorKind::Validation, "bbox longitude out of range");
  if (b.south > b.north || b.west > b.east)
    throw Error(ErrorKind::Validation, "bbox is inverted (south > north or west > east)");
  return b;
}

bool BoundingBox::intersects(const AreaCell &cell) const noexcept {
  const double s = cell.south(), w = cell.west();
  return s <= north && s + kCellDegrees >= south && w <= east && w + kCellDegrees >= west;
}

// ---------------------------------------------------------------- geocoder

FixtureGeocoder::FixtureGeocoder(std::map<std::string, GeoCoordinate> table) {
  for (auto &[addr, coord] : table)
    table_.emplace(normalize_address(addr), coord);
}

FixtureGeocoder FixtureGeocoder::load(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::Io, "cannot read geocoder table " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  if (!j.is_object())
    throw Error(ErrorKind::Parse, path.string() + ": expected an object of address -> [lat, lon]");
  std::map<std::string, GeoCoordinate> table;
  for (const auto &[addr, v] : j.items()) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw Error(ErrorKind::Parse, path.string() + ": bad coordinates for '" + addr + "'");
    table.emplace(addr, GeoCoordinate(v[0].get<double>(), v[1].get<double>()));
  }
  return FixtureGeocoder(std::move(table));
}

std::optional<GeoCoordinate> FixtureGeocoder::geocode(const std::string &address) const {
  auto it = table_.find(normalize_address(address));
  if (it == table_.end())
    return std::nullopt;
  return it->second;
}

// ------------------------------------------------------------------- state

struct Registry::State {
  Snapshot snap;
  std::map<std::string, PhoneNumber> token_owner;
  std::map<AreaCell, std::size_t> area;

  void apply(const json &e) {
    const std::string op = e.at("op").get<std::string>();
    if (op == "test") {
      TestRecord r;
      r.record_id = e.at("record_id").get<std::string>();
      r.request_id = e.at("request_id").get<std::string>();
      r.address = e.at("address").get<std::string>();
      if (!e.at("area_cell").is_null())
        r.area_cell = AreaCell::parse(e.at("area_cell").get<std::string>());
      for (const auto &n : e.at("numbers"))
        r.numbers.push_back(PhoneNumber::parse(n.get<std::string>()));
      r.recorded_at = e.at("recorded_at").get<std::int64_t>();
      if (!r.request_id.empty())
        snap.request_ids[r.request_id] = r.record_id;
      snap.next_record = std::max(snap.next_record, e.at("seq").get<std::uint64_t>() + 1);
      snap.records[r.record_id] = std::move(r);
    } else if (op == "result") {
      auto &r = snap.records.at(e.at("record_id").get<std::string>());
      if (r.result != TestResult::Pending)
        throw Error(ErrorKind::Parse, "log resolves record " + r.record_id + " twice");
      r.result = parse_result(e.at("result").get<std::string>());
      r.resolved_at = e.at("at").get<std::int64_t>();
      if (r.result == TestResult::Positive && r.area_cell)
        ++area[*r.area_cell];
    } else if (op == "user") {
      const auto number = PhoneNumber::parse(e.at("number").get<std::string>());
      const auto token = e.at("token").get<std::string>();
      if (auto old = snap.tokens.find(number); old != snap.tokens.end())
        token_owner.erase(old->second);
      snap.tokens[number] = token;
      token_owner[token] = number;
    } else if (op == "questionnaire") {
      QuestionnaireRecord q;
      q.number = PhoneNumber::parse(e.at("number").get<std::string>());
      const auto answers = e.at("answers").get<std::vector<bool>>();
      q.answers = triage::make_answers(answers);
      q.result.recommendation = parse_recommendation(e.at("recommendation").get<std::string>());
      q.result.yes_count = e.at("yes_count").get<std::size_t>();
      q.result.rule_fired = e.at("rule").get<std::string>();
      q.submitted_at = e.at("at").get<std::int64_t>();
      snap.questionnaires.push_back(std::move(q));
    } else {
      throw Error(ErrorKind::Parse, "unknown log entry '" + op + "'");
    }
  }

  Snapshot snapshot() const {
    Snapshot s = snap;
    s.area_counts.clear();
    for (const auto &[cell, n] : area)
      if (n > 0)
        s.area_counts.push_back({cell, n});
    return s;
  }
};

namespace {

/// Parses complete log lines; returns the byte offset just past the last
/// good line so a torn tail can be cut off.
std::size_t fold_log(const std::filesystem::path &path,
                     const std::function<void(const json &)> &apply) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    return 0;
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();

  std::size_t pos = 0, good = 0, lineno = 0;
  while (pos < data.size()) {
    ++lineno;
    const auto nl = data.find('\n', pos);
    const bool complete = nl != std::string::npos;
    const std::string line = data.substr(pos, complete ? nl - pos : std::string::npos);
    const std::size_t next = complete ? nl + 1 : data.size();
    try {
      if (!complete)
        throw Error(ErrorKind::Parse, "unterminated line");
      apply(json::parse(line));
      good = next;
    } catch (const std::exception &e) {
      if (next < data.size())
        throw Error(ErrorKind::Parse,
                    fmt::format("{}:{}: corrupt log entry: {}", path.string(), lineno, e.what()));
      break; // torn final write
    }
    pos = next;
  }
  return good;
}

} // namespace

// -------------------------------------------------------------------- log

class Registry::LogWriter {
public:
  explicit LogWriter(const std::filesystem::path &path) : path_(path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0)
      throw Error(ErrorKind::Io, "cannot open log " + path.string());
  }
  ~LogWriter() {
    if (fd_ >= 0) {
      ::fsync(fd_);
      ::close(fd_);
    }
  }
  LogWriter(const LogWriter &) = delete;
  LogWriter &operator=(const LogWriter &) = delete;

  void append(const std::string &line) {
    std::string buf = line + '\n';
    const char *p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
      const auto n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR)
          continue;
        throw Error(ErrorKind::Io, "append to " + path_.string() + " failed");
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0)
      throw Error(ErrorKind::Io, "fsync of " + path_.string() + " failed");
  }

private:
  std::filesystem::path path_;
  int fd_ = -1;
};

// --------------------------------------------------------------- registry

Registry::Registry(const std::filesystem::path &data_dir, triage::RuleTable rules, Clock clock)
    : log_path_(data_dir / "registry.log"), rules_(std::move(rules)), clock_(std::move(clock)),
      state_(std::make_unique<State>()) {
  std::error_code ec;
  std::filesystem::create_directories(data_dir, ec);
  if (!std::filesystem::is_directory(data_dir))
    throw Error(ErrorKind::Io, "cannot create data directory " + data_dir.string());

  const std::size_t good = fold_log(log_path_, [&](const json &e) { state_->apply(e); });
  if (std::filesystem::exists(log_path_) && std::filesystem::file_size(log_path_) != good)
    std::filesystem::resize_file(log_path_, good);
  writer_ = std::make_unique<LogWriter>(log_path_);
}

Registry::~Registry() = default;

void Registry::set_geocoder(std::shared_ptr<const Geocoder> geocoder) {
  std::unique_lock lock(mutex_);
  geocoder_ = std::move(geocoder);
}

void Registry::set_positive_sink(PositiveSink *sink) {
  std::unique_lock lock(mutex_);
  sink_ = sink;
}

void Registry::set_suspect_directory(const SuspectDirectory *directory) {
  std::unique_lock lock(mutex_);
  suspects_ = directory;
}

void Registry::append(const std::string &line) { writer_->append(line); }

RecordOutcome Registry::record_test(const NewTest &test) {
  if (test.numbers.empty())
    throw Error(ErrorKind::Validation, "a test record needs at least one phone number");
  std::vector<PhoneNumber> numbers;
  for (const auto &raw : test.numbers) {
    auto n = PhoneNumber::parse(raw);
    if (std::find(numbers.begin(), numbers.end(), n) == numbers.end())
      numbers.push_back(std::move(n));
  }

  std::unique_lock lock(mutex_);
  if (!test.request_id.empty())
    if (auto it = state_->snap.request_ids.find(test.request_id);
        it != state_->snap.request_ids.end())
      return {it->second, false};

  std::optional<GeoCoordinate> where = test.location;
  if (!where && geocoder_)
    where = geocoder_->geocode(test.address);

  const std::uint64_t seq = state_->snap.next_record;
  json e;
  e["op"] = "test";
  e["seq"] = seq;
  e["record_id"] = fmt::format("T{:06d}", seq);
  e["request_id"] = test.request_id;
  e["address"] = test.address;
  e["area_cell"] = where ? json(AreaCell::of(*where).id()) : json(nullptr);
  e["numbers"] = json::array();
  for (const auto &n : numbers)
    e["numbers"].push_back(n.str());
  e["recorded_at"] = clock_();
  append(e.dump());
  state_->apply(e);
  return {e["record_id"].get<std::string>(), true};
}

std::optional<TestRecord> Registry::get_test(const std::string &record_id) const {
  std::shared_lock lock(mutex_);
  auto it = state_->snap.records.find(record_id);
  if (it == state_->snap.records.end())
    return std::nullopt;
  return it->second;
}

PositiveOutcome Registry::report_positive(const std::string &record_id) {
  std::vector<PhoneNumber> numbers;
  PositiveSink *sink = nullptr;
  {
    std::unique_lock lock(mutex_);
    auto it = state_->snap.records.find(record_id);
    if (it == state_->snap.records.end())
      throw Error(ErrorKind::NotFound, "no test record " + record_id);
    if (it->second.result != TestResult::Pending)
      throw Error(ErrorKind::Conflict, "test record " + record_id + " is already " +
                                           to_string(it->second.result));
    json e{{"op", "result"}, {"record_id", record_id}, {"result", "positive"}, {"at", clock_()}};
    append(e.dump());
    state_->apply(e);
    numbers = it->second.numbers;
    sink = sink_;
  }

  PositiveOutcome out{record_id, 0, 0};
  for (const auto &n : numbers) {
    if (sink && sink->forward(n))
      ++out.forwarded;
    else
      ++out.unrouted;
  }
  return out;
}

void Registry::report_negative(const std::string &record_id) {
  std::unique_lock lock(mutex_);
  auto it = state_->snap.records.find(record_id);
  if (it == state_->snap.records.end())
    throw Error(ErrorKind::NotFound, "no test record " + record_id);
  if (it->second.result != TestResult::Pending)
    throw Error(ErrorKind::Conflict, "test record " + record_id + " is already " +
                                         to_string(it->second.result));
  json e{{"op", "result"}, {"record_id", record_id}, {"result", "negative"}, {"at", clock_()}};
  append(e.dump());
  state_->apply(e);
}

std::vector<AreaCount> Registry::area_counts(const std::optional<BoundingBox> &box) const {
  std::shared_lock lock(mutex_);
  std::vector<AreaCount> out;
  for (const auto &[cell, n] : state_->area)
    if (n > 0 && (!box || box->intersects(cell)))
      out.push_back({cell, n});
  return out;
}

std::string Registry::register_user(const std::string &raw_number) {
  const auto number = PhoneNumber::parse(raw_number);
  std::unique_lock lock(mutex_);
  std::string token;
  do {
    token = new_token();
  } while (state_->token_owner.contains(token));
  json e{{"op", "user"}, {"number", number.str()}, {"token", token}};
  append(e.dump());
  state_->apply(e);
  return token;
}

PhoneNumber Registry::resolve_token(const std::string &token) const {
  std::shared_lock lock(mutex_);
  auto it = state_->token_owner.find(token);
  if (it == state_->token_owner.end())
    throw Error(ErrorKind::InvalidToken, "unknown or superseded registration token");
  return it->second;
}

Status Registry::status_check(const std::string &token) const {
  const auto number = resolve_token(token);
  std::shared_lock lock(mutex_);
  if (!suspects_)
    return {};
  const auto entry = suspects_->lookup(number);
  if (!entry)
    return {};
  return Status{true, entry->event_count, entry->flagged};
}

triage::TriageResult Registry::submit_questionnaire(const std::string &token,
                                                    const triage::Answers &answers) {
  const auto number = resolve_token(token);
  const auto result = triage::score_questionnaire(answers, rules_);
  std::unique_lock lock(mutex_);
  json e{{"op", "questionnaire"},
         {"number", number.str()},
         {"answers", std::vector<bool>(answers.begin(), answers.end())},
         {"recommendation", triage::to_string(result.recommendation)},
         {"yes_count", result.yes_count},
         {"rule", result.rule_fired},
         {"at", clock_()}};
  append(e.dump());
  state_->apply(e);
  return result;
}

std::vector<PhoneNumber> Registry::positive_numbers() const {
  std::shared_lock lock(mutex_);
  std::set<PhoneNumber> out;
  for (const auto &[id, r] : state_->snap.records)
    if (r.result == TestResult::Positive)
      out.insert(r.numbers.begin(), r.numbers.end());
  return {out.begin(), out.end()};
}

Snapshot Registry::snapshot() const {
  std::shared_lock lock(mutex_);
  return state_->snapshot();
}

std::vector<AreaCount> Registry::recompute_area_counts() const {
  std::shared_lock lock(mutex_);
  std::map<AreaCell, std::size_t> counts;
  for (const auto &[id, r] : state_->snap.records)
    if (r.result == TestResult::Positive && r.area_cell)
      ++counts[*r.area_cell];
  std::vector<AreaCount> out;
  for (const auto &[cell, n] : counts)
    out.push_back({cell, n});
  return out;
}

Snapshot Registry::replay(const std::filesystem::path &log_path) {
  State state;
  fold_log(log_path, [&](const json &e) { state.apply(e); });
  return state.snapshot();
}

} // namespace ctrace::registry
