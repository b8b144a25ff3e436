#include "ctrace/ingest.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <utility>

#include <fmt/format.h>
#include <json.hpp>

#include "ctrace/error.hpp"

namespace ctrace::trace {

namespace {

using nlohmann::json;

double number_field(const json &j, const char *key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw Error(ErrorKind::Parse, fmt::format("field '{}' missing or not a number", key));
  return it->get<double>();
}

} // namespace

LocationSample parse_sample(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error &e) {
    throw Error(ErrorKind::Parse, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object())
    throw Error(ErrorKind::Parse, "record must be a JSON object");

  LocationSample s;
  const auto sub = j.find("subscriber");
  if (sub == j.end() || !sub->is_string())
    throw Error(ErrorKind::Parse, "field 'subscriber' missing or not a string");
  try {
    s.subscriber = PhoneNumber::parse(sub->get<std::string>());
  } catch (const Error &e) {
    throw Error(ErrorKind::Parse, e.what());
  }

  const auto ts = j.find("timestamp");
  if (ts == j.end() || !ts->is_number_integer())
    throw Error(ErrorKind::Parse, "field 'timestamp' missing or not an integer");
  s.timestamp = ts->get<std::int64_t>();

  const bool geo = j.contains("lat") || j.contains("lon");
  const bool planar = j.contains("x") || j.contains("y");
  if (geo == planar)
    throw Error(ErrorKind::Parse, "record needs exactly one of {lat, lon} or {x, y}");
  try {
    if (geo) {
      s.position = GeoCoordinate(number_field(j, "lat"), number_field(j, "lon"));
    } else {
      PlanarPoint p{number_field(j, "x"), number_field(j, "y")};
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw Error(ErrorKind::Parse, "planar coordinates must be finite");
      s.position = p;
    }
  } catch (const Error &e) {
    throw Error(ErrorKind::Parse, e.what());
  }
  return s;
}

std::string format_sample(const LocationSample &s) {
  if (const auto *p = std::get_if<PlanarPoint>(&s.position))
    return fmt::format(R"({{"subscriber":"{}","timestamp":{},"x":{},"y":{}}})",
                       s.subscriber.str(), s.timestamp, p->x, p->y);
  const auto &g = std::get<GeoCoordinate>(s.position);
  return fmt::format(R"({{"subscriber":"{}","timestamp":{},"lat":{},"lon":{}}})",
                     s.subscriber.str(), s.timestamp, g.lat(), g.lon());
}

IngestReport read_samples(std::istream &in, std::optional<CoordMode> expected) {
  IngestReport report;
  report.mode = expected;
  std::set<std::pair<PhoneNumber, std::int64_t>> seen;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      ++report.blank_lines;
      continue;
    }
    try {
      auto s = parse_sample(line);
      if (report.mode && s.mode() != *report.mode)
        throw Error(ErrorKind::Parse, fmt::format("{} record in a {} file", to_string(s.mode()),
                                                  to_string(*report.mode)));
      if (!seen.emplace(s.subscriber, s.timestamp).second)
        throw Error(ErrorKind::Parse, fmt::format("duplicate sample for {} at {}",
                                                  s.subscriber.str(), s.timestamp));
      report.mode = s.mode();
      report.accepted.push_back(std::move(s));
    } catch (const Error &e) {
      report.rejected.push_back({lineno, e.what()});
    }
  }
  return report;
}

IngestReport read_samples_file(const std::filesystem::path &path,
                               std::optional<CoordMode> expected) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_samples(in, expected);
}

void write_samples(std::ostream &out, const std::vector<LocationSample> &samples) {
  for (const auto &s : samples)
    out << format_sample(s) << '\n';
}

} // namespace ctrace::trace
