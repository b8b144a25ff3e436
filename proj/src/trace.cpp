#include "ctrace/trace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <tuple>
#include <unordered_set>

#include "ctrace/error.hpp"

namespace ctrace::trace {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kMetersPerDegree = kEarthRadiusMeters * kDegToRad;
// widens geo cells slightly so rounding never splits a pair at exactly d
constexpr double kCellSlack = 1.0 + 1e-9;

using EventKey = std::tuple<PhoneNumber, PhoneNumber, std::int64_t>;

bool closer(const ContactEvent &a, const ContactEvent &b) {
  return std::tie(a.distance, a.contact_time, a.infected_time) <
         std::tie(b.distance, b.contact_time, b.infected_time);
}

void keep_closest(std::map<EventKey, ContactEvent> &events, ContactEvent ev) {
  EventKey key{ev.infected_number, ev.contact_number, ev.bucket.index};
  auto [it, inserted] = events.try_emplace(std::move(key), ev);
  if (!inserted && closer(ev, it->second))
    it->second = std::move(ev);
}

std::vector<ContactEvent> flatten(std::map<EventKey, ContactEvent> &&events) {
  std::vector<ContactEvent> out;
  out.reserve(events.size());
  for (auto &[key, ev] : events)
    out.push_back(std::move(ev));
  sort_events(out);
  return out;
}

std::unordered_set<PhoneNumber> infected_set(std::span<const Trajectory> infected) {
  std::unordered_set<PhoneNumber> set;
  for (const auto &t : infected)
    set.insert(t.subscriber);
  return set;
}

void check_join_args(double d, std::int64_t bucket_width) {
  if (!std::isfinite(d) || d <= 0.0)
    throw Error(ErrorKind::InvalidArgument, "contact distance must be > 0");
  if (bucket_width <= 0)
    throw Error(ErrorKind::InvalidArgument, "bucket width must be > 0");
}

double wrap_lon(double lon) {
  lon = std::fmod(lon + 180.0, 360.0);
  if (lon < 0.0)
    lon += 360.0;
  return lon - 180.0;
}

} // namespace

CoordMode mode_of(const Position &p) noexcept {
  return std::holds_alternative<PlanarPoint>(p) ? CoordMode::Planar : CoordMode::Geo;
}

const char *to_string(CoordMode mode) noexcept {
  return mode == CoordMode::Planar ? "planar" : "geo";
}

double distance(const Position &a, const Position &b) {
  if (const auto *pa = std::get_if<PlanarPoint>(&a)) {
    if (const auto *pb = std::get_if<PlanarPoint>(&b))
      return euclidean_distance(*pa, *pb);
  } else if (const auto *gb = std::get_if<GeoCoordinate>(&b)) {
    return haversine_distance(std::get<GeoCoordinate>(a), *gb);
  }
  throw Error(ErrorKind::ModeMismatch, "cannot compare planar and geographic positions");
}

void Trajectory::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto &s = samples[i];
    if (s.subscriber != subscriber)
      throw Error(ErrorKind::Validation, "trajectory of " + subscriber.str() +
                                             " contains a sample of " + s.subscriber.str());
    if (i > 0) {
      if (s.timestamp <= samples[i - 1].timestamp)
        throw Error(ErrorKind::Validation,
                    "trajectory of " + subscriber.str() + " is not strictly time-ordered");
      if (s.mode() != samples[0].mode())
        throw Error(ErrorKind::ModeMismatch,
                    "trajectory of " + subscriber.str() + " mixes coordinate modes");
    }
  }
}

std::vector<Trajectory> group_trajectories(std::span<const LocationSample> samples) {
  std::map<PhoneNumber, Trajectory> by_number;
  for (const auto &s : samples) {
    auto &t = by_number[s.subscriber];
    t.subscriber = s.subscriber;
    t.samples.push_back(s);
  }
  std::vector<Trajectory> out;
  out.reserve(by_number.size());
  for (auto &[number, t] : by_number) {
    std::stable_sort(t.samples.begin(), t.samples.end(),
                     [](const auto &a, const auto &b) { return a.timestamp < b.timestamp; });
    out.push_back(std::move(t));
  }
  return out;
}

WindowFilterResult filter_window(std::span<const LocationSample> samples,
                                 const TimeWindow &window) {
  WindowFilterResult r;
  for (const auto &s : samples) {
    if (window.contains(s.timestamp))
      r.kept.push_back(s);
    else
      ++r.dropped;
  }
  return r;
}

void sort_events(std::vector<ContactEvent> &events) {
  std::sort(events.begin(), events.end(), [](const ContactEvent &a, const ContactEvent &b) {
    return std::tie(a.infected_number, a.contact_number, a.bucket.index) <
           std::tie(b.infected_number, b.contact_number, b.bucket.index);
  });
}

std::size_t SpatialIndex::KeyHash::operator()(const Key &k) const noexcept {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.bucket));
  h = splitmix64(h ^ static_cast<std::uint64_t>(k.cx));
  return static_cast<std::size_t>(splitmix64(h ^ static_cast<std::uint64_t>(k.cy)));
}

SpatialIndex::SpatialIndex(std::vector<LocationSample> samples, CoordMode mode, double cell_size,
                           double contact_distance, std::int64_t bucket_width)
    : samples_(std::move(samples)), mode_(mode), cell_size_(cell_size),
      contact_distance_(contact_distance), bucket_width_(bucket_width) {
  check_join_args(contact_distance, bucket_width);
  if (!std::isfinite(cell_size) || cell_size < contact_distance)
    throw Error(ErrorKind::InvalidArgument,
                "cell size " + std::to_string(cell_size) + " is smaller than contact distance " +
                    std::to_string(contact_distance));

  for (const auto &s : samples_)
    if (s.mode() != mode_)
      throw Error(ErrorKind::ModeMismatch, std::string("index expects ") + to_string(mode_) +
                                               " samples, got " + to_string(s.mode()));

  if (mode_ == CoordMode::Geo) {
    const double theta = cell_size_ / kEarthRadiusMeters;
    lat_step_ = theta * kRadToDeg * kCellSlack;
    double max_lat = 0.0;
    for (const auto &s : samples_)
      max_lat = std::max(max_lat, std::abs(std::get<GeoCoordinate>(s.position).lat()));
    // a matching probe can sit up to one cell further from the equator
    const double reach = max_lat + theta * kRadToDeg;
    lon_cells_ = 1;
    if (reach < 90.0) {
      const double s = std::sin(theta / 2.0) / std::cos(reach * kDegToRad);
      if (s < 1.0) {
        const double width = 2.0 * std::asin(s) * kRadToDeg * kCellSlack;
        lon_cells_ = std::max<std::int64_t>(1, static_cast<std::int64_t>(360.0 / width));
      }
    }
    lon_step_ = 360.0 / static_cast<double>(lon_cells_);
  }

  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto [cx, cy] = cell_of(samples_[i].position);
    cells_[Key{time_bucket(samples_[i].timestamp, bucket_width_).index, cx, cy}].push_back(i);
  }
}

std::pair<std::int64_t, std::int64_t> SpatialIndex::cell_of(const Position &p) const {
  if (mode_of(p) != mode_)
    throw Error(ErrorKind::ModeMismatch, std::string("index holds ") + to_string(mode_) +
                                             " samples, probe is " + to_string(mode_of(p)));
  if (mode_ == CoordMode::Planar) {
    const auto &pt = std::get<PlanarPoint>(p);
    return {static_cast<std::int64_t>(std::floor(pt.x / cell_size_)),
            static_cast<std::int64_t>(std::floor(pt.y / cell_size_))};
  }
  const auto &g = std::get<GeoCoordinate>(p);
  auto cx = static_cast<std::int64_t>(std::floor((g.lon() + 180.0) / lon_step_));
  cx = ((cx % lon_cells_) + lon_cells_) % lon_cells_;
  return {cx, static_cast<std::int64_t>(std::floor(g.lat() / lat_step_))};
}

std::vector<std::size_t> SpatialIndex::candidates(std::int64_t bucket,
                                                  const Position &probe) const {
  const auto [cx, cy] = cell_of(probe);
  std::vector<std::int64_t> xs;
  if (mode_ == CoordMode::Geo && lon_cells_ <= 3) {
    for (std::int64_t i = 0; i < lon_cells_; ++i)
      xs.push_back(i);
  } else if (mode_ == CoordMode::Geo) {
    xs = {(cx - 1 + lon_cells_) % lon_cells_, cx, (cx + 1) % lon_cells_};
  } else {
    xs = {cx - 1, cx, cx + 1};
  }

  std::vector<std::size_t> out;
  for (std::int64_t x : xs) {
    for (std::int64_t y = cy - 1; y <= cy + 1; ++y) {
      auto it = cells_.find(Key{bucket, x, y});
      if (it != cells_.end())
        out.insert(out.end(), it->second.begin(), it->second.end());
    }
  }
  return out;
}

std::vector<std::size_t> SpatialIndex::radius_query(std::int64_t bucket, const Position &probe,
                                                    double radius) const {
  if (radius > cell_size_)
    throw Error(ErrorKind::InvalidArgument, "query radius exceeds index cell size");
  auto cand = candidates(bucket, probe);
  std::erase_if(cand, [&](std::size_t i) {
    return distance(samples_[i].position, probe) > radius;
  });
  std::sort(cand.begin(), cand.end());
  return cand;
}

std::vector<ContactEvent> find_contacts(std::span<const Trajectory> infected,
                                        const SpatialIndex &index, double d,
                                        std::int64_t bucket_width) {
  check_join_args(d, bucket_width);
  if (bucket_width != index.bucket_width())
    throw Error(ErrorKind::InvalidArgument, "bucket width differs from the index's");
  if (d > index.cell_size())
    throw Error(ErrorKind::InvalidArgument, "contact distance exceeds the index cell size");

  const auto positives = infected_set(infected);
  std::map<EventKey, ContactEvent> events;
  for (const auto &traj : infected) {
    for (const auto &s : traj.samples) {
      if (s.mode() != index.mode())
        throw Error(ErrorKind::ModeMismatch,
                    "infected trajectory of " + traj.subscriber.str() + " is " +
                        to_string(s.mode()) + ", index is " + to_string(index.mode()));
      const TimeBucket bucket = time_bucket(s.timestamp, bucket_width);
      for (std::size_t i : index.radius_query(bucket.index, s.position, d)) {
        const auto &c = index.samples()[i];
        if (positives.contains(c.subscriber))
          continue;
        keep_closest(events, ContactEvent{traj.subscriber, c.subscriber, bucket,
                                          distance(s.position, c.position), c.timestamp,
                                          s.timestamp});
      }
    }
  }
  return flatten(std::move(events));
}

std::vector<ContactEvent> brute_force_contacts(std::span<const Trajectory> infected,
                                               std::span<const LocationSample> all_samples,
                                               double d, std::int64_t bucket_width) {
  check_join_args(d, bucket_width);
  const auto positives = infected_set(infected);
  std::map<EventKey, ContactEvent> events;
  for (const auto &traj : infected) {
    for (const auto &s : traj.samples) {
      const TimeBucket bucket = time_bucket(s.timestamp, bucket_width);
      for (const auto &c : all_samples) {
        if (positives.contains(c.subscriber))
          continue;
        if (time_bucket(c.timestamp, bucket_width) != bucket)
          continue;
        const double dist = distance(s.position, c.position);
        if (dist <= d)
          keep_closest(events, ContactEvent{traj.subscriber, c.subscriber, bucket, dist,
                                            c.timestamp, s.timestamp});
      }
    }
  }
  return flatten(std::move(events));
}

std::vector<SuspectEntry> SuspectList::flagged() const {
  std::vector<SuspectEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [](const SuspectEntry &e) { return e.flagged; });
  return out;
}

const SuspectEntry *SuspectList::find(const PhoneNumber &number) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), number,
                             [](const SuspectEntry &e, const PhoneNumber &n) {
                               return e.contact_number < n;
                             });
  return it != entries.end() && it->contact_number == number ? &*it : nullptr;
}

SuspectList aggregate_suspects(std::span<const ContactEvent> events, std::size_t threshold) {
  if (threshold == 0)
    throw Error(ErrorKind::InvalidArgument, "multiplicity threshold must be >= 1");

  struct Acc {
    std::size_t count = 0;
    std::set<PhoneNumber> infected;
    std::int64_t first = 0;
    std::int64_t last = 0;
  };
  std::map<PhoneNumber, Acc> acc;
  for (const auto &ev : events) {
    auto &a = acc[ev.contact_number];
    if (a.count == 0) {
      a.first = a.last = ev.contact_time;
    } else {
      a.first = std::min(a.first, ev.contact_time);
      a.last = std::max(a.last, ev.contact_time);
    }
    ++a.count;
    a.infected.insert(ev.infected_number);
  }

  SuspectList list;
  list.threshold = threshold;
  list.entries.reserve(acc.size());
  for (const auto &[number, a] : acc)
    list.entries.push_back(SuspectEntry{number, a.count, a.infected.size(), a.first, a.last,
                                        a.count >= threshold});
  return list;
}

Trajectory inject_position_noise(const Trajectory &trajectory, double sigma_meters, Engine &rng) {
  if (!std::isfinite(sigma_meters) || sigma_meters < 0.0)
    throw Error(ErrorKind::InvalidArgument, "noise sigma must be >= 0");
  if (sigma_meters == 0.0)
    return trajectory;

  std::normal_distribution<double> noise(0.0, sigma_meters);
  Trajectory out = trajectory;
  for (auto &s : out.samples) {
    const double east = noise(rng);
    const double north = noise(rng);
    if (auto *p = std::get_if<PlanarPoint>(&s.position)) {
      p->x += east / kMetersPerUnit;
      p->y += north / kMetersPerUnit;
    } else {
      const auto &g = std::get<GeoCoordinate>(s.position);
      const double lat = std::clamp(g.lat() + north / kMetersPerDegree, -90.0, 90.0);
      const double coslat = std::max(std::cos(g.lat() * kDegToRad), 1e-12);
      const double lon = wrap_lon(g.lon() + east / (kMetersPerDegree * coslat));
      s.position = GeoCoordinate(lat, lon);
    }
  }
  return out;
}

} // namespace ctrace::trace
