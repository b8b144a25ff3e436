#pragma once

// Spatiotemporal contact join: infected trajectories against all location
// samples, matched by time bucket and distance.

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ctrace/geo.hpp"
#include "ctrace/phone.hpp"
#include "ctrace/rng.hpp"

namespace ctrace::trace {

/// Planar positions are in scaled units (1 = 100 m); geographic in degrees.
enum class CoordMode { Planar, Geo };

using Position = std::variant<PlanarPoint, GeoCoordinate>;

CoordMode mode_of(const Position &p) noexcept;
const char *to_string(CoordMode mode) noexcept;

/// Meters per planar unit.
inline constexpr double kMetersPerUnit = 100.0;
inline constexpr std::int64_t kLookbackSeconds = 7 * 24 * 3600;
inline constexpr double kDefaultContactMeters = 2.0;
inline constexpr std::size_t kDefaultMultiplicity = 2;

/// Distance in the mode's native unit (meters for Geo, scaled units for
/// Planar). Throws Error(ModeMismatch) when the modes differ.
double distance(const Position &a, const Position &b);

struct LocationSample {
  PhoneNumber subscriber;
  std::int64_t timestamp = 0;
  Position position;

  CoordMode mode() const noexcept { return mode_of(position); }
  friend bool operator==(const LocationSample &, const LocationSample &) = default;
};

struct Trajectory {
  PhoneNumber subscriber;
  std::vector<LocationSample> samples;

  /// Throws Error(Validation) unless samples belong to `subscriber`, are
  /// strictly increasing in time and share one coordinate mode.
  void validate() const;
  friend bool operator==(const Trajectory &, const Trajectory &) = default;
};

/// Groups samples per subscriber, sorted by timestamp. Output ordered by number.
std::vector<Trajectory> group_trajectories(std::span<const LocationSample> samples);

struct TimeWindow {
  std::int64_t start = 0;
  std::int64_t end = 0;

  bool contains(std::int64_t t) const noexcept { return t >= start && t <= end; }
  std::int64_t length() const noexcept { return end - start; }
  /// The lookback window [now - lookback, now].
  static TimeWindow ending_at(std::int64_t now, std::int64_t lookback = kLookbackSeconds) {
    return {now - lookback, now};
  }
};

struct WindowFilterResult {
  std::vector<LocationSample> kept;
  std::size_t dropped = 0;
};

WindowFilterResult filter_window(std::span<const LocationSample> samples, const TimeWindow &window);

struct ContactEvent {
  PhoneNumber infected_number;
  PhoneNumber contact_number;
  TimeBucket bucket;
  double distance = 0.0;
  /// Timestamps of the closest pair in the bucket.
  std::int64_t contact_time = 0;
  std::int64_t infected_time = 0;

  friend bool operator==(const ContactEvent &, const ContactEvent &) = default;
};

/// Canonical order: (infected, contact, bucket).
void sort_events(std::vector<ContactEvent> &events);

/// Grid index over samples keyed by (time bucket, cell). Neighbor queries
/// scan the 3x3 block around the probe's cell, which is complete for any
/// query distance <= cell_size. In Geo mode cell_size is in meters and
/// longitude cells are widened for the highest indexed latitude.
class SpatialIndex {
public:
  /// Throws Error(InvalidArgument) when cell_size < contact_distance or a
  /// parameter is non-positive; Error(ModeMismatch) for mixed-mode samples.
  SpatialIndex(std::vector<LocationSample> samples, CoordMode mode, double cell_size,
               double contact_distance, std::int64_t bucket_width = kDefaultBucketWidth);

  CoordMode mode() const noexcept { return mode_; }
  double cell_size() const noexcept { return cell_size_; }
  double contact_distance() const noexcept { return contact_distance_; }
  std::int64_t bucket_width() const noexcept { return bucket_width_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const std::vector<LocationSample> &samples() const noexcept { return samples_; }

  /// Indices of samples in the probe's bucket whose cell lies in the 3x3
  /// block around the probe position (superset of the radius result).
  std::vector<std::size_t> candidates(std::int64_t bucket, const Position &probe) const;

  /// Indices of samples in `bucket` within `radius` (<= cell_size) of
  /// `probe`, ascending.
  std::vector<std::size_t> radius_query(std::int64_t bucket, const Position &probe,
                                        double radius) const;

private:
  struct Key {
    std::int64_t bucket;
    std::int64_t cx;
    std::int64_t cy;
    friend bool operator==(const Key &, const Key &) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key &k) const noexcept;
  };

  std::pair<std::int64_t, std::int64_t> cell_of(const Position &p) const;

  std::vector<LocationSample> samples_;
  CoordMode mode_;
  double cell_size_;
  double contact_distance_;
  std::int64_t bucket_width_;
  // Geo mode grid geometry (degrees)
  double lat_step_ = 0.0;
  double lon_step_ = 360.0;
  std::int64_t lon_cells_ = 1;
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> cells_;
};

/// Contact events between infected trajectories and indexed samples: same
/// bucket, distance <= d, contact not in the infected set. One event per
/// (infected, contact, bucket) keeping the closest pair (ties broken by
/// earliest contact time, then infected time). Canonically sorted.
std::vector<ContactEvent> find_contacts(std::span<const Trajectory> infected,
                                        const SpatialIndex &index, double d,
                                        std::int64_t bucket_width);

/// All-pairs reference implementation of find_contacts.
std::vector<ContactEvent> brute_force_contacts(std::span<const Trajectory> infected,
                                               std::span<const LocationSample> all_samples,
                                               double d, std::int64_t bucket_width);

struct SuspectEntry {
  PhoneNumber contact_number;
  std::size_t event_count = 0;
  std::size_t distinct_infected = 0;
  std::int64_t first_seen = 0;
  std::int64_t last_seen = 0;
  bool flagged = false;

  friend bool operator==(const SuspectEntry &, const SuspectEntry &) = default;
};

struct SuspectList {
  /// One entry per contact number, ordered by number.
  std::vector<SuspectEntry> entries;
  std::size_t threshold = kDefaultMultiplicity;

  std::vector<SuspectEntry> flagged() const;
  const SuspectEntry *find(const PhoneNumber &number) const;
  friend bool operator==(const SuspectList &, const SuspectList &) = default;
};

/// Throws Error(InvalidArgument) when threshold == 0.
SuspectList aggregate_suspects(std::span<const ContactEvent> events,
                               std::size_t threshold = kDefaultMultiplicity);

/// Displaces every sample by N(0, sigma^2) per axis, sigma in meters.
/// sigma == 0 returns the input unchanged. Geo samples are clamped to the
/// poles and wrapped in longitude.
Trajectory inject_position_noise(const Trajectory &trajectory, double sigma_meters, Engine &rng);

} // namespace ctrace::trace
