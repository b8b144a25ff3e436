#pragma once

#include <cstdint>

namespace ctrace {

/// Point in the simulation plane. One unit is 100 m.
struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PlanarPoint &, const PlanarPoint &) = default;
};

/// Latitude/longitude in degrees; ranges are checked on construction.
class GeoCoordinate {
public:
  GeoCoordinate() = default;
  GeoCoordinate(double lat, double lon);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  friend bool operator==(const GeoCoordinate &, const GeoCoordinate &) = default;

private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

inline constexpr double kEarthRadiusMeters = 6'371'000.0;
inline constexpr std::int64_t kDefaultBucketWidth = 300;

struct TimeBucket {
  std::int64_t index = 0;
  std::int64_t width = kDefaultBucketWidth;

  /// Epoch seconds at which the bucket opens.
  std::int64_t start() const noexcept { return index * width; }

  friend auto operator<=>(const TimeBucket &, const TimeBucket &) = default;
};

double euclidean_distance(const PlanarPoint &a, const PlanarPoint &b) noexcept;

/// Great-circle distance in meters on a sphere of radius kEarthRadiusMeters.
double haversine_distance(const GeoCoordinate &a, const GeoCoordinate &b) noexcept;

/// Floor division of an epoch timestamp into fixed-width buckets.
/// Throws Error(InvalidArgument) when width <= 0.
TimeBucket time_bucket(std::int64_t timestamp, std::int64_t width = kDefaultBucketWidth);

} // namespace ctrace
