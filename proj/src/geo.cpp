#include "ctrace/geo.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ctrace/error.hpp"

namespace ctrace {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double hav(double angle) {
  const double s = std::sin(angle / 2.0);
  return s * s;
}

} // namespace

GeoCoordinate::GeoCoordinate(double lat, double lon) : lat_(lat), lon_(lon) {
  if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0)
    throw Error(ErrorKind::InvalidArgument,
                "latitude out of range [-90, 90]: " + std::to_string(lat));
  if (!std::isfinite(lon) || lon < -180.0 || lon > 180.0)
    throw Error(ErrorKind::InvalidArgument,
                "longitude out of range [-180, 180]: " + std::to_string(lon));
}

double euclidean_distance(const PlanarPoint &a, const PlanarPoint &b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

double haversine_distance(const GeoCoordinate &a, const GeoCoordinate &b) noexcept {
  const double phi1 = a.lat() * kDegToRad;
  const double phi2 = b.lat() * kDegToRad;
  const double h = hav(phi2 - phi1) +
                   std::cos(phi1) * std::cos(phi2) * hav((b.lon() - a.lon()) * kDegToRad);
  // rounding can push h slightly above 1 for antipodal points
  return 2.0 * kEarthRadiusMeters * std::asin(std::sqrt(std::min(1.0, h)));
}

TimeBucket time_bucket(std::int64_t timestamp, std::int64_t width) {
  if (width <= 0)
    throw Error(ErrorKind::InvalidArgument,
                "bucket width must be positive, got " + std::to_string(width));
  std::int64_t q = timestamp / width;
  if (timestamp % width != 0 && timestamp < 0)
    --q;
  return TimeBucket{q, width};
}

} // namespace ctrace
