#pragma once

// Line-delimited trajectory records:
//   {"subscriber": "+8801711000001", "timestamp": 1590000000, "lat": 23.81, "lon": 90.41}
//   {"subscriber": "+8801711000001", "timestamp": 1590000000, "x": 0.12, "y": -0.4}

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctrace/trace.hpp"

namespace ctrace::trace {

struct LineError {
  std::size_t line = 0; // 1-based
  std::string message;
};

struct IngestReport {
  std::vector<LocationSample> accepted;
  std::vector<LineError> rejected;
  std::optional<CoordMode> mode;
  std::size_t blank_lines = 0;
};

/// Parses one record. Throws Error(Parse) describing the problem.
LocationSample parse_sample(std::string_view line);

std::string format_sample(const LocationSample &sample);

/// Parses every non-blank line. The coordinate mode is fixed by `expected`
/// or, failing that, by the first valid record; records in the other mode,
/// malformed lines and duplicate (subscriber, timestamp) pairs are rejected
/// with their line numbers.
IngestReport read_samples(std::istream &in, std::optional<CoordMode> expected = std::nullopt);
IngestReport read_samples_file(const std::filesystem::path &path,
                               std::optional<CoordMode> expected = std::nullopt);

/// Writes samples one record per line, in the given order.
void write_samples(std::ostream &out, const std::vector<LocationSample> &samples);

} // namespace ctrace::trace
