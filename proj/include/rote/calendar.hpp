#pragma once

#include <cstdint>

namespace rote::cal {

// Cumulative calendar ordinals elapsed since 1970-01-01T00:00Z:
// whole years, whole months (12*y + month index), whole days.
struct TemporalTriplet {
  std::int64_t y = 0;
  std::int64_t m = 0;
  std::int64_t d = 0;

  friend bool operator==(const TemporalTriplet&, const TemporalTriplet&) = default;
};

struct CivilDate {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

bool is_leap_year(int year);
int days_in_month(int year, int month);

// UTC proleptic Gregorian date for a non-negative day index from the epoch.
CivilDate civil_from_days(std::int64_t days);
std::int64_t days_from_civil(const CivilDate& date);

// Decompose a Unix timestamp (seconds, UTC) into the (y, m, d) triplet.
// Throws std::domain_error for pre-epoch (negative) timestamps.
TemporalTriplet decompose_timestamp(std::int64_t seconds);

}  // namespace rote::cal
