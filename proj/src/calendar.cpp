#include "rote/calendar.hpp"

#include <stdexcept>

namespace rote::cal {

bool is_leap_year(int year) {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap_year(year)) return 29;
  return kDays[month - 1];
}

namespace {

std::int64_t days_in_year(int year) { return is_leap_year(year) ? 366 : 365; }

}  // namespace

CivilDate civil_from_days(std::int64_t days) {
  if (days < 0) throw std::domain_error("civil_from_days: negative day index");
  CivilDate date;
  while (days >= days_in_year(date.year)) {
    days -= days_in_year(date.year);
    ++date.year;
  }
  while (days >= days_in_month(date.year, date.month)) {
    days -= days_in_month(date.year, date.month);
    ++date.month;
  }
  date.day = static_cast<int>(days) + 1;
  return date;
}

std::int64_t days_from_civil(const CivilDate& date) {
  if (date.year < 1970) throw std::domain_error("days_from_civil: year before 1970");
  std::int64_t days = 0;
  for (int y = 1970; y < date.year; ++y) days += days_in_year(y);
  for (int m = 1; m < date.month; ++m) days += days_in_month(date.year, m);
  return days + date.day - 1;
}

TemporalTriplet decompose_timestamp(std::int64_t seconds) {
  if (seconds < 0) throw std::domain_error("decompose_timestamp: pre-epoch timestamp");
  const std::int64_t day_index = seconds / 86400;
  const CivilDate date = civil_from_days(day_index);
  TemporalTriplet t;
  t.y = date.year - 1970;
  t.m = 12 * t.y + (date.month - 1);
  t.d = day_index;
  return t;
}

}  // namespace rote::cal
