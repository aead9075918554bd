#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "revexp/error.hpp"

namespace revexp {

using Timestamp = std::chrono::sys_seconds;

namespace detail {

inline bool read_digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

// Accepts ISO-8601 date-times with a `Z` or numeric offset (`+02:00`, `-0500`)
// and optional fractional seconds, which are truncated. The result is UTC.
inline Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  auto fail = [&]() -> ParseError {
    return ParseError("invalid timestamp '" + std::string(text) + "'");
  };
  int Y, M, D, h, m, s;
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':')
    throw fail();
  if (!detail::read_digits(text, 0, 4, Y) || !detail::read_digits(text, 5, 2, M) ||
      !detail::read_digits(text, 8, 2, D) || !detail::read_digits(text, 11, 2, h) ||
      !detail::read_digits(text, 14, 2, m) || !detail::read_digits(text, 17, 2, s))
    throw fail();
  year_month_day ymd{year{Y}, month{static_cast<unsigned>(M)}, day{static_cast<unsigned>(D)}};
  if (!ymd.ok() || h > 23 || m > 59 || s > 60) throw fail();

  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    if (pos == start) throw fail();
  }
  seconds offset{0};
  if (pos == text.size()) throw fail();
  if (text[pos] == 'Z' || text[pos] == 'z') {
    ++pos;
  } else if (text[pos] == '+' || text[pos] == '-') {
    const int sign = text[pos] == '-' ? -1 : 1;
    ++pos;
    int oh, om;
    if (!detail::read_digits(text, pos, 2, oh)) throw fail();
    pos += 2;
    if (pos < text.size() && text[pos] == ':') ++pos;
    if (!detail::read_digits(text, pos, 2, om)) throw fail();
    pos += 2;
    offset = seconds{sign * (oh * 3600 + om * 60)};
  } else {
    throw fail();
  }
  if (pos != text.size()) throw fail();

  const auto local = sys_days{ymd} + hours{h} + minutes{m} + seconds{s};
  return local - offset;
}

// Canonical form: `YYYY-MM-DDTHH:MM:SSZ`.
inline std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

inline Timestamp from_unix(long long secs) { return Timestamp{std::chrono::seconds{secs}}; }

inline long long to_unix(Timestamp t) { return t.time_since_epoch().count(); }

}  // namespace revexp
