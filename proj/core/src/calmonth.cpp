#include "peerchurn/calmonth.hpp"

#include <cstdio>

namespace peerchurn {

int months_inclusive(CalMonth from, CalMonth to) {
  return to.linear() - from.linear() + 1;
}

CalMonth add_months(CalMonth m, int k) {
  int lin = m.linear() + k;
  CalMonth r;
  r.year = lin / 12;
  r.month = lin % 12 + 1;
  if (r.month <= 0) {  // negative linear values
    r.month += 12;
    r.year -= 1;
  }
  return r;
}

int days_in_month(int year, int month) {
  static const int d[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2) {
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return leap ? 29 : 28;
  }
  return d[month - 1];
}

namespace {

// Parses exactly `n` digits starting at s[pos]; returns -1 on failure.
int fixed_digits(const std::string& s, size_t pos, int n) {
  if (s.size() < pos + static_cast<size_t>(n)) return -1;
  int v = 0;
  for (int i = 0; i < n; ++i) {
    char c = s[pos + i];
    if (c < '0' || c > '9') return -1;
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

std::optional<CalMonth> parse_cal_month(const std::string& s) {
  if (s.size() != 7 || s[4] != '-') return std::nullopt;
  int y = fixed_digits(s, 0, 4);
  int m = fixed_digits(s, 5, 2);
  if (y < 0 || m < 0) return std::nullopt;
  CalMonth r{y, m};
  if (!r.ok()) return std::nullopt;
  return r;
}

std::string format_cal_month(CalMonth m) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", m.year, m.month);
  return buf;
}

std::optional<Timestamp> parse_timestamp(const std::string& s) {
  // YYYY-MM-DDTHH:MM
  if (s.size() != 16 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':')
    return std::nullopt;
  int y = fixed_digits(s, 0, 4);
  int mo = fixed_digits(s, 5, 2);
  int d = fixed_digits(s, 8, 2);
  int h = fixed_digits(s, 11, 2);
  int mi = fixed_digits(s, 14, 2);
  if (y < 0 || mo < 0 || d < 0 || h < 0 || mi < 0) return std::nullopt;
  Timestamp t{{y, mo}, d, h, mi};
  if (!t.ym.ok()) return std::nullopt;
  if (d < 1 || d > days_in_month(y, mo)) return std::nullopt;
  if (h > 23 || mi > 59) return std::nullopt;
  return t;
}

std::string format_timestamp(const Timestamp& t) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d", t.ym.year, t.ym.month, t.day,
                t.hour, t.minute);
  return buf;
}

int tenure_at(CalMonth join, const MonthWindow& window, int index) {
  return months_inclusive(join, window.month_at(index));
}

}  // namespace peerchurn
