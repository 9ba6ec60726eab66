#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace peerchurn {

// Calendar month, e.g. 2008-08. Total ordering via linear month number.
struct CalMonth {
  int year = 0;
  int month = 0;  // 1..12

  int linear() const { return year * 12 + (month - 1); }
  bool ok() const { return month >= 1 && month <= 12 && year >= 1900 && year <= 2200; }

  friend bool operator==(const CalMonth& a, const CalMonth& b) {
    return a.year == b.year && a.month == b.month;
  }
  friend bool operator<(const CalMonth& a, const CalMonth& b) { return a.linear() < b.linear(); }
};

// Months from a to b plus one; 1 when a == b. The tenure convention:
// a subscriber joining 2008-08 has tenure 1 in 2008-08 and 49 in 2012-08... etc.
int months_inclusive(CalMonth from, CalMonth to);

CalMonth add_months(CalMonth m, int k);

// "YYYY-MM"
std::optional<CalMonth> parse_cal_month(const std::string& s);
std::string format_cal_month(CalMonth m);

// Minute-precision timestamp "YYYY-MM-DDTHH:MM" (strict: 'T' separator,
// zero-padded fields, valid calendar date incl. leap years).
struct Timestamp {
  CalMonth ym;
  int day = 1;
  int hour = 0;
  int minute = 0;
};

std::optional<Timestamp> parse_timestamp(const std::string& s);
std::string format_timestamp(const Timestamp& t);
int days_in_month(int year, int month);

// Observation window: consecutive calendar months indexed 1..n_months.
struct MonthWindow {
  CalMonth start;
  int n_months = 0;

  // 1-based index of m inside the window, or 0 when outside.
  int index_of(CalMonth m) const {
    int d = m.linear() - start.linear();
    return (d >= 0 && d < n_months) ? d + 1 : 0;
  }
  CalMonth month_at(int index) const { return add_months(start, index - 1); }
  CalMonth last() const { return add_months(start, n_months - 1); }
};

// Tenure in months at window month `index` (1-based) for a subscriber who
// joined in `join`: months since join, inclusive of the current month.
int tenure_at(CalMonth join, const MonthWindow& window, int index);

}  // namespace peerchurn
