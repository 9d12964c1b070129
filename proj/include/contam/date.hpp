#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "contam/error.hpp"

namespace contam {

// Calendar date at day resolution.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::year_month_day ymd) : ymd_(ymd) {}

  // Accepts "YYYY-MM-DD" or an ISO-8601 timestamp whose first ten characters
  // are a date ("2019-12-23T10:15:00Z").
  static Date parse(std::string_view s) {
    const auto bad = [&] { fail(Errc::InvalidArgument, "invalid date '" + std::string(s) + "'"); };
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') bad();
    if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') bad();
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    const auto num = [&](std::string_view part, auto& out) {
      auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
      if (ec != std::errc{} || ptr != part.data() + part.size()) bad();
    };
    num(s.substr(0, 4), y);
    num(s.substr(5, 2), m);
    num(s.substr(8, 2), d);
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) bad();
    return Date(ymd);
  }

  std::string to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd_.year()),
                  static_cast<unsigned>(ymd_.month()), static_cast<unsigned>(ymd_.day()));
    return buf;
  }

  // MediaWiki rvstart form: end of day, UTC.
  std::string end_of_day_iso() const { return to_string() + "T23:59:59Z"; }
  std::string start_of_day_iso() const { return to_string() + "T00:00:00Z"; }

  const std::chrono::year_month_day& ymd() const { return ymd_; }

  friend auto operator<=>(const Date& a, const Date& b) {
    return std::chrono::sys_days(a.ymd_) <=> std::chrono::sys_days(b.ymd_);
  }
  friend bool operator==(const Date& a, const Date& b) { return a.ymd_ == b.ymd_; }

 private:
  std::chrono::year_month_day ymd_{std::chrono::year{1970}, std::chrono::month{1}, std::chrono::day{1}};
};

class TimeWindow {
 public:
  TimeWindow(Date start, Date end) : start_(start), end_(end) {
    if (end_ < start_) {
      fail(Errc::InvalidArgument,
           "time window end " + end_.to_string() + " precedes start " + start_.to_string());
    }
  }

  static TimeWindow parse(std::string_view start, std::string_view end) {
    return TimeWindow(Date::parse(start), Date::parse(end));
  }

  const Date& start() const { return start_; }
  const Date& end() const { return end_; }

  bool contains(const Date& d) const { return start_ <= d && d <= end_; }
  bool contains(const TimeWindow& w) const { return start_ <= w.start_ && w.end_ <= end_; }

  std::string to_string() const { return start_.to_string() + ".." + end_.to_string(); }

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;

 private:
  Date start_;
  Date end_;
};

}  // namespace contam
