#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <functional>
#include <string>
#include <string_view>

#include "pmvol/error.hpp"

namespace pmvol {

/// Calendar date without time of day. Every series in the toolkit is keyed by
/// the date of its daily close; intraday timestamps are not modelled.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
  constexpr Date(int y, unsigned m, unsigned d)
      : days_(std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}) {}

  /// Parses strict ISO-8601 `YYYY-MM-DD`.
  static Date parse(std::string_view text) {
    auto fail = [&] { return ValidationError("invalid date '" + std::string(text) + "'"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
    int y = 0;
    unsigned m = 0, d = 0;
    auto field = [&](std::size_t pos, std::size_t len, auto& out) {
      auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
      if (ec != std::errc{} || p != text.data() + pos + len) throw fail();
    };
    field(0, 4, y);
    field(5, 2, m);
    field(8, 2, d);
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw fail();
    return Date(std::chrono::sys_days(ymd));
  }

  [[nodiscard]] std::string iso() const {
    std::chrono::year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  [[nodiscard]] constexpr std::chrono::sys_days days() const { return days_; }
  [[nodiscard]] std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
  [[nodiscard]] int year() const { return static_cast<int>(ymd().year()); }
  [[nodiscard]] unsigned month() const { return static_cast<unsigned>(ymd().month()); }
  [[nodiscard]] unsigned day() const { return static_cast<unsigned>(ymd().day()); }
  [[nodiscard]] unsigned quarter() const { return (month() - 1) / 3 + 1; }

  [[nodiscard]] bool is_weekend() const {
    std::chrono::weekday wd{days_};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
  }

  [[nodiscard]] constexpr Date plus_days(int n) const { return Date(days_ + std::chrono::days{n}); }
  [[nodiscard]] constexpr long serial() const { return days_.time_since_epoch().count(); }

  friend constexpr auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

}  // namespace pmvol

template <>
struct std::hash<pmvol::Date> {
  std::size_t operator()(const pmvol::Date& d) const noexcept { return std::hash<long>{}(d.serial()); }
};
