#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace kgdiv {

using Date = std::chrono::year_month_day;

// Strict YYYY-MM-DD.
std::optional<Date> parse_iso_date(std::string_view text);

// Same as parse_iso_date but throws DataError naming `what` on failure.
Date require_iso_date(std::string_view text, std::string_view what);

// Accepts the date shapes knowledge graphs hand back: YYYY, YYYY-MM,
// YYYY-MM-DD, and xsd:dateTime values such as 1995-05-21T00:00:00Z.
// Missing month/day default to 1. Returns nullopt for anything else.
std::optional<Date> parse_date_lenient(std::string_view text);

std::string to_iso(Date d);
std::string to_iso(const std::optional<Date>& d); // empty string when unset

inline Date january_first(int year) {
    return Date{std::chrono::year{year}, std::chrono::January, std::chrono::day{1}};
}

inline long days_between(Date from, Date to) {
    return (std::chrono::sys_days{to} - std::chrono::sys_days{from}).count();
}

inline Date add_days(Date d, long n) {
    return Date{std::chrono::sys_days{d} + std::chrono::days{n}};
}

} // namespace kgdiv
