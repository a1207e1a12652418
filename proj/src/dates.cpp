#include "kgdiv/dates.hpp"

#include <charconv>

#include <fmt/format.h>

#include "kgdiv/errors.hpp"

namespace kgdiv {

namespace {

bool parse_digits(std::string_view s, int& out) {
    if (s.empty())
        return false;
    for (char c : s)
        if (c < '0' || c > '9')
            return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::optional<Date> make_date(int y, int m, int d) {
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok())
        return std::nullopt;
    return date;
}

} // namespace

std::optional<Date> parse_iso_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        return std::nullopt;
    int y = 0, m = 0, d = 0;
    if (!parse_digits(text.substr(0, 4), y) || !parse_digits(text.substr(5, 2), m) ||
        !parse_digits(text.substr(8, 2), d))
        return std::nullopt;
    return make_date(y, m, d);
}

Date require_iso_date(std::string_view text, std::string_view what) {
    auto d = parse_iso_date(text);
    if (!d)
        throw DataError(fmt::format("{}: '{}' is not a YYYY-MM-DD date", what, text));
    return *d;
}

std::optional<Date> parse_date_lenient(std::string_view text) {
    // Strip a time part, if any.
    if (auto t = text.find('T'); t != std::string_view::npos)
        text = text.substr(0, t);
    // gYear / gYearMonth sometimes carry a timezone suffix.
    while (!text.empty() && (text.back() == 'Z'))
        text.remove_suffix(1);
    if (text.size() > 10 && (text[10] == '+' || text[10] == '-'))
        text = text.substr(0, 10);

    int y = 0, m = 1, d = 1;
    if (text.size() == 4)
        return parse_digits(text, y) ? make_date(y, 1, 1) : std::nullopt;
    if (text.size() == 7 && text[4] == '-') {
        if (!parse_digits(text.substr(0, 4), y) || !parse_digits(text.substr(5, 2), m))
            return std::nullopt;
        return make_date(y, m, 1);
    }
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        if (!parse_digits(text.substr(0, 4), y) || !parse_digits(text.substr(5, 2), m) ||
            !parse_digits(text.substr(8, 2), d))
            return std::nullopt;
        // Wikidata encodes year precision as YYYY-00-00.
        if (m == 0)
            m = 1;
        if (d == 0)
            d = 1;
        return make_date(y, m, d);
    }
    return std::nullopt;
}

std::string to_iso(Date d) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()),
                       static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

std::string to_iso(const std::optional<Date>& d) {
    return d ? to_iso(*d) : std::string{};
}

} // namespace kgdiv
