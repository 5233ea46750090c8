#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace chartnet {

/// Calendar day. No timezone; only ordering and day arithmetic are used.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    bool valid() const;

    /// Days since 1970-01-01 (proleptic Gregorian).
    std::int64_t day_number() const;

    static Date from_day_number(std::int64_t days);

    /// Parses "YYYY-MM-DD". Throws Error(Parse) on malformed input.
    static Date parse(std::string_view text);

    std::string to_string() const;
};

/// Fractional calendar years between two dates (365.25-day years).
double calendar_years(Date first, Date last);

}  // namespace chartnet
