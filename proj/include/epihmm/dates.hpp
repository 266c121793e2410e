#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace epihmm {

// Calendar day with an ISO-8601 (YYYY-MM-DD) text form.
class Date {
public:
    Date() = default;

    static Date parse(std::string_view iso);              // throws Error(MalformedDate)
    static std::optional<Date> try_parse(std::string_view iso);
    static Date from_ymd(int year, unsigned month, unsigned day);

    std::string to_string() const;

    Date plus_days(int n) const;
    Date next_day() const { return plus_days(1); }

    // Signed number of days from *this to other.
    int days_until(Date other) const;

    auto operator<=>(const Date&) const = default;

private:
    explicit Date(std::chrono::sys_days d) : day_(d) {}
    std::chrono::sys_days day_{};
};

// Inclusive date range.
struct DateRange {
    Date start;
    Date end;

    bool contains(Date d) const { return start <= d && d <= end; }
    int num_days() const { return start.days_until(end) + 1; }

    auto operator<=>(const DateRange&) const = default;
};

} // namespace epihmm
