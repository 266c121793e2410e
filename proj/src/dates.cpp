#include "epihmm/dates.hpp"

#include <cstdio>

#include "epihmm/errors.hpp"

namespace epihmm {

std::optional<Date> Date::try_parse(std::string_view iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
    int y = 0;
    unsigned m = 0, d = 0;
    for (size_t i = 0; i < iso.size(); ++i) {
        if (i == 4 || i == 7) continue;
        char c = iso[i];
        if (c < '0' || c > '9') return std::nullopt;
        int v = c - '0';
        if (i < 4) y = y * 10 + v;
        else if (i < 7) m = m * 10 + static_cast<unsigned>(v);
        else d = d * 10 + static_cast<unsigned>(v);
    }
    std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(m),
                                    std::chrono::day(d)};
    if (!ymd.ok()) return std::nullopt;
    return Date(std::chrono::sys_days(ymd));
}

Date Date::parse(std::string_view iso) {
    auto d = try_parse(iso);
    if (!d) raise(Errc::MalformedDate, "not an ISO-8601 date: '" + std::string(iso) + "'");
    return *d;
}

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    std::chrono::year_month_day ymd{std::chrono::year(year), std::chrono::month(month),
                                    std::chrono::day(day)};
    if (!ymd.ok()) raise(Errc::MalformedDate, "invalid calendar day");
    return Date(std::chrono::sys_days(ymd));
}

std::string Date::to_string() const {
    std::chrono::year_month_day ymd(day_);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()));
    return buf;
}

Date Date::plus_days(int n) const { return Date(day_ + std::chrono::days(n)); }

int Date::days_until(Date other) const {
    return static_cast<int>((other.day_ - day_).count());
}

} // namespace epihmm
