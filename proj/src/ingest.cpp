#include "epihmm/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <set>

#include "epihmm/errors.hpp"

namespace epihmm {

namespace {

std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

long long parse_count(const std::string& field, int line_no) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        raise(Errc::MalformedRow,
              "line " + std::to_string(line_no) + ": '" + field + "' is not an integer");
    return v;
}

const std::vector<std::string> kDeltaHeader = {"date", "region", "active_delta",
                                               "recovered_delta", "dead_delta"};
const std::vector<std::string> kCumulativeHeader = {"date", "region", "confirmed",
                                                    "active", "recovered", "dead"};

} // namespace

ParsedSnapshot parse_snapshot_csv(std::istream& in, CsvMode mode) {
    ParsedSnapshot out;
    out.mode = mode;
    const auto& want = mode == CsvMode::Delta ? kDeltaHeader : kCumulativeHeader;

    std::string line;
    if (!std::getline(in, line))
        raise(Errc::MalformedRow, "line 1: missing header row");
    auto header = split_csv(line);
    if (header != want) {
        std::string got;
        for (const auto& h : header) got += (got.empty() ? "" : ",") + h;
        raise(Errc::UnknownColumn, "unexpected header '" + got + "'");
    }

    std::set<std::pair<std::string, Date>> seen;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() != want.size())
            raise(Errc::MalformedRow, "line " + std::to_string(line_no) + ": expected " +
                                          std::to_string(want.size()) + " fields, got " +
                                          std::to_string(fields.size()));
        auto date = Date::try_parse(fields[0]);
        if (!date)
            raise(Errc::MalformedRow,
                  "line " + std::to_string(line_no) + ": bad date '" + fields[0] + "'");
        const std::string& region = fields[1];
        if (region.empty())
            raise(Errc::MalformedRow, "line " + std::to_string(line_no) + ": empty region");
        if (!seen.insert({region, *date}).second)
            raise(Errc::DuplicateRegionDate,
                  "line " + std::to_string(line_no) + ": duplicate (" + fields[0] + ", " +
                      region + ")");
        if (mode == CsvMode::Delta) {
            RegionDayDelta d;
            d.date = *date;
            d.region = region;
            d.a = parse_count(fields[2], line_no);
            d.r = parse_count(fields[3], line_no);
            d.d = parse_count(fields[4], line_no);
            out.deltas.push_back(std::move(d));
        } else {
            RegionDayRecord rec;
            rec.date = *date;
            rec.region = region;
            rec.confirmed = parse_count(fields[2], line_no);
            rec.active = parse_count(fields[3], line_no);
            rec.recovered = parse_count(fields[4], line_no);
            rec.dead = parse_count(fields[5], line_no);
            if (rec.confirmed < 0 || rec.active < 0 || rec.recovered < 0 || rec.dead < 0)
                raise(Errc::MalformedRow,
                      "line " + std::to_string(line_no) + ": negative cumulative count");
            out.records.push_back(std::move(rec));
        }
    }
    return out;
}

Dataset build_delta_series(std::vector<RegionDayRecord> records) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.region, a.date) < std::tie(b.region, b.date);
    });
    Dataset out;
    const RegionDayRecord* prev = nullptr;
    for (const auto& rec : records) {
        auto& series = out[rec.region];
        if (series.region.empty()) {
            series.region = rec.region;
            prev = nullptr;
        }
        RegionDayDelta d;
        d.date = rec.date;
        d.region = rec.region;
        if (prev == nullptr) {
            d.a = rec.active;
            d.r = rec.recovered;
            d.d = rec.dead;
        } else {
            d.a = rec.active - prev->active;
            d.r = rec.recovered - prev->recovered;
            d.d = rec.dead - prev->dead;
        }
        if (rec.confirmed != rec.active + rec.recovered + rec.dead)
            series.identity_violations.push_back(rec.date);
        series.deltas.push_back(std::move(d));
        prev = &rec;
    }
    return out;
}

Dataset group_delta_series(std::vector<RegionDayDelta> deltas) {
    std::sort(deltas.begin(), deltas.end(), [](const auto& a, const auto& b) {
        return std::tie(a.region, a.date) < std::tie(b.region, b.date);
    });
    Dataset out;
    for (auto& d : deltas) {
        auto& series = out[d.region];
        series.region = d.region;
        series.deltas.push_back(std::move(d));
    }
    return out;
}

std::vector<SeriesWarning> validate_series(const RegionSeries& series) {
    std::vector<SeriesWarning> out;
    for (size_t i = 0; i < series.deltas.size(); ++i) {
        const auto& d = series.deltas[i];
        if (d.r < 0)
            out.push_back({WarningKind::NegativeRecoveredDelta, series.region, d.date,
                           "recovered delta " + std::to_string(d.r)});
        if (d.d < 0)
            out.push_back({WarningKind::NegativeDeadDelta, series.region, d.date,
                           "dead delta " + std::to_string(d.d)});
        if (i > 0) {
            int gap = series.deltas[i - 1].date.days_until(d.date);
            if (gap > 1)
                out.push_back({WarningKind::DateGap, series.region, d.date,
                               std::to_string(gap - 1) + " missing day(s) before " +
                                   d.date.to_string()});
        }
    }
    for (Date date : series.identity_violations)
        out.push_back({WarningKind::ConfirmedIdentity, series.region, date,
                       "confirmed != active + recovered + dead"});
    return out;
}

} // namespace epihmm
