#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "epihmm/dates.hpp"

namespace epihmm {

// One region-day of the cumulative upstream report.
struct RegionDayRecord {
    Date date;
    std::string region;
    long long confirmed = 0;
    long long active = 0;
    long long recovered = 0;
    long long dead = 0;
};

// One region-day's net additions. `a` may be negative (active cases shrank);
// negative r or d means an upstream correction and is preserved as-is.
struct RegionDayDelta {
    Date date;
    std::string region;
    long long a = 0;
    long long r = 0;
    long long d = 0;

    bool operator==(const RegionDayDelta&) const = default;
};

// Strictly date-increasing deltas for one region. Date gaps are allowed;
// identity_violations records dates where confirmed != active+recovered+dead.
struct RegionSeries {
    std::string region;
    std::vector<RegionDayDelta> deltas;
    std::vector<Date> identity_violations;
};

using Dataset = std::map<std::string, RegionSeries>;

enum class CsvMode { Cumulative, Delta };

struct ParsedSnapshot {
    CsvMode mode = CsvMode::Delta;
    std::vector<RegionDayRecord> records; // Cumulative mode
    std::vector<RegionDayDelta> deltas;   // Delta mode
};

// Headers: "date,region,confirmed,active,recovered,dead" (Cumulative) or
// "date,region,active_delta,recovered_delta,dead_delta" (Delta). Malformed
// lines are rejected with their line number; duplicate (date, region) pairs
// are rejected.
ParsedSnapshot parse_snapshot_csv(std::istream& in, CsvMode mode);

// Cumulative records -> per-region delta series. Consecutive available dates
// are differenced; the first date of a region seeds deltas with its raw
// values. Nothing is clamped or interpolated.
Dataset build_delta_series(std::vector<RegionDayRecord> records);

// Delta-mode entry point: groups rows by region and orders by date.
Dataset group_delta_series(std::vector<RegionDayDelta> deltas);

enum class WarningKind {
    NegativeRecoveredDelta,
    NegativeDeadDelta,
    DateGap,
    ConfirmedIdentity,
};

struct SeriesWarning {
    WarningKind kind;
    std::string region;
    Date date;
    std::string message;
};

// Non-mutating sanity pass: monotonicity violations (negative r/d deltas),
// date gaps, and confirmed-identity violations recorded at build time.
std::vector<SeriesWarning> validate_series(const RegionSeries& series);

} // namespace epihmm
