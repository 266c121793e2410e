#include "epihmm/reporting.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>

#include "epihmm/errors.hpp"

namespace epihmm {

namespace {

// Shortest round-trip decimal form.
std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace

StatusTable status_table(std::span<const LabeledState> final_date_labels) {
    if (final_date_labels.empty())
        raise(Errc::MissingRegionDate, "no labels supplied");
    StatusTable table;
    table.as_of = final_date_labels.front().date;
    for (const auto& l : final_date_labels) {
        if (l.date != table.as_of)
            raise(Errc::MissingRegionDate,
                  "region " + l.region + " is labeled " + l.date.to_string() +
                      ", expected " + table.as_of.to_string());
        table.buckets[static_cast<std::size_t>(l.base)].push_back(l.region);
    }
    for (auto& bucket : table.buckets) std::sort(bucket.begin(), bucket.end());
    return table;
}

std::string status_table_csv(const StatusTable& table) {
    std::string out = "state,region\n";
    for (std::size_t s = 0; s < kNumStates; ++s)
        for (const auto& region : table.buckets[s]) {
            out += state_code(static_cast<HiddenState>(s));
            out += ',';
            out += region;
            out += '\n';
        }
    return out;
}

std::string status_table_text(const StatusTable& table) {
    std::string out = "Status of regions on " + table.as_of.to_string() + "\n";
    for (std::size_t s = 0; s < kNumStates; ++s) {
        const auto& bucket = table.buckets[s];
        char head[48];
        std::snprintf(head, sizeof head, "%-12s (%2zu): ",
                      std::string(state_name(static_cast<HiddenState>(s))).c_str(),
                      bucket.size());
        out += head;
        for (std::size_t i = 0; i < bucket.size(); ++i) {
            if (i) out += ", ";
            out += bucket[i];
        }
        out += '\n';
    }
    return out;
}

std::string distribution_timeseries(const PiSeries& series) {
    std::string out = "date,healthy,infected,symptomatic,detected\n";
    for (const auto& entry : series) {
        out += entry.date.to_string();
        for (double v : entry.distribution) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

namespace {

bool benign_edge(std::size_t from, std::size_t to) {
    if (from == to)
        return from == static_cast<std::size_t>(HiddenState::Healthy) ||
               from == static_cast<std::size_t>(HiddenState::Detected);
    return (from + 1) % kNumStates == to; // the H->I->S->D->H cycle
}

std::string dot_identifier(const std::string& region) {
    std::string out;
    for (char c : region)
        out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0]))) out = "region_" + out;
    return out;
}

} // namespace

std::string render_dot(const RegionTransitionProfile& profile) {
    std::string out = "digraph " + dot_identifier(profile.region) + " {\n";
    out += "  rankdir=LR;\n";
    out += "  node [shape=circle];\n";
    for (auto s : kAllStates) {
        out += "  ";
        out += state_code(s);
        out += ";\n";
    }
    for (std::size_t from = 0; from < kNumStates; ++from) {
        for (std::size_t to = 0; to < kNumStates; ++to) {
            double p = profile.frequencies.at(from, to);
            if (p <= 0.0) continue;
            char label[16];
            std::snprintf(label, sizeof label, "%.2f", p);
            out += "  ";
            out += state_code(static_cast<HiddenState>(from));
            out += " -> ";
            out += state_code(static_cast<HiddenState>(to));
            out += " [label=\"";
            out += label;
            out += benign_edge(from, to) ? "\", style=solid];\n" : "\", style=dashed];\n";
        }
    }
    out += "}\n";
    return out;
}

} // namespace epihmm
