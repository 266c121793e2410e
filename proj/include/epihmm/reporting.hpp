#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "epihmm/inference.hpp"
#include "epihmm/learner.hpp"
#include "epihmm/quantizer.hpp"

namespace epihmm {

// Regions bucketed by base state on one date, alphabetical within buckets.
struct StatusTable {
    Date as_of;
    std::array<std::vector<std::string>, kNumStates> buckets;
};

// Every label must carry the same date; throws Error(MissingRegionDate)
// otherwise.
StatusTable status_table(std::span<const LabeledState> final_date_labels);

std::string status_table_csv(const StatusTable& table);   // "state,region" rows
std::string status_table_text(const StatusTable& table);  // aligned plain text

// CSV "date,healthy,infected,symptomatic,detected", one row per entry, full
// double precision.
std::string distribution_timeseries(const PiSeries& series);

// Transition diagram as DOT text. Nodes are declared in the benign cycle order
// H, I, S, D. Cycle-successor edges (H->I, I->S, S->D, D->H) and the H and D
// self-loops are solid; every other edge, including the I and S self-loops, is
// dashed. Zero-probability edges are omitted; labels carry two decimals;
// edges are emitted sorted by (from, to) so output is byte-stable.
std::string render_dot(const RegionTransitionProfile& profile);

} // namespace epihmm
