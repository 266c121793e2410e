#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epihmm/ingest.hpp"
#include "epihmm/model.hpp"

namespace epihmm {

// Inferred hidden state for one region-day. C1 always rides on a Healthy base
// and C2 on a Symptomatic base; carried_forward marks days where the
// zero-activity rule copied the previous state.
struct LabeledState {
    Date date;
    std::string region;
    HiddenState base = HiddenState::Healthy;
    CatastropheTag catastrophe = CatastropheTag::None;
    bool carried_forward = false;

    bool operator==(const LabeledState&) const = default;
};

// Identifies the decision procedure so trained models record provenance.
struct RuleConfig {
    std::string rule_id = "paper-v1";
    HiddenState carry_forward_initial = HiddenState::Healthy;
};

// The spec's default quantizer, evaluated in order on (a, r, d) with r and d
// clamped at zero inside comparisons:
//   1. exact (0,0,0)            -> carry forward the previous base state
//   2. d>0 and d>=r and d>=a    -> C1 on Healthy if a<=0, else C2 on Symptomatic
//   3. a<0                      -> Healthy
//   4. r>a                      -> Detected
//   5. a>0 and r==0 and d>0     -> Infected
//   6. otherwise                -> Symptomatic
LabeledState quantize_day(const RegionDayDelta& delta,
                          const std::optional<LabeledState>& prev,
                          const RuleConfig& cfg);

// One label per delta; prev threading starts from cfg.carry_forward_initial.
std::vector<LabeledState> label_series(const RegionSeries& series, const RuleConfig& cfg);

// Throws Error(UnknownRule) unless cfg.rule_id names an implemented rule.
void check_rule(const RuleConfig& cfg);

// Canonical output ordering: region ascending, then date ascending.
void sort_canonical(std::vector<LabeledState>& labels);

// CSV form "date,region,base_state,catastrophe,carried_forward".
std::string labels_to_csv(std::span<const LabeledState> labels);
std::vector<LabeledState> labels_from_csv(std::istream& in);

} // namespace epihmm
