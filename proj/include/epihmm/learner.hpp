#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "epihmm/ingest.hpp"
#include "epihmm/model.hpp"
#include "epihmm/quantizer.hpp"

namespace epihmm {

// Multiset of observation symbols for one region-day: a day with deltas
// (a, r, d) emits |a| copies of A- when a is negative, a copies of A when
// positive, plus r copies of R and d copies of D (negatives clamp to zero).
struct ObservationBag {
    Date date;
    std::string region;
    std::array<long long, kNumSymbols> counts{};

    long long total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
    bool operator==(const ObservationBag&) const = default;
};

ObservationBag bag_observations(const RegionDayDelta& delta);

using LabelsByRegion = std::map<std::string, std::vector<LabeledState>>;
using BagsByRegion = std::map<std::string, std::vector<ObservationBag>>;

// Bags for every delta of every region.
BagsByRegion bag_dataset(const Dataset& dataset);

struct TransitionCounts {
    std::array<std::array<long long, kNumStates>, kNumStates> counts{};
    DateRange window;

    long long total() const;
};

struct EmissionCounts {
    std::array<std::array<long long, kNumSymbols>, kNumStates> counts{};
    DateRange window;
};

// Pools consecutive-day label pairs across regions; a pair is tallied when its
// target date lies in the window. Date gaps contribute nothing. Catastrophe
// tags collapse to their base states.
TransitionCounts count_transitions(const LabelsByRegion& labels, DateRange window);

StochasticMatrix estimate_transition_matrix(const TransitionCounts& c,
                                            double smoothing = 0.0,
                                            ZeroRowPolicy policy = ZeroRowPolicy::ZeroRow);

// Adds each in-window bag to the row of that day's base state. Throws
// Error(MissingLabel) when a bagged day has no label.
EmissionCounts count_emissions(const LabelsByRegion& labels, const BagsByRegion& bags,
                               DateRange window);

StochasticMatrix estimate_emission_matrix(const EmissionCounts& e,
                                          ZeroRowPolicy policy = ZeroRowPolicy::ZeroRow);

struct PiEntry {
    Date date;
    std::array<double, kNumStates> distribution{};
    int regions_reporting = 0;
};

// One entry per in-window date with at least one labeled region; the vector is
// the fraction of reporting regions in each state. Dates nobody reported are
// simply absent.
using PiSeries = std::vector<PiEntry>;

PiSeries daily_state_distribution(const LabelsByRegion& labels, DateRange window);

struct FitResult {
    HmmModel model;
    PiSeries pi_series;
};

// The count-based learning procedure: label every region-day with the rule,
// pool transition and emission counts over the window in one streaming pass,
// and normalize. The model's pi is the final in-window daily distribution.
FitResult fit_heuristic(const Dataset& dataset, DateRange window, const RuleConfig& cfg,
                        double smoothing = 0.0);

struct RefineOptions {
    int max_iters = 10;
    double tol = 0.0;                                   // extra stop: max |model change|
    ZeroRowPolicy decode_policy = ZeroRowPolicy::Uniform;
};

// Viterbi-relabels every region under the current model, recounts and
// re-estimates A and B, and repeats until the labels reach a fixed point or
// max_iters is hit. With ZeroRow decode policy an all-zero transition row
// needed for decoding raises Error(DegenerateModel).
HmmModel refine(const HmmModel& model, const Dataset& dataset, DateRange window,
                const RefineOptions& options = {});

struct BaumWelchResult {
    HmmModel model;
    std::vector<double> log_likelihood_trace;
    int iterations = 0;
};

// Standard forward-backward EM over all region sequences jointly, with the
// multiset emission likelihood. init must be strictly positive everywhere.
// Stops when the log-likelihood improves by less than tol.
BaumWelchResult fit_baum_welch(const Dataset& dataset, DateRange window,
                               const HmmModel& init, int max_iters, double tol);

// One model per window of window_length days, advancing by stride days from
// the earliest date in the dataset, each trained only on its own window.
std::vector<HmmModel> windowed_retrain(const Dataset& dataset, int window_length_days,
                                       int stride_days, const RuleConfig& cfg,
                                       double smoothing = 0.0);

} // namespace epihmm
