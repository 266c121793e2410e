#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epihmm/learner.hpp"
#include "epihmm/model.hpp"
#include "epihmm/quantizer.hpp"

namespace epihmm {

// Viterbi result for one region. cumulative_log_prob[t] is the path's log
// probability through step t; log_probability is its final value.
struct DecodedPath {
    std::string region;
    std::vector<std::pair<Date, HiddenState>> path;
    std::vector<double> cumulative_log_prob;
    double log_probability = 0.0;
    std::vector<std::string> warnings;
};

// Multiset emission likelihood: log P(bag | state) = sum_k count_k * log B[state][k].
// An all-zero bag gives 0; a positive count on a zero-probability symbol gives
// -infinity.
double day_log_emission(HiddenState state, const ObservationBag& bag,
                        const StochasticMatrix& emission);

// log sum over all state paths, computed with a per-day additive rescale so
// bags with counts in the thousands cannot underflow. Throws
// Error(AllPathsImpossible) when the sequence has probability zero.
double forward_log_likelihood(const HmmModel& model, std::span<const ObservationBag> bags);

// Argmax state path. Ties break toward the earlier state in H < I < S < D at
// every backtrack step, so decoding is byte-reproducible. Unvisited (all-zero)
// transition rows are substituted with uniform rows, recorded in warnings.
DecodedPath viterbi_decode(const HmmModel& model, std::span<const ObservationBag> bags);

// Empirical transition frequencies of one region's label sequence. Adjacent
// entries are paired in list order: the paper's per-region diagrams span
// reporting gaps, so a gap does not break the chain here (unlike the learner's
// pooled transition counts).
struct RegionTransitionProfile {
    std::string region;
    StochasticMatrix frequencies;
    std::array<double, kNumStates> occupancy{};
    DateRange window;
};

RegionTransitionProfile region_transition_profile(std::span<const LabeledState> labels,
                                                  DateRange window);

} // namespace epihmm
