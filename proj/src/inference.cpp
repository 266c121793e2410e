#include "epihmm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "epihmm/errors.hpp"

namespace epihmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// A with unvisited rows replaced by uniform rows, flattened to 4x4.
std::array<std::array<double, kNumStates>, kNumStates>
effective_transition(const StochasticMatrix& a, std::vector<std::string>* warnings) {
    std::array<std::array<double, kNumStates>, kNumStates> out{};
    for (std::size_t i = 0; i < kNumStates; ++i) {
        if (a.row_unvisited(i)) {
            for (std::size_t j = 0; j < kNumStates; ++j)
                out[i][j] = 1.0 / kNumStates;
            if (warnings)
                warnings->push_back("transition row " + a.row_labels()[i] +
                                    " is unvisited; decoding with a uniform row");
        } else {
            for (std::size_t j = 0; j < kNumStates; ++j) out[i][j] = a.at(i, j);
        }
    }
    return out;
}

std::array<double, kNumStates> log_emissions_for_day(const HmmModel& model,
                                                     const ObservationBag& bag) {
    std::array<double, kNumStates> le{};
    for (std::size_t s = 0; s < kNumStates; ++s)
        le[s] = day_log_emission(static_cast<HiddenState>(s), bag, model.emission);
    return le;
}

} // namespace

double day_log_emission(HiddenState state, const ObservationBag& bag,
                        const StochasticMatrix& emission) {
    const auto row = emission.row(static_cast<std::size_t>(state));
    double sum = 0.0;
    for (std::size_t k = 0; k < kNumSymbols; ++k) {
        long long n = bag.counts[k];
        if (n == 0) continue;
        if (row[k] <= 0.0) return kNegInf;
        sum += static_cast<double>(n) * std::log(row[k]);
    }
    return sum;
}

double forward_log_likelihood(const HmmModel& model, std::span<const ObservationBag> bags) {
    if (bags.empty()) raise(Errc::EmptyWindow, "empty observation sequence");
    const auto a = effective_transition(model.transition, nullptr);

    std::array<double, kNumStates> alpha{};
    double log_scale = 0.0;
    for (std::size_t t = 0; t < bags.size(); ++t) {
        auto le = log_emissions_for_day(model, bags[t]);
        double shift = *std::max_element(le.begin(), le.end());
        if (shift == kNegInf)
            raise(Errc::AllPathsImpossible,
                  "no state can emit the bag of " + bags[t].date.to_string());
        std::array<double, kNumStates> next{};
        double total = 0.0;
        for (std::size_t s = 0; s < kNumStates; ++s) {
            double prior;
            if (t == 0) {
                prior = model.initial[s];
            } else {
                prior = 0.0;
                for (std::size_t p = 0; p < kNumStates; ++p) prior += alpha[p] * a[p][s];
            }
            next[s] = prior * (le[s] == kNegInf ? 0.0 : std::exp(le[s] - shift));
            total += next[s];
        }
        if (total <= 0.0)
            raise(Errc::AllPathsImpossible,
                  "sequence probability is zero at " + bags[t].date.to_string());
        for (auto& v : next) v /= total;
        alpha = next;
        log_scale += std::log(total) + shift;
    }
    return log_scale;
}

DecodedPath viterbi_decode(const HmmModel& model, std::span<const ObservationBag> bags) {
    if (bags.empty()) raise(Errc::EmptyWindow, "empty observation sequence");
    DecodedPath out;
    out.region = bags.front().region;
    const auto a = effective_transition(model.transition, &out.warnings);

    const std::size_t n = bags.size();
    std::vector<std::array<double, kNumStates>> score(n);
    std::vector<std::array<int, kNumStates>> back(n);

    for (std::size_t t = 0; t < n; ++t) {
        auto le = log_emissions_for_day(model, bags[t]);
        for (std::size_t s = 0; s < kNumStates; ++s) {
            if (t == 0) {
                double lp = model.initial[s] > 0.0 ? std::log(model.initial[s]) : kNegInf;
                score[0][s] = lp + le[s];
                back[0][s] = -1;
                continue;
            }
            double best = kNegInf;
            int best_prev = 0;
            for (std::size_t p = 0; p < kNumStates; ++p) {
                double la = a[p][s] > 0.0 ? std::log(a[p][s]) : kNegInf;
                double cand = score[t - 1][p] + la;
                if (cand > best) { // strict: keeps the H<I<S<D-earlier state on ties
                    best = cand;
                    best_prev = static_cast<int>(p);
                }
            }
            score[t][s] = best + le[s];
            back[t][s] = best_prev;
        }
    }

    double best = kNegInf;
    int state = 0;
    for (std::size_t s = 0; s < kNumStates; ++s) {
        if (score[n - 1][s] > best) {
            best = score[n - 1][s];
            state = static_cast<int>(s);
        }
    }
    if (best == kNegInf)
        raise(Errc::AllPathsImpossible, "all state paths have probability zero");

    std::vector<int> states(n);
    for (std::size_t t = n; t-- > 0;) {
        states[t] = state;
        if (t > 0) state = back[t][static_cast<std::size_t>(state)];
    }

    out.path.reserve(n);
    out.cumulative_log_prob.reserve(n);
    double running = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        auto s = static_cast<std::size_t>(states[t]);
        auto le = log_emissions_for_day(model, bags[t]);
        if (t == 0)
            running = (model.initial[s] > 0.0 ? std::log(model.initial[s]) : kNegInf) + le[s];
        else
            running += std::log(a[static_cast<std::size_t>(states[t - 1])][s]) + le[s];
        out.path.emplace_back(bags[t].date, static_cast<HiddenState>(s));
        out.cumulative_log_prob.push_back(running);
    }
    out.log_probability = running;
    return out;
}

RegionTransitionProfile region_transition_profile(std::span<const LabeledState> labels,
                                                  DateRange window) {
    std::vector<const LabeledState*> in_window;
    for (const auto& l : labels)
        if (window.contains(l.date)) in_window.push_back(&l);
    if (in_window.size() < 2)
        raise(Errc::InsufficientData, "need at least 2 labeled days in the window");

    RegionTransitionProfile out;
    out.region = in_window.front()->region;
    out.window = window;

    CountMatrix counts(kNumStates, std::vector<long long>(kNumStates, 0));
    std::array<long long, kNumStates> days{};
    days[static_cast<std::size_t>(in_window[0]->base)]++;
    for (std::size_t i = 1; i < in_window.size(); ++i) {
        counts[static_cast<std::size_t>(in_window[i - 1]->base)]
              [static_cast<std::size_t>(in_window[i]->base)]++;
        days[static_cast<std::size_t>(in_window[i]->base)]++;
    }
    out.frequencies = normalize_counts(counts, state_code_labels(), state_code_labels(),
                                       ZeroRowPolicy::ZeroRow);
    const double total = static_cast<double>(in_window.size());
    for (std::size_t s = 0; s < kNumStates; ++s)
        out.occupancy[s] = static_cast<double>(days[s]) / total;
    return out;
}

} // namespace epihmm
