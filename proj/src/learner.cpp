#include "epihmm/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "epihmm/errors.hpp"
#include "epihmm/inference.hpp"

namespace epihmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t idx(HiddenState s) { return static_cast<std::size_t>(s); }
std::size_t idx(ObservationSymbol s) { return static_cast<std::size_t>(s); }

CountMatrix to_count_matrix(const std::array<std::array<long long, 4>, 4>& a) {
    CountMatrix m(kNumStates, std::vector<long long>(kNumSymbols, 0));
    for (std::size_t i = 0; i < kNumStates; ++i)
        for (std::size_t j = 0; j < 4; ++j) m[i][j] = a[i][j];
    return m;
}

} // namespace

ObservationBag bag_observations(const RegionDayDelta& delta) {
    ObservationBag bag;
    bag.date = delta.date;
    bag.region = delta.region;
    bag.counts[idx(ObservationSymbol::ActiveMinus)] = std::max<long long>(-delta.a, 0);
    bag.counts[idx(ObservationSymbol::Active)] = std::max<long long>(delta.a, 0);
    bag.counts[idx(ObservationSymbol::Recovered)] = std::max<long long>(delta.r, 0);
    bag.counts[idx(ObservationSymbol::Dead)] = std::max<long long>(delta.d, 0);
    return bag;
}

BagsByRegion bag_dataset(const Dataset& dataset) {
    BagsByRegion out;
    for (const auto& [region, series] : dataset) {
        auto& bags = out[region];
        bags.reserve(series.deltas.size());
        for (const auto& d : series.deltas) bags.push_back(bag_observations(d));
    }
    return out;
}

namespace {

std::map<std::string, std::map<Date, HiddenState>> label_index(const LabelsByRegion& labels) {
    std::map<std::string, std::map<Date, HiddenState>> out;
    for (const auto& [region, seq] : labels) {
        auto& by_date = out[region];
        for (const auto& l : seq) by_date[l.date] = l.base;
    }
    return out;
}

} // namespace

long long TransitionCounts::total() const {
    long long t = 0;
    for (const auto& row : counts)
        for (long long v : row) t += v;
    return t;
}

TransitionCounts count_transitions(const LabelsByRegion& labels, DateRange window) {
    TransitionCounts out;
    out.window = window;
    for (const auto& [region, seq] : labels) {
        for (std::size_t i = 1; i < seq.size(); ++i) {
            if (seq[i - 1].date.days_until(seq[i].date) != 1) continue; // gap: no pair
            if (!window.contains(seq[i].date)) continue;
            out.counts[idx(seq[i - 1].base)][idx(seq[i].base)]++;
        }
    }
    return out;
}

StochasticMatrix estimate_transition_matrix(const TransitionCounts& c, double smoothing,
                                            ZeroRowPolicy policy) {
    return normalize_counts(to_count_matrix(c.counts), state_code_labels(),
                            state_code_labels(), policy, smoothing);
}

EmissionCounts count_emissions(const LabelsByRegion& labels, const BagsByRegion& bags,
                               DateRange window) {
    EmissionCounts out;
    out.window = window;
    const auto index = label_index(labels);
    for (const auto& [region, bag_list] : bags) {
        auto region_it = index.find(region);
        for (const auto& bag : bag_list) {
            if (!window.contains(bag.date)) continue;
            const HiddenState* base = nullptr;
            if (region_it != index.end()) {
                auto date_it = region_it->second.find(bag.date);
                if (date_it != region_it->second.end()) base = &date_it->second;
            }
            if (!base)
                raise(Errc::MissingLabel,
                      "no label for " + region + " on " + bag.date.to_string());
            auto& row = out.counts[idx(*base)];
            for (std::size_t k = 0; k < kNumSymbols; ++k) row[k] += bag.counts[k];
        }
    }
    return out;
}

StochasticMatrix estimate_emission_matrix(const EmissionCounts& e, ZeroRowPolicy policy) {
    return normalize_counts(to_count_matrix(e.counts), state_code_labels(),
                            symbol_code_labels(), policy, 0.0);
}

PiSeries daily_state_distribution(const LabelsByRegion& labels, DateRange window) {
    std::map<Date, std::array<int, kNumStates>> per_date;
    for (const auto& [region, seq] : labels)
        for (const auto& l : seq)
            if (window.contains(l.date)) per_date[l.date][idx(l.base)]++;
    PiSeries out;
    out.reserve(per_date.size());
    for (const auto& [date, counts] : per_date) {
        PiEntry entry;
        entry.date = date;
        entry.regions_reporting = counts[0] + counts[1] + counts[2] + counts[3];
        for (std::size_t s = 0; s < kNumStates; ++s)
            entry.distribution[s] =
                static_cast<double>(counts[s]) / entry.regions_reporting;
        out.push_back(entry);
    }
    return out;
}

namespace {

// Labels the in-window slice of every region. The slice's first day threads
// from cfg.carry_forward_initial so a window never depends on earlier data.
LabelsByRegion label_window(const Dataset& dataset, DateRange window, const RuleConfig& cfg) {
    LabelsByRegion out;
    for (const auto& [region, series] : dataset) {
        RegionSeries slice;
        slice.region = region;
        for (const auto& d : series.deltas)
            if (window.contains(d.date)) slice.deltas.push_back(d);
        if (slice.deltas.empty()) continue;
        out[region] = label_series(slice, cfg);
    }
    return out;
}

HmmModel model_from_labels(const LabelsByRegion& labels, const BagsByRegion& bags,
                           DateRange window, const std::string& rule_id, double smoothing,
                           const PiSeries& pi_series) {
    HmmModel model;
    model.transition = estimate_transition_matrix(count_transitions(labels, window),
                                                  smoothing, ZeroRowPolicy::ZeroRow);
    model.emission = estimate_emission_matrix(count_emissions(labels, bags, window),
                                              ZeroRowPolicy::ZeroRow);
    model.initial = pi_series.back().distribution;
    model.metadata.window_start = window.start;
    model.metadata.window_end = window.end;
    model.metadata.rule_id = rule_id;
    return model;
}

} // namespace

FitResult fit_heuristic(const Dataset& dataset, DateRange window, const RuleConfig& cfg,
                        double smoothing) {
    check_rule(cfg);
    if (window.start > window.end || window.num_days() < 2)
        raise(Errc::EmptyWindow, "window must span at least 2 dates");
    LabelsByRegion labels = label_window(dataset, window, cfg);
    if (labels.empty())
        raise(Errc::EmptyWindow, "no region has data in " + window.start.to_string() +
                                     ".." + window.end.to_string());
    PiSeries pi_series = daily_state_distribution(labels, window);
    BagsByRegion bags = bag_dataset(dataset);
    FitResult result;
    result.model = model_from_labels(labels, bags, window, cfg.rule_id, smoothing, pi_series);
    result.pi_series = std::move(pi_series);
    return result;
}

namespace {

LabelsByRegion decode_all(const HmmModel& model, const BagsByRegion& bags, DateRange window) {
    LabelsByRegion out;
    for (const auto& [region, bag_list] : bags) {
        std::vector<ObservationBag> in_window;
        for (const auto& b : bag_list)
            if (window.contains(b.date)) in_window.push_back(b);
        if (in_window.empty()) continue;
        DecodedPath path = viterbi_decode(model, in_window);
        auto& seq = out[region];
        seq.reserve(path.path.size());
        for (const auto& [date, state] : path.path) {
            LabeledState l;
            l.date = date;
            l.region = region;
            l.base = state;
            seq.push_back(std::move(l));
        }
    }
    return out;
}

void check_decodable(const HmmModel& model, ZeroRowPolicy policy) {
    if (policy != ZeroRowPolicy::ZeroRow) return;
    for (std::size_t i = 0; i < model.transition.row_count(); ++i)
        if (model.transition.row_unvisited(i))
            raise(Errc::DegenerateModel,
                  "transition row " + model.transition.row_labels()[i] +
                      " is all-zero; decode with the Uniform policy");
}

double max_abs_change(const HmmModel& a, const HmmModel& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < kNumStates; ++i) {
        m = std::max(m, std::abs(a.initial[i] - b.initial[i]));
        for (std::size_t j = 0; j < kNumStates; ++j) {
            m = std::max(m, std::abs(a.transition.at(i, j) - b.transition.at(i, j)));
            m = std::max(m, std::abs(a.emission.at(i, j) - b.emission.at(i, j)));
        }
    }
    return m;
}

} // namespace

HmmModel refine(const HmmModel& model, const Dataset& dataset, DateRange window,
                const RefineOptions& options) {
    if (options.max_iters < 1) raise(Errc::EmptyWindow, "max_iters must be >= 1");
    BagsByRegion bags = bag_dataset(dataset);

    HmmModel current = model;
    std::optional<LabelsByRegion> previous_labels;
    int iterations = 0;
    while (iterations < options.max_iters) {
        check_decodable(current, options.decode_policy);
        LabelsByRegion labels = decode_all(current, bags, window);
        if (labels.empty()) raise(Errc::EmptyWindow, "no data in refine window");
        if (previous_labels && labels == *previous_labels) break; // fixed point
        PiSeries pi_series = daily_state_distribution(labels, window);
        HmmModel next = model_from_labels(labels, bags, window, current.metadata.rule_id,
                                          0.0, pi_series);
        double change = max_abs_change(current, next);
        current = std::move(next);
        previous_labels = std::move(labels);
        ++iterations;
        if (options.tol > 0.0 && change <= options.tol) break;
    }
    current.metadata.refine_iterations = iterations;
    return current;
}

namespace {

struct ForwardBackward {
    std::vector<std::array<double, kNumStates>> alpha, beta, gamma, shifted_emission;
    std::vector<double> scale;
    double log_likelihood = 0.0;
};

ForwardBackward forward_backward(const HmmModel& model,
                                 const std::vector<ObservationBag>& bags) {
    const std::size_t n = bags.size();
    ForwardBackward fb;
    fb.alpha.resize(n);
    fb.beta.resize(n);
    fb.gamma.resize(n);
    fb.shifted_emission.resize(n);
    fb.scale.resize(n);

    for (std::size_t t = 0; t < n; ++t) {
        std::array<double, kNumStates> le{};
        double shift = kNegInf;
        for (std::size_t s = 0; s < kNumStates; ++s) {
            le[s] = day_log_emission(static_cast<HiddenState>(s), bags[t], model.emission);
            shift = std::max(shift, le[s]);
        }
        if (shift == kNegInf)
            raise(Errc::NonFiniteLikelihood,
                  "no state can emit the bag of " + bags[t].date.to_string());
        double total = 0.0;
        for (std::size_t s = 0; s < kNumStates; ++s) {
            double e = le[s] == kNegInf ? 0.0 : std::exp(le[s] - shift);
            fb.shifted_emission[t][s] = e;
            double prior;
            if (t == 0) {
                prior = model.initial[s];
            } else {
                prior = 0.0;
                for (std::size_t p = 0; p < kNumStates; ++p)
                    prior += fb.alpha[t - 1][p] * model.transition.at(p, s);
            }
            fb.alpha[t][s] = prior * e;
            total += fb.alpha[t][s];
        }
        if (!(total > 0.0) || !std::isfinite(total))
            raise(Errc::NonFiniteLikelihood,
                  "zero-probability observation at " + bags[t].date.to_string());
        for (auto& v : fb.alpha[t]) v /= total;
        fb.scale[t] = total;
        fb.log_likelihood += std::log(total) + shift;
    }

    for (std::size_t s = 0; s < kNumStates; ++s) fb.beta[n - 1][s] = 1.0;
    for (std::size_t t = n - 1; t-- > 0;) {
        for (std::size_t i = 0; i < kNumStates; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < kNumStates; ++j)
                sum += model.transition.at(i, j) * fb.shifted_emission[t + 1][j] *
                       fb.beta[t + 1][j];
            fb.beta[t][i] = sum / fb.scale[t + 1];
        }
    }
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t s = 0; s < kNumStates; ++s)
            fb.gamma[t][s] = fb.alpha[t][s] * fb.beta[t][s];
    return fb;
}

} // namespace

BaumWelchResult fit_baum_welch(const Dataset& dataset, DateRange window,
                               const HmmModel& init, int max_iters, double tol) {
    if (max_iters < 1) raise(Errc::EmptyWindow, "max_iters must be >= 1");
    BagsByRegion all_bags = bag_dataset(dataset);
    std::vector<std::vector<ObservationBag>> sequences;
    for (const auto& [region, bag_list] : all_bags) {
        std::vector<ObservationBag> in_window;
        for (const auto& b : bag_list)
            if (window.contains(b.date)) in_window.push_back(b);
        if (!in_window.empty()) sequences.push_back(std::move(in_window));
    }
    if (sequences.empty()) raise(Errc::EmptyWindow, "no data in training window");

    BaumWelchResult result;
    HmmModel model = init;
    model.metadata.window_start = window.start;
    model.metadata.window_end = window.end;

    for (int iter = 0; iter < max_iters; ++iter) {
        std::array<std::array<double, kNumStates>, kNumStates> a_num{};
        std::array<std::array<double, kNumSymbols>, kNumStates> b_num{};
        std::array<double, kNumStates> b_den{};
        std::array<double, kNumStates> pi_num{};
        double log_likelihood = 0.0;

        for (const auto& bags : sequences) {
            ForwardBackward fb = forward_backward(model, bags);
            log_likelihood += fb.log_likelihood;
            for (std::size_t s = 0; s < kNumStates; ++s) pi_num[s] += fb.gamma[0][s];
            for (std::size_t t = 0; t + 1 < bags.size(); ++t) {
                for (std::size_t i = 0; i < kNumStates; ++i) {
                    double base = fb.alpha[t][i] / fb.scale[t + 1];
                    if (base == 0.0) continue;
                    for (std::size_t j = 0; j < kNumStates; ++j)
                        a_num[i][j] += base * model.transition.at(i, j) *
                                       fb.shifted_emission[t + 1][j] * fb.beta[t + 1][j];
                }
            }
            for (std::size_t t = 0; t < bags.size(); ++t) {
                const double day_total = static_cast<double>(bags[t].total());
                for (std::size_t s = 0; s < kNumStates; ++s) {
                    double g = fb.gamma[t][s];
                    if (g == 0.0) continue;
                    for (std::size_t k = 0; k < kNumSymbols; ++k)
                        b_num[s][k] += g * static_cast<double>(bags[t].counts[k]);
                    b_den[s] += g * day_total;
                }
            }
        }

        result.log_likelihood_trace.push_back(log_likelihood);
        result.iterations = iter + 1;
        const std::size_t traced = result.log_likelihood_trace.size();
        if (traced > 1) {
            double gain = log_likelihood - result.log_likelihood_trace[traced - 2];
            if (gain < tol) break;
        }

        std::vector<std::vector<double>> a_rows(kNumStates,
                                                std::vector<double>(kNumStates, 0.0));
        std::vector<std::vector<double>> b_rows(kNumStates,
                                                std::vector<double>(kNumSymbols, 0.0));
        std::array<double, kNumStates> pi{};
        double pi_total = 0.0;
        for (std::size_t i = 0; i < kNumStates; ++i) {
            double row_total = 0.0;
            for (double v : a_num[i]) row_total += v;
            for (std::size_t j = 0; j < kNumStates; ++j)
                a_rows[i][j] = row_total > 0.0 ? a_num[i][j] / row_total
                                               : model.transition.at(i, j);
            for (std::size_t k = 0; k < kNumSymbols; ++k)
                b_rows[i][k] = b_den[i] > 0.0 ? b_num[i][k] / b_den[i]
                                              : model.emission.at(i, k);
            pi_total += pi_num[i];
        }
        for (std::size_t i = 0; i < kNumStates; ++i) pi[i] = pi_num[i] / pi_total;

        model.transition = make_stochastic_matrix(a_rows, state_code_labels(),
                                                  state_code_labels(), 1e-9);
        model.emission = make_stochastic_matrix(b_rows, state_code_labels(),
                                                symbol_code_labels(), 1e-9);
        model.initial = pi;
    }

    result.model = std::move(model);
    return result;
}

std::vector<HmmModel> windowed_retrain(const Dataset& dataset, int window_length_days,
                                       int stride_days, const RuleConfig& cfg,
                                       double smoothing) {
    if (window_length_days < 2)
        raise(Errc::EmptyWindow, "window_length must be at least 2 days");
    if (stride_days < 1) raise(Errc::EmptyWindow, "stride must be at least 1 day");

    bool have_dates = false;
    Date min_date, max_date;
    for (const auto& [region, series] : dataset) {
        for (const auto& d : series.deltas) {
            if (!have_dates || d.date < min_date) min_date = d.date;
            if (!have_dates || d.date > max_date) max_date = d.date;
            have_dates = true;
        }
    }
    if (!have_dates) raise(Errc::EmptyWindow, "dataset has no rows");

    std::vector<HmmModel> models;
    for (Date start = min_date; start.plus_days(1) <= max_date;
         start = start.plus_days(stride_days)) {
        Date end = start.plus_days(window_length_days - 1);
        if (max_date < end) end = max_date;
        models.push_back(fit_heuristic(dataset, {start, end}, cfg, smoothing).model);
    }
    return models;
}

} // namespace epihmm
