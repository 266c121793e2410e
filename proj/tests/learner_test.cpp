#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"

using namespace epihmm;
using namespace testsupport;

namespace {

// Frozen by the transcription oracle: counting the paper-PRINTED labels of
// Tables 7A/7B over Apr 30..May 8. (The paper's own Table 8 tallies a larger
// total; the acceptance suite reports that divergence.)
const CountMatrix kPrintedTransitionCounts = {
    {82, 0, 25, 7}, {0, 0, 1, 1}, {27, 3, 89, 12}, {10, 0, 9, 13}};

const CountMatrix kPrintedEmissionCounts = {
    {1806, 133, 3625, 202}, {0, 237, 0, 15}, {16, 16590, 4708, 720}, {1, 715, 2360, 79}};

// Frozen rule-label counts over the same windows.
const CountMatrix kRuleTransitionCounts = {
    {93, 3, 23, 7}, {1, 1, 2, 1}, {18, 2, 82, 13}, {10, 0, 10, 13}};

const CountMatrix kRuleEmissionCounts = {
    {1823, 0, 3479, 185}, {0, 504, 0, 30}, {0, 16424, 4436, 706}, {0, 747, 2778, 95}};

LabelsByRegion rule_labels_for(const Dataset& dataset) {
    LabelsByRegion out;
    RuleConfig cfg;
    for (const auto& [region, series] : dataset) out[region] = label_series(series, cfg);
    return out;
}

} // namespace

TEST_CASE("bag_observations splits deltas into symbol counts") {
    auto bag = bag_observations(make_delta("UP", "2020-04-29", -10, 77, 5));
    CHECK(bag.counts[0] == 10); // A-
    CHECK(bag.counts[1] == 0);  // A
    CHECK(bag.counts[2] == 77); // R
    CHECK(bag.counts[3] == 5);  // D

    auto mh = bag_observations(make_delta("MH", "2020-04-29", 591, 106, 31));
    CHECK(mh.counts[0] == 0);
    CHECK(mh.counts[1] == 591);
    CHECK(mh.counts[2] == 106);
    CHECK(mh.counts[3] == 31);

    auto zero = bag_observations(make_delta("X", "2020-04-29", 0, 0, 0));
    CHECK(zero.total() == 0);

    // corrections clamp inside the bag
    auto neg = bag_observations(make_delta("X", "2020-04-29", 1, -7, -1));
    CHECK(neg.counts[1] == 1);
    CHECK(neg.counts[2] == 0);
    CHECK(neg.counts[3] == 0);
}

TEST_CASE("count_transitions on a single labeled chain") {
    LabelsByRegion labels;
    auto& seq = labels["only"];
    const char* states = "HHSH";
    for (int i = 0; i < 4; ++i) {
        LabeledState l;
        l.date = Date::parse("2020-04-29").plus_days(i);
        l.region = "only";
        l.base = *state_from_code(std::string(1, states[i]));
        seq.push_back(l);
    }
    auto counts = count_transitions(labels, {Date::parse("2020-04-29"),
                                             Date::parse("2020-05-02")});
    CHECK(counts.counts[0][0] == 1); // H->H
    CHECK(counts.counts[0][2] == 1); // H->S
    CHECK(counts.counts[2][0] == 1); // S->H
    CHECK(counts.total() == 3);
}

TEST_CASE("date gaps contribute no transition") {
    LabelsByRegion labels;
    auto add = [&](const std::string& region, const std::string& date) {
        LabeledState l;
        l.date = Date::parse(date);
        l.region = region;
        l.base = HiddenState::Symptomatic;
        labels[region].push_back(l);
    };
    add("full", "2020-05-01");
    add("full", "2020-05-02");
    add("full", "2020-05-03");
    add("gappy", "2020-05-01");
    add("gappy", "2020-05-02");
    add("gappy", "2020-05-04"); // 05-03 missing
    auto counts = count_transitions(labels, {Date::parse("2020-05-01"),
                                             Date::parse("2020-05-04")});
    CHECK(counts.total() == 3);
}

TEST_CASE("printed-label transition counts over Apr 30..May 8") {
    auto printed = load_fixture_labels("tables7_labels.csv");
    auto counts = count_transitions(printed, kTransitionWindow);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            CAPTURE(i);
            CAPTURE(j);
            CHECK(counts.counts[i][j] == kPrintedTransitionCounts[i][j]);
        }
    CHECK(counts.total() == 279); // 31 regions x 9 consecutive-day pairs
    // the Infected row is sparse enough to match the paper's tally exactly
    CHECK(counts.counts[1][2] == 1);
    CHECK(counts.counts[1][3] == 1);
}

TEST_CASE("estimate_transition_matrix normalizes Table 8's totals onto Table 10") {
    TransitionCounts c;
    c.window = kTransitionWindow;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) c.counts[i][j] = kTable8Counts[i][j];
    auto a = estimate_transition_matrix(c);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(std::abs(a.at(i, j) - kTable10A[i][j]) < 5e-4);

    SUBCASE("smoothing pulls rows toward uniform") {
        auto smoothed = estimate_transition_matrix(c, 1.0);
        double sum = 0.0;
        for (std::size_t j = 0; j < 4; ++j) sum += smoothed.at(1, j);
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(smoothed.at(1, 0) > 0.0); // zero cells gain mass
    }
}

TEST_CASE("printed-label emission counts over Apr 29..May 8") {
    auto printed = load_fixture_labels("tables7_labels.csv");
    auto bags = bag_dataset(load_tables7_dataset());
    auto counts = count_emissions(printed, bags, kFitWindow);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            CAPTURE(i);
            CAPTURE(j);
            CHECK(counts.counts[i][j] == kPrintedEmissionCounts[i][j]);
        }
    // the Infected row agrees with Table 9 exactly: (0, 237, 0, 15)
    CHECK(counts.counts[1][1] == 237);
    CHECK(counts.counts[1][3] == 15);
}

TEST_CASE("count_emissions raises MissingLabel") {
    LabelsByRegion labels; // empty
    BagsByRegion bags;
    bags["X"].push_back(make_bag("X", "2020-05-01", 0, 1, 0, 0));
    try {
        count_emissions(labels, bags, {Date::parse("2020-05-01"), Date::parse("2020-05-02")});
        FAIL("expected MissingLabel");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingLabel);
    }
}

TEST_CASE("estimate_emission_matrix reproduces Table 10's B from Table 9's totals") {
    EmissionCounts e;
    e.window = kFitWindow;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) e.counts[i][j] = kTable9Counts[i][j];
    auto b = estimate_emission_matrix(e);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            CAPTURE(i);
            CAPTURE(j);
            CHECK(std::abs(b.at(i, j) - kTable10B[i][j]) < 1e-4);
        }

    EmissionCounts single;
    single.window = kFitWindow;
    single.counts[2] = {0, 10, 5, 1};
    auto bs = estimate_emission_matrix(single);
    CHECK(bs.at(2, 1) == doctest::Approx(10.0 / 16.0));
    CHECK(bs.at(2, 2) == doctest::Approx(5.0 / 16.0));
    CHECK(bs.at(2, 3) == doctest::Approx(1.0 / 16.0));
    CHECK(bs.row_unvisited(0));
}

TEST_CASE("daily_state_distribution") {
    LabelsByRegion labels;
    auto add = [&](const std::string& region, const char* code) {
        LabeledState l;
        l.date = Date::parse("2020-05-20");
        l.region = region;
        l.base = *state_from_code(code);
        labels[region].push_back(l);
    };
    add("a", "H");
    add("b", "H");
    add("c", "S");
    add("d", "D");
    auto series = daily_state_distribution(labels, {Date::parse("2020-05-19"),
                                                    Date::parse("2020-05-21")});
    REQUIRE(series.size() == 1); // dates nobody reported are absent
    CHECK(series[0].regions_reporting == 4);
    CHECK(series[0].distribution[0] == 0.5);
    CHECK(series[0].distribution[1] == 0.0);
    CHECK(series[0].distribution[2] == 0.25);
    CHECK(series[0].distribution[3] == 0.25);
}

TEST_CASE("printed-label pi series matches the frozen 10-point table") {
    auto printed = load_fixture_labels("tables7_labels.csv");
    auto series = daily_state_distribution(printed, kFitWindow);
    REQUIRE(series.size() == 10);
    const int counts[10][4] = {{8, 1, 19, 3},  {12, 0, 14, 5}, {13, 0, 13, 5},
                               {16, 0, 12, 3}, {14, 0, 14, 3}, {12, 1, 14, 4},
                               {14, 0, 14, 3}, {14, 0, 14, 3}, {11, 0, 17, 3},
                               {13, 2, 12, 4}};
    for (int t = 0; t < 10; ++t) {
        CHECK(series[t].regions_reporting == 31);
        double sum = 0.0;
        for (int s = 0; s < 4; ++s) {
            CHECK(series[t].distribution[s] == doctest::Approx(counts[t][s] / 31.0));
            sum += series[t].distribution[s];
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("fit_heuristic equals hand-counted matrices on a two-region set") {
    Dataset dataset;
    dataset["P"].region = "P";
    dataset["P"].deltas = {make_delta("P", "2020-05-01", 5, 0, 1),
                           make_delta("P", "2020-05-02", -3, 4, 0)};
    dataset["Q"].region = "Q";
    dataset["Q"].deltas = {make_delta("Q", "2020-05-01", 10, 2, 0),
                           make_delta("Q", "2020-05-02", 1, 6, 0)};
    RuleConfig cfg;
    auto fit = fit_heuristic(dataset, {Date::parse("2020-05-01"), Date::parse("2020-05-02")},
                             cfg);
    const auto& a = fit.model.transition;
    // P: I -> H, Q: S -> D, nothing else
    CHECK(a.at(1, 0) == 1.0);
    CHECK(a.at(2, 3) == 1.0);
    CHECK(a.row_unvisited(0));
    CHECK(a.row_unvisited(3));
    const auto& b = fit.model.emission;
    CHECK(b.at(0, 0) == doctest::Approx(3.0 / 7.0)); // H bag: {A-:3, R:4}
    CHECK(b.at(0, 2) == doctest::Approx(4.0 / 7.0));
    CHECK(b.at(1, 1) == doctest::Approx(5.0 / 6.0)); // I bag: {A:5, D:1}
    CHECK(b.at(1, 3) == doctest::Approx(1.0 / 6.0));
    CHECK(b.at(2, 1) == doctest::Approx(10.0 / 12.0));
    CHECK(b.at(2, 2) == doctest::Approx(2.0 / 12.0));
    CHECK(b.at(3, 1) == doctest::Approx(1.0 / 7.0));
    CHECK(b.at(3, 2) == doctest::Approx(6.0 / 7.0));
    // pi is the final-date distribution: H and D hold one region each
    CHECK(fit.model.initial[0] == 0.5);
    CHECK(fit.model.initial[3] == 0.5);
    REQUIRE(fit.pi_series.size() == 2);
    CHECK(fit.pi_series[0].distribution[1] == 0.5);
    CHECK(fit.pi_series[0].distribution[2] == 0.5);
    CHECK(fit.model.metadata.rule_id == "paper-v1");
}

TEST_CASE("fit_heuristic rule-label counts on the transcription") {
    auto dataset = load_tables7_dataset();
    auto labels = rule_labels_for(dataset);
    auto tc = count_transitions(labels, kTransitionWindow);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(tc.counts[i][j] == kRuleTransitionCounts[i][j]);
    auto ec = count_emissions(labels, bag_dataset(dataset), kFitWindow);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(ec.counts[i][j] == kRuleEmissionCounts[i][j]);
}

TEST_CASE("fit_heuristic is order-independent and deterministic") {
    auto dataset = load_tables7_dataset();
    RuleConfig cfg;
    auto fit1 = fit_heuristic(dataset, kFitWindow, cfg);

    Dataset reversed;
    for (auto it = dataset.rbegin(); it != dataset.rend(); ++it)
        reversed[it->first] = it->second;
    auto fit2 = fit_heuristic(reversed, kFitWindow, cfg);
    CHECK(fit1.model.transition == fit2.model.transition);
    CHECK(fit1.model.emission == fit2.model.emission);
    CHECK(fit1.model.initial == fit2.model.initial);
}

TEST_CASE("fit_heuristic rejects empty windows") {
    auto dataset = load_tables7_dataset();
    RuleConfig cfg;
    try {
        fit_heuristic(dataset, {Date::parse("2020-04-29"), Date::parse("2020-04-29")}, cfg);
        FAIL("expected EmptyWindow");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyWindow);
    }
    try {
        fit_heuristic(dataset, {Date::parse("2021-01-01"), Date::parse("2021-01-31")}, cfg);
        FAIL("expected EmptyWindow");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyWindow);
    }
}

TEST_CASE("refine: one pass when max_iters=1, with metadata") {
    auto dataset = load_tables7_dataset();
    auto model = table10_model();
    auto refined = refine(model, dataset, kFitWindow, {1, 0.0, ZeroRowPolicy::Uniform});
    REQUIRE(refined.metadata.refine_iterations.has_value());
    CHECK(*refined.metadata.refine_iterations == 1);
    CHECK(validate_model(refined, 1e-9).empty());
}

TEST_CASE("refine converges on the transcription and reaches a fixed point") {
    auto dataset = load_tables7_dataset();
    auto model = table10_model();
    auto refined = refine(model, dataset, kFitWindow, {10, 0.0, ZeroRowPolicy::Uniform});
    REQUIRE(refined.metadata.refine_iterations.has_value());
    CHECK(*refined.metadata.refine_iterations <= 10);
    CHECK(validate_model(refined, 1e-9).empty());

    // re-running from the converged model changes nothing
    auto again = refine(refined, dataset, kFitWindow, {10, 0.0, ZeroRowPolicy::Uniform});
    CHECK(again.transition == refined.transition);
    CHECK(again.emission == refined.emission);
    CHECK(again.initial == refined.initial);
    CHECK(*again.metadata.refine_iterations == 1);
}

TEST_CASE("refine under ZeroRow policy raises DegenerateModel on all-zero rows") {
    auto dataset = load_tables7_dataset();
    auto model = table10_model();
    auto a = kTable10A;
    a[1] = {0, 0, 0, 0}; // Infected never leaves
    model.transition = make_stochastic_matrix(a, state_code_labels(), state_code_labels(),
                                              2e-3);
    try {
        refine(model, dataset, kFitWindow, {3, 0.0, ZeroRowPolicy::ZeroRow});
        FAIL("expected DegenerateModel");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DegenerateModel);
    }
    // the Uniform policy keeps decoding total
    auto ok = refine(model, dataset, kFitWindow, {3, 0.0, ZeroRowPolicy::Uniform});
    CHECK(validate_model(ok, 1e-9).empty());
}

TEST_CASE("fit_baum_welch recovers the generating transition matrix") {
    auto truth = sample_synthetic(42, 10, 2000, 20);
    DateRange window{Date::parse("2020-01-01"), Date::parse("2026-01-01")};

    // perturbed-truth init anchors the state identities
    HmmModel init = truth.model;
    {
        std::mt19937 rng(1234);
        std::uniform_real_distribution<double> jitter(0.01, 0.05);
        auto perturb = [&](const StochasticMatrix& m, std::vector<std::string> cols) {
            std::vector<std::vector<double>> rows(4, std::vector<double>(4));
            for (std::size_t i = 0; i < 4; ++i) {
                double total = 0.0;
                for (std::size_t j = 0; j < 4; ++j) {
                    rows[i][j] = m.at(i, j) + jitter(rng);
                    total += rows[i][j];
                }
                for (auto& v : rows[i]) v /= total;
            }
            return make_stochastic_matrix(rows, state_code_labels(), std::move(cols), 1e-9);
        };
        init.transition = perturb(truth.model.transition, state_code_labels());
        init.emission = perturb(truth.model.emission, symbol_code_labels());
        init.initial = {0.25, 0.25, 0.25, 0.25};
    }

    auto result = fit_baum_welch(truth.dataset, window, init, 100, 1e-7);
    REQUIRE(result.log_likelihood_trace.size() >= 2);

    // trace is non-decreasing within 1e-12
    for (std::size_t i = 1; i < result.log_likelihood_trace.size(); ++i)
        CHECK(result.log_likelihood_trace[i] >=
              result.log_likelihood_trace[i - 1] - 1e-12);

    for (std::size_t row = 0; row < 4; ++row) {
        double dist = l1_row_distance(result.model.transition, truth.model.transition, row);
        CAPTURE(row);
        MESSAGE("A row ", row, " L1 distance: ", dist);
        CHECK(dist <= 0.15);
    }
    CHECK(validate_model(result.model, 1e-9).empty());
}

TEST_CASE("one EM iteration from the truth does not decrease the likelihood") {
    auto truth = sample_synthetic(7, 4, 300, 15);
    DateRange window{Date::parse("2020-01-01"), Date::parse("2026-01-01")};
    // zero entries in the truth's B never face an observed symbol, by design
    auto result = fit_baum_welch(truth.dataset, window, truth.model, 2, -1.0);
    REQUIRE(result.log_likelihood_trace.size() == 2);
    CHECK(result.log_likelihood_trace[1] >= result.log_likelihood_trace[0] - 1e-12);
}

TEST_CASE("fit_baum_welch raises NonFiniteLikelihood on impossible observations") {
    Dataset dataset;
    dataset["X"].region = "X";
    dataset["X"].deltas = {make_delta("X", "2020-05-01", 3, 0, 0),
                           make_delta("X", "2020-05-02", 0, 2, 0)};
    // every state gives probability zero to R
    auto init = make_model({{0.25, 0.25, 0.25, 0.25},
                            {0.25, 0.25, 0.25, 0.25},
                            {0.25, 0.25, 0.25, 0.25},
                            {0.25, 0.25, 0.25, 0.25}},
                           {{0.5, 0.5, 0.0, 0.0},
                            {0.5, 0.5, 0.0, 0.0},
                            {0.5, 0.5, 0.0, 0.0},
                            {0.5, 0.5, 0.0, 0.0}},
                           {0.25, 0.25, 0.25, 0.25});
    try {
        fit_baum_welch(dataset, {Date::parse("2020-05-01"), Date::parse("2020-05-02")},
                       init, 5, 1e-9);
        FAIL("expected NonFiniteLikelihood");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NonFiniteLikelihood);
    }
}

TEST_CASE("windowed_retrain splits Apr 29..May 8 as its first window") {
    auto dataset = load_tables7_dataset();
    RuleConfig cfg;
    auto models = windowed_retrain(dataset, 10, 10, cfg);
    REQUIRE(models.size() == 1);
    CHECK(models[0].metadata.window_start == Date::parse("2020-04-29"));
    CHECK(models[0].metadata.window_end == Date::parse("2020-05-08"));
    auto direct = fit_heuristic(dataset, kFitWindow, cfg);
    CHECK(models[0].transition == direct.model.transition);
    CHECK(models[0].emission == direct.model.emission);
    CHECK(models[0].initial == direct.model.initial);
}

TEST_CASE("windowed_retrain with stride larger than the span gives a single model") {
    auto dataset = load_tables7_dataset();
    RuleConfig cfg;
    auto models = windowed_retrain(dataset, 5, 60, cfg);
    CHECK(models.size() == 1);
    CHECK(models[0].metadata.window_end == Date::parse("2020-05-03"));
}

TEST_CASE("windowed_retrain covers trailing partial windows of at least two days") {
    auto dataset = load_tables7_dataset(); // Apr 29 .. May 8
    RuleConfig cfg;
    auto models = windowed_retrain(dataset, 4, 4, cfg);
    REQUIRE(models.size() == 3);
    CHECK(models[1].metadata.window_start == Date::parse("2020-05-03"));
    CHECK(models[2].metadata.window_start == Date::parse("2020-05-07"));
    CHECK(models[2].metadata.window_end == Date::parse("2020-05-08"));
}

TEST_CASE("disjoint windows over stationary synthetic data roughly agree") {
    auto truth = sample_synthetic(7, 6, 1600, 20);
    RuleConfig cfg;
    auto models = windowed_retrain(truth.dataset, 800, 800, cfg);
    REQUIRE(models.size() == 2);
    double worst = 0.0;
    for (std::size_t row = 0; row < 4; ++row) {
        if (models[0].transition.row_unvisited(row) ||
            models[1].transition.row_unvisited(row))
            continue;
        worst = std::max(worst,
                         l1_row_distance(models[0].transition, models[1].transition, row));
    }
    MESSAGE("max L1 row distance between disjoint-window models: ", worst);
    CHECK(worst < 0.30);
}
