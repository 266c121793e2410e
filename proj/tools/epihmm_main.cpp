#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "epihmm/errors.hpp"
#include "epihmm/inference.hpp"
#include "epihmm/ingest.hpp"
#include "epihmm/learner.hpp"
#include "epihmm/model.hpp"
#include "epihmm/quantizer.hpp"
#include "epihmm/reporting.hpp"

namespace fs = std::filesystem;
using namespace epihmm;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct CommonOptions {
    std::string mode = "delta";
    std::string rule_id = "paper-v1";
    std::string out_dir = ".";
    unsigned seed = 0;
};

// Data files are written atomically and carry no timestamps; the manifest
// carries the clock.
void atomic_write(const fs::path& path, const std::string& content) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) raise(Errc::IoError, "cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

std::string now_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::vector<std::string>& inputs, const nlohmann::json& params,
                    const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["tool"] = "epihmm";
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["inputs"] = inputs;
    j["parameters"] = params;
    j["outputs"] = outputs;
    j["created_utc"] = now_utc();
    atomic_write(out_dir / "run_manifest.json", j.dump(2) + "\n");
}

Dataset load_dataset(const std::string& path, const std::string& mode,
                     bool print_warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open " + path);
    CsvMode m = mode == "cumulative" ? CsvMode::Cumulative : CsvMode::Delta;
    ParsedSnapshot snapshot = parse_snapshot_csv(in, m);
    Dataset dataset = m == CsvMode::Cumulative ? build_delta_series(snapshot.records)
                                               : group_delta_series(snapshot.deltas);
    if (print_warnings) {
        for (const auto& [region, series] : dataset)
            for (const auto& w : validate_series(series))
                std::cerr << "warning: " << w.region << " " << w.date.to_string() << ": "
                          << w.message << "\n";
    }
    return dataset;
}

DateRange dataset_range(const Dataset& dataset) {
    bool have = false;
    DateRange r{};
    for (const auto& [region, series] : dataset)
        for (const auto& d : series.deltas) {
            if (!have || d.date < r.start) r.start = d.date;
            if (!have || r.end < d.date) r.end = d.date;
            have = true;
        }
    if (!have) raise(Errc::EmptyWindow, "dataset has no rows");
    return r;
}

std::string deltas_to_csv(const Dataset& dataset) {
    std::string out = "date,region,active_delta,recovered_delta,dead_delta\n";
    for (const auto& [region, series] : dataset)
        for (const auto& d : series.deltas)
            out += d.date.to_string() + "," + region + "," + std::to_string(d.a) + "," +
                   std::to_string(d.r) + "," + std::to_string(d.d) + "\n";
    return out;
}

std::string decoded_to_csv(const std::vector<DecodedPath>& paths) {
    std::string out = "date,region,state,log_prob_cumulative\n";
    char num[32];
    for (const auto& p : paths)
        for (std::size_t t = 0; t < p.path.size(); ++t) {
            std::snprintf(num, sizeof num, "%.12g", p.cumulative_log_prob[t]);
            out += p.path[t].first.to_string() + "," + p.region + "," +
                   std::string(state_code(p.path[t].second)) + "," + num + "\n";
        }
    return out;
}

// Baum-Welch init: heuristic fit blended toward uniform plus seeded jitter, so
// every entry is strictly positive.
HmmModel baum_welch_init(const Dataset& dataset, DateRange window, const RuleConfig& cfg,
                         unsigned seed) {
    HmmModel heuristic = fit_heuristic(dataset, window, cfg).model;
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> jitter(0.0, 0.02);
    auto blend = [&](const StochasticMatrix& m, std::vector<std::string> cols) {
        std::vector<std::vector<double>> rows(kNumStates, std::vector<double>(kNumStates));
        for (std::size_t i = 0; i < kNumStates; ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < kNumStates; ++j) {
                rows[i][j] = 0.9 * m.at(i, j) + 0.1 * 0.25 + jitter(rng);
                total += rows[i][j];
            }
            for (auto& v : rows[i]) v /= total;
        }
        return make_stochastic_matrix(rows, state_code_labels(), std::move(cols), 1e-9);
    };
    HmmModel init = heuristic;
    init.transition = blend(heuristic.transition, state_code_labels());
    init.emission = blend(heuristic.emission, symbol_code_labels());
    double total = 0.0;
    for (std::size_t s = 0; s < kNumStates; ++s) {
        init.initial[s] = 0.9 * heuristic.initial[s] + 0.1 * 0.25;
        total += init.initial[s];
    }
    for (auto& v : init.initial) v /= total;
    return init;
}

int cmd_ingest(const CommonOptions& common, const std::string& input) {
    Dataset dataset = load_dataset(input, common.mode, true);
    fs::path out_dir(common.out_dir);
    atomic_write(out_dir / "deltas.csv", deltas_to_csv(dataset));
    write_manifest(out_dir, "ingest", {input},
                   {{"mode", common.mode}}, {"deltas.csv"});
    return 0;
}

int cmd_label(const CommonOptions& common, const std::string& input) {
    Dataset dataset = load_dataset(input, common.mode, false);
    RuleConfig cfg;
    cfg.rule_id = common.rule_id;
    check_rule(cfg);
    std::vector<LabeledState> all;
    for (const auto& [region, series] : dataset) {
        auto labels = label_series(series, cfg);
        all.insert(all.end(), labels.begin(), labels.end());
    }
    sort_canonical(all);
    fs::path out_dir(common.out_dir);
    atomic_write(out_dir / "labels.csv", labels_to_csv(all));
    write_manifest(out_dir, "label", {input},
                   {{"mode", common.mode}, {"rule", common.rule_id}}, {"labels.csv"});
    return 0;
}

int cmd_train(const CommonOptions& common, const std::string& input, std::string from,
              std::string to, int window, int stride, double smoothing, bool do_refine,
              bool baum_welch, int max_iters, double tol) {
    Dataset dataset = load_dataset(input, common.mode, false);
    DateRange data_range = dataset_range(dataset);
    DateRange range{from.empty() ? data_range.start : Date::parse(from),
                    to.empty() ? data_range.end : Date::parse(to)};
    RuleConfig cfg;
    cfg.rule_id = common.rule_id;
    check_rule(cfg);
    fs::path out_dir(common.out_dir);
    std::vector<std::string> outputs;

    if (window > 0) {
        // Restrict to the requested range, then retrain every `stride` days.
        Dataset clipped;
        for (const auto& [region, series] : dataset) {
            RegionSeries s;
            s.region = region;
            for (const auto& d : series.deltas)
                if (range.contains(d.date)) s.deltas.push_back(d);
            if (!s.deltas.empty()) clipped[region] = std::move(s);
        }
        auto models = windowed_retrain(clipped, window, stride > 0 ? stride : window, cfg,
                                       smoothing);
        for (auto& model : models) {
            if (do_refine)
                model = refine(model, clipped,
                               {model.metadata.window_start, model.metadata.window_end},
                               {max_iters, tol, ZeroRowPolicy::Uniform});
            std::string name = "model_" + model.metadata.window_start.to_string() + "_" +
                               model.metadata.window_end.to_string() + ".json";
            atomic_write(out_dir / name, model_to_json_string(model));
            outputs.push_back(name);
        }
    } else if (baum_welch) {
        HmmModel init = baum_welch_init(dataset, range, cfg, common.seed);
        BaumWelchResult result = fit_baum_welch(dataset, range, init, max_iters, tol);
        atomic_write(out_dir / "model.json", model_to_json_string(result.model));
        std::string trace = "iteration,log_likelihood\n";
        char num[32];
        for (std::size_t i = 0; i < result.log_likelihood_trace.size(); ++i) {
            std::snprintf(num, sizeof num, "%.12g", result.log_likelihood_trace[i]);
            trace += std::to_string(i) + "," + num + "\n";
        }
        atomic_write(out_dir / "log_likelihood.csv", trace);
        outputs = {"model.json", "log_likelihood.csv"};
    } else {
        FitResult fit = fit_heuristic(dataset, range, cfg, smoothing);
        HmmModel model = fit.model;
        if (do_refine)
            model = refine(model, dataset, range, {max_iters, tol, ZeroRowPolicy::Uniform});
        atomic_write(out_dir / "model.json", model_to_json_string(model));
        atomic_write(out_dir / "distribution.csv", distribution_timeseries(fit.pi_series));
        outputs = {"model.json", "distribution.csv"};
    }

    write_manifest(out_dir, "train", {input},
                   {{"mode", common.mode},
                    {"rule", common.rule_id},
                    {"from", range.start.to_string()},
                    {"to", range.end.to_string()},
                    {"window", window},
                    {"stride", stride},
                    {"smoothing", smoothing},
                    {"refine", do_refine},
                    {"baum_welch", baum_welch},
                    {"max_iters", max_iters},
                    {"tol", tol},
                    {"seed", common.seed}},
                   outputs);
    return 0;
}

int cmd_decode(const CommonOptions& common, const std::string& model_path,
               const std::string& input) {
    HmmModel model = load_model(model_path);
    auto violations = validate_model(model, 2e-3);
    if (!violations.empty())
        raise(Errc::InvalidModel, violations.front().where + ": " +
                                      violations.front().detail);
    Dataset dataset = load_dataset(input, common.mode, false);
    BagsByRegion bags = bag_dataset(dataset);
    std::vector<DecodedPath> paths;
    for (const auto& [region, bag_list] : bags) {
        if (bag_list.empty()) continue;
        DecodedPath p = viterbi_decode(model, bag_list);
        for (const auto& w : p.warnings)
            std::cerr << "warning: " << region << ": " << w << "\n";
        paths.push_back(std::move(p));
    }
    fs::path out_dir(common.out_dir);
    atomic_write(out_dir / "decoded.csv", decoded_to_csv(paths));
    write_manifest(out_dir, "decode", {model_path, input},
                   {{"mode", common.mode},
                    {"pi_source", "trained model pi applied at the window boundary"}},
                   {"decoded.csv"});
    return 0;
}

int cmd_report(const CommonOptions& common, const std::string& labels_path,
               std::string as_of) {
    std::ifstream in(labels_path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open " + labels_path);
    std::vector<LabeledState> labels = labels_from_csv(in);
    if (labels.empty()) raise(Errc::EmptyWindow, "label file has no rows");

    LabelsByRegion by_region;
    Date max_date = labels.front().date;
    for (const auto& l : labels) {
        by_region[l.region].push_back(l);
        if (max_date < l.date) max_date = l.date;
    }
    Date status_date = as_of.empty() ? max_date : Date::parse(as_of);

    std::vector<LabeledState> final_labels;
    for (const auto& [region, seq] : by_region)
        for (const auto& l : seq)
            if (l.date == status_date) final_labels.push_back(l);
    if (final_labels.empty())
        raise(Errc::MissingRegionDate, "no labels on " + status_date.to_string());

    Date min_date = labels.front().date;
    for (const auto& l : labels)
        if (l.date < min_date) min_date = l.date;
    DateRange window{min_date, max_date};

    fs::path out_dir(common.out_dir);
    StatusTable table = status_table(final_labels);
    atomic_write(out_dir / "status.csv", status_table_csv(table));
    atomic_write(out_dir / "status.txt", status_table_text(table));
    atomic_write(out_dir / "distribution.csv",
                 distribution_timeseries(daily_state_distribution(by_region, window)));

    std::vector<std::string> outputs = {"status.csv", "status.txt", "distribution.csv"};
    for (const auto& [region, seq] : by_region) {
        if (seq.size() < 2) continue;
        RegionTransitionProfile profile = region_transition_profile(seq, window);
        std::string name = "dot/";
        for (char c : region) name += (c == ' ' ? '_' : c);
        name += ".dot";
        atomic_write(out_dir / name, render_dot(profile));
        outputs.push_back(name);
    }
    write_manifest(out_dir, "report", {labels_path},
                   {{"as_of", status_date.to_string()}}, outputs);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HMM-based pandemic surveillance pipeline"};
    app.require_subcommand(1);

    CommonOptions common;
    std::string input, model_path, labels_path, from, to, as_of;
    int window = 0, stride = 0, max_iters = 20;
    double smoothing = 0.0, tol = 1e-9;
    bool do_refine = false, baum_welch = false;

    auto add_common = [&](CLI::App* cmd, bool with_mode = true) {
        cmd->add_option("--out", common.out_dir, "Output directory")->capture_default_str();
        if (with_mode)
            cmd->add_option("--mode", common.mode, "Input CSV mode: cumulative|delta")
                ->check(CLI::IsMember({"cumulative", "delta"}))
                ->capture_default_str();
    };

    auto* ingest = app.add_subcommand("ingest", "Parse and validate a case-report CSV");
    ingest->add_option("input", input, "Input CSV")->required();
    add_common(ingest);

    auto* label = app.add_subcommand("label", "Infer hidden states per region-day");
    label->add_option("input", input, "Input CSV")->required();
    label->add_option("--rule", common.rule_id, "Quantizer rule id")->capture_default_str();
    add_common(label);

    auto* train = app.add_subcommand("train", "Learn HMM parameters from deltas");
    train->add_option("input", input, "Input CSV")->required();
    train->add_option("--from", from, "Window start (inclusive)");
    train->add_option("--to", to, "Window end (inclusive)");
    train->add_option("--window", window, "Retrain window length in days");
    train->add_option("--stride", stride, "Retrain stride in days (default: window)");
    train->add_option("--smoothing", smoothing, "Additive smoothing for transition counts")
        ->capture_default_str();
    train->add_flag("--refine", do_refine, "Viterbi-relabel refinement after fitting");
    train->add_flag("--baum-welch", baum_welch, "Fit with Baum-Welch EM instead");
    train->add_option("--max-iters", max_iters, "Iteration cap for refine/Baum-Welch")
        ->capture_default_str();
    train->add_option("--tol", tol, "Convergence tolerance")->capture_default_str();
    train->add_option("--rule", common.rule_id, "Quantizer rule id")->capture_default_str();
    train->add_option("--seed", common.seed, "Seed for Baum-Welch init jitter")
        ->capture_default_str();
    add_common(train);

    auto* decode = app.add_subcommand("decode", "Viterbi-decode observation sequences");
    decode->add_option("--model", model_path, "Trained model JSON")->required();
    decode->add_option("input", input, "Input CSV")->required();
    add_common(decode);

    auto* report = app.add_subcommand("report", "Status table, distribution and diagrams");
    report->add_option("--labels", labels_path, "Label CSV from 'label' or 'decode'")
        ->required();
    report->add_option("--as-of", as_of, "Status date (default: latest labeled date)");
    add_common(report, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(ingest)) return cmd_ingest(common, input);
        if (app.got_subcommand(label)) return cmd_label(common, input);
        if (app.got_subcommand(train))
            return cmd_train(common, input, from, to, window, stride, smoothing, do_refine,
                             baum_welch, max_iters, tol);
        if (app.got_subcommand(decode)) return cmd_decode(common, model_path, input);
        if (app.got_subcommand(report)) return cmd_report(common, labels_path, as_of);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
