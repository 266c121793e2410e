#include "epihmm/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "epihmm/errors.hpp"

namespace epihmm {

namespace {

constexpr std::array<std::string_view, 4> kStateCodes = {"H", "I", "S", "D"};
constexpr std::array<std::string_view, 4> kStateNames = {"Healthy", "Infected",
                                                         "Symptomatic", "Detected"};
constexpr std::array<std::string_view, 4> kSymbolCodes = {"A-", "A", "R", "D"};
constexpr std::array<std::string_view, 3> kCatastropheCodes = {"", "C1", "C2"};

} // namespace

std::string_view state_code(HiddenState s) { return kStateCodes[static_cast<int>(s)]; }
std::string_view state_name(HiddenState s) { return kStateNames[static_cast<int>(s)]; }
std::string_view symbol_code(ObservationSymbol s) { return kSymbolCodes[static_cast<int>(s)]; }
std::string_view catastrophe_code(CatastropheTag t) { return kCatastropheCodes[static_cast<int>(t)]; }

std::optional<HiddenState> state_from_code(std::string_view code) {
    for (std::size_t i = 0; i < kStateCodes.size(); ++i)
        if (code == kStateCodes[i]) return static_cast<HiddenState>(i);
    return std::nullopt;
}

std::optional<CatastropheTag> catastrophe_from_code(std::string_view code) {
    for (std::size_t i = 0; i < kCatastropheCodes.size(); ++i)
        if (code == kCatastropheCodes[i]) return static_cast<CatastropheTag>(i);
    if (code == "none") return CatastropheTag::None;
    return std::nullopt;
}

const std::vector<std::string>& state_code_labels() {
    static const std::vector<std::string> labels = {"H", "I", "S", "D"};
    return labels;
}

const std::vector<std::string>& symbol_code_labels() {
    static const std::vector<std::string> labels = {"A-", "A", "R", "D"};
    return labels;
}

StochasticMatrix make_stochastic_matrix(const std::vector<std::vector<double>>& rows,
                                        std::vector<std::string> row_labels,
                                        std::vector<std::string> col_labels,
                                        double row_sum_tol) {
    if (rows.size() != row_labels.size())
        raise(Errc::RowSumViolation, "row label count does not match row count");
    StochasticMatrix m;
    m.row_labels_ = std::move(row_labels);
    m.col_labels_ = std::move(col_labels);
    m.values_.reserve(rows.size() * m.col_labels_.size());
    m.unvisited_.resize(rows.size(), false);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.col_labels_.size())
            raise(Errc::RowSumViolation,
                  "row '" + m.row_labels_[r] + "' is not rectangular");
        double sum = 0.0;
        bool all_zero = true;
        for (double v : rows[r]) {
            if (v < 0.0)
                raise(Errc::NegativeEntry,
                      "negative entry in row '" + m.row_labels_[r] + "'");
            sum += v;
            if (v != 0.0) all_zero = false;
        }
        if (all_zero) {
            m.unvisited_[r] = true;
        } else if (std::abs(sum - 1.0) > row_sum_tol) {
            raise(Errc::RowSumViolation,
                  "row '" + m.row_labels_[r] + "' sums to " + std::to_string(sum));
        }
        m.values_.insert(m.values_.end(), rows[r].begin(), rows[r].end());
    }
    return m;
}

StochasticMatrix normalize_counts(const CountMatrix& counts,
                                  std::vector<std::string> row_labels,
                                  std::vector<std::string> col_labels,
                                  ZeroRowPolicy policy,
                                  double smoothing) {
    std::vector<std::vector<double>> rows;
    rows.reserve(counts.size());
    const std::size_t ncols = col_labels.size();
    for (const auto& crow : counts) {
        if (crow.size() != ncols)
            raise(Errc::RowSumViolation, "count matrix is not rectangular");
        double total = 0.0;
        for (long long c : crow) {
            if (c < 0) raise(Errc::NegativeEntry, "negative count");
            total += static_cast<double>(c) + smoothing;
        }
        std::vector<double> prow(ncols, 0.0);
        if (total > 0.0) {
            for (std::size_t j = 0; j < ncols; ++j)
                prow[j] = (static_cast<double>(crow[j]) + smoothing) / total;
        } else if (policy == ZeroRowPolicy::Uniform) {
            for (std::size_t j = 0; j < ncols; ++j)
                prow[j] = 1.0 / static_cast<double>(ncols);
        }
        rows.push_back(std::move(prow));
    }
    return make_stochastic_matrix(rows, std::move(row_labels), std::move(col_labels), 1e-9);
}

namespace {

void check_matrix(const StochasticMatrix& m, const std::string& name,
                  const std::vector<std::string>& want_cols, double tol,
                  std::vector<Violation>& out) {
    if (m.row_labels() != state_code_labels())
        out.push_back({name, "row labels are not H,I,S,D"});
    if (m.col_labels() != want_cols)
        out.push_back({name, "column labels are out of order"});
    for (std::size_t r = 0; r < m.row_count(); ++r) {
        double sum = 0.0;
        bool all_zero = true;
        for (std::size_t c = 0; c < m.col_count(); ++c) {
            double v = m.at(r, c);
            if (v < 0.0)
                out.push_back({name + "[" + m.row_labels()[r] + "]", "negative entry"});
            sum += v;
            if (v != 0.0) all_zero = false;
        }
        if (all_zero) continue; // unvisited rows are allowed
        if (std::abs(sum - 1.0) > tol)
            out.push_back({name + "[" + m.row_labels()[r] + "]",
                           "row sum " + std::to_string(sum) + " differs from 1"});
    }
}

} // namespace

std::vector<Violation> validate_model(const HmmModel& m, double tol) {
    std::vector<Violation> out;
    if (m.transition.row_count() != kNumStates || m.transition.col_count() != kNumStates)
        out.push_back({"A", "expected 4x4"});
    else
        check_matrix(m.transition, "A", state_code_labels(), tol, out);
    if (m.emission.row_count() != kNumStates || m.emission.col_count() != kNumSymbols)
        out.push_back({"B", "expected 4x4"});
    else
        check_matrix(m.emission, "B", symbol_code_labels(), tol, out);
    double pisum = 0.0;
    for (double v : m.initial) {
        if (v < 0.0) out.push_back({"pi", "negative entry"});
        pisum += v;
    }
    if (std::abs(pisum - 1.0) > tol)
        out.push_back({"pi", "sums to " + std::to_string(pisum)});
    return out;
}

namespace {

nlohmann::json matrix_rows(const StochasticMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.row_count(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.col_count(); ++c) row.push_back(m.at(r, c));
        rows.push_back(row);
    }
    return rows;
}

StochasticMatrix matrix_from_rows(const nlohmann::json& j,
                                  std::vector<std::string> row_labels,
                                  std::vector<std::string> col_labels) {
    std::vector<std::vector<double>> rows;
    for (const auto& jr : j) rows.push_back(jr.get<std::vector<double>>());
    // 2e-3 admits models transcribed from three-decimal printed tables; callers
    // needing strict rows run validate_model at their own tolerance.
    return make_stochastic_matrix(rows, std::move(row_labels), std::move(col_labels), 2e-3);
}

} // namespace

std::string model_to_json_string(const HmmModel& m) {
    nlohmann::json j;
    j["states"] = state_code_labels();
    j["symbols"] = symbol_code_labels();
    j["A"] = matrix_rows(m.transition);
    j["B"] = matrix_rows(m.emission);
    j["pi"] = m.initial;
    j["metadata"]["window_start"] = m.metadata.window_start.to_string();
    j["metadata"]["window_end"] = m.metadata.window_end.to_string();
    j["metadata"]["rule_id"] = m.metadata.rule_id;
    if (m.metadata.refine_iterations)
        j["metadata"]["refine_iterations"] = *m.metadata.refine_iterations;
    return j.dump(2) + "\n";
}

HmmModel model_from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        raise(Errc::InvalidModel, std::string("model JSON parse error: ") + e.what());
    }
    try {
        if (j.at("states").get<std::vector<std::string>>() != state_code_labels())
            raise(Errc::InvalidModel, "model file has unexpected state ordering");
        if (j.at("symbols").get<std::vector<std::string>>() != symbol_code_labels())
            raise(Errc::InvalidModel, "model file has unexpected symbol ordering");
        HmmModel m;
        m.transition = matrix_from_rows(j.at("A"), state_code_labels(), state_code_labels());
        m.emission = matrix_from_rows(j.at("B"), state_code_labels(), symbol_code_labels());
        auto pi = j.at("pi").get<std::vector<double>>();
        if (pi.size() != kNumStates) raise(Errc::InvalidModel, "pi must have 4 entries");
        std::copy(pi.begin(), pi.end(), m.initial.begin());
        const auto& md = j.at("metadata");
        m.metadata.window_start = Date::parse(md.at("window_start").get<std::string>());
        m.metadata.window_end = Date::parse(md.at("window_end").get<std::string>());
        m.metadata.rule_id = md.at("rule_id").get<std::string>();
        if (md.contains("refine_iterations"))
            m.metadata.refine_iterations = md.at("refine_iterations").get<int>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        raise(Errc::InvalidModel, std::string("model JSON is missing fields: ") + e.what());
    }
}

void save_model(const HmmModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot open " + path.string() + " for writing");
    out << model_to_json_string(m);
}

HmmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json_string(buf.str());
}

} // namespace epihmm
