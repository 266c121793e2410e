#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epihmm/dates.hpp"

namespace epihmm {

// Hidden-state alphabet; the H, I, S, D ordering is fixed and used for all
// matrix indexing and serialization.
enum class HiddenState : int { Healthy = 0, Infected = 1, Symptomatic = 2, Detected = 3 };

// Observation alphabet in fixed A-, A, R, D column order.
enum class ObservationSymbol : int { ActiveMinus = 0, Active = 1, Recovered = 2, Dead = 3 };

// Catastrophe annotation on top of the base state (never a matrix row of its own).
enum class CatastropheTag : int { None = 0, C1 = 1, C2 = 2 };

inline constexpr std::size_t kNumStates = 4;
inline constexpr std::size_t kNumSymbols = 4;

inline constexpr std::array<HiddenState, kNumStates> kAllStates = {
    HiddenState::Healthy, HiddenState::Infected, HiddenState::Symptomatic,
    HiddenState::Detected};

std::string_view state_code(HiddenState s);       // "H" "I" "S" "D"
std::string_view state_name(HiddenState s);       // "Healthy" ...
std::string_view symbol_code(ObservationSymbol s); // "A-" "A" "R" "D"
std::string_view catastrophe_code(CatastropheTag t); // "" "C1" "C2"

std::optional<HiddenState> state_from_code(std::string_view code);
std::optional<CatastropheTag> catastrophe_from_code(std::string_view code);

const std::vector<std::string>& state_code_labels();
const std::vector<std::string>& symbol_code_labels();

// Row-stochastic probability table. Every row sums to 1 within tolerance or is
// an all-zero row flagged "unvisited" (a state never seen as a source).
class StochasticMatrix {
public:
    StochasticMatrix() = default;

    std::size_t row_count() const { return row_labels_.size(); }
    std::size_t col_count() const { return col_labels_.size(); }

    double at(std::size_t r, std::size_t c) const { return values_[r * col_count() + c]; }
    std::span<const double> row(std::size_t r) const {
        return {values_.data() + r * col_count(), col_count()};
    }

    bool row_unvisited(std::size_t r) const { return unvisited_[r]; }

    const std::vector<std::string>& row_labels() const { return row_labels_; }
    const std::vector<std::string>& col_labels() const { return col_labels_; }

    bool operator==(const StochasticMatrix&) const = default;

private:
    friend StochasticMatrix make_stochastic_matrix(const std::vector<std::vector<double>>&,
                                                   std::vector<std::string>,
                                                   std::vector<std::string>, double);
    std::vector<double> values_;
    std::vector<std::string> row_labels_;
    std::vector<std::string> col_labels_;
    std::vector<bool> unvisited_;
};

// Validates shape, non-negativity and row sums (all-zero rows are accepted and
// flagged unvisited). row_sum_tol exists because paper-printed matrices only
// carry three decimals.
StochasticMatrix make_stochastic_matrix(const std::vector<std::vector<double>>& rows,
                                        std::vector<std::string> row_labels,
                                        std::vector<std::string> col_labels,
                                        double row_sum_tol = 1e-6);

enum class ZeroRowPolicy { ZeroRow, Uniform };

using CountMatrix = std::vector<std::vector<long long>>;

// Divides each count row by its total; zero-total rows become all-zero
// unvisited rows (ZeroRow) or uniform rows (Uniform). With smoothing > 0 every
// cell gets the pseudo-count added first.
StochasticMatrix normalize_counts(const CountMatrix& counts,
                                  std::vector<std::string> row_labels,
                                  std::vector<std::string> col_labels,
                                  ZeroRowPolicy policy,
                                  double smoothing = 0.0);

struct ModelMetadata {
    Date window_start;
    Date window_end;
    std::string rule_id;
    std::optional<int> refine_iterations;

    bool operator==(const ModelMetadata&) const = default;
};

// The HMM triple: state-transition matrix, emission matrix and the initial
// state distribution, plus training provenance.
struct HmmModel {
    StochasticMatrix transition;              // 4x4, state -> state
    StochasticMatrix emission;                // 4x4, state -> symbol
    std::array<double, kNumStates> initial{}; // pi
    ModelMetadata metadata;

    bool operator==(const HmmModel&) const = default;
};

struct Violation {
    std::string where;  // e.g. "A[Infected]", "pi"
    std::string detail;
};

// Empty result iff all HmmModel invariants hold at the given tolerance.
std::vector<Violation> validate_model(const HmmModel& m, double tol = 1e-9);

// JSON model file: {states, symbols, A, B, pi, metadata{...}}. Numbers keep
// full double precision, so save/load round-trips are value-identical.
std::string model_to_json_string(const HmmModel& m);
HmmModel model_from_json_string(const std::string& text);
void save_model(const HmmModel& m, const std::filesystem::path& path);
HmmModel load_model(const std::filesystem::path& path);

} // namespace epihmm
