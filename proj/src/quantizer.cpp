#include "epihmm/quantizer.hpp"

#include <algorithm>
#include <istream>
#include <sstream>

#include "epihmm/errors.hpp"

namespace epihmm {

void check_rule(const RuleConfig& cfg) {
    if (cfg.rule_id != "paper-v1")
        raise(Errc::UnknownRule, "unknown rule '" + cfg.rule_id + "'");
}

LabeledState quantize_day(const RegionDayDelta& delta,
                          const std::optional<LabeledState>& prev,
                          const RuleConfig& cfg) {
    check_rule(cfg);
    LabeledState out;
    out.date = delta.date;
    out.region = delta.region;

    const long long a = delta.a;
    const long long r = std::max<long long>(delta.r, 0);
    const long long d = std::max<long long>(delta.d, 0);

    if (delta.a == 0 && delta.r == 0 && delta.d == 0) {
        out.base = prev ? prev->base : cfg.carry_forward_initial;
        out.carried_forward = true;
        return out;
    }
    if (d > 0 && d >= r && d >= a) {
        if (a <= 0) {
            out.base = HiddenState::Healthy;
            out.catastrophe = CatastropheTag::C1;
        } else {
            out.base = HiddenState::Symptomatic;
            out.catastrophe = CatastropheTag::C2;
        }
        return out;
    }
    if (a < 0) {
        out.base = HiddenState::Healthy;
        return out;
    }
    if (r > a) {
        out.base = HiddenState::Detected;
        return out;
    }
    if (a > 0 && r == 0 && d > 0) {
        out.base = HiddenState::Infected;
        return out;
    }
    out.base = HiddenState::Symptomatic;
    return out;
}

std::vector<LabeledState> label_series(const RegionSeries& series, const RuleConfig& cfg) {
    check_rule(cfg);
    std::vector<LabeledState> out;
    out.reserve(series.deltas.size());
    std::optional<LabeledState> prev;
    for (const auto& delta : series.deltas) {
        prev = quantize_day(delta, prev, cfg);
        out.push_back(*prev);
    }
    return out;
}

void sort_canonical(std::vector<LabeledState>& labels) {
    std::sort(labels.begin(), labels.end(), [](const auto& a, const auto& b) {
        return std::tie(a.region, a.date) < std::tie(b.region, b.date);
    });
}

std::string labels_to_csv(std::span<const LabeledState> labels) {
    std::string out = "date,region,base_state,catastrophe,carried_forward\n";
    for (const auto& l : labels) {
        out += l.date.to_string();
        out += ',';
        out += l.region;
        out += ',';
        out += state_code(l.base);
        out += ',';
        out += catastrophe_code(l.catastrophe);
        out += ',';
        out += l.carried_forward ? "true" : "false";
        out += '\n';
    }
    return out;
}

std::vector<LabeledState> labels_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        raise(Errc::MalformedRow, "line 1: missing header row");
    if (line.find("date,region,base_state,catastrophe,carried_forward") != 0)
        raise(Errc::UnknownColumn, "unexpected label header '" + line + "'");
    std::vector<LabeledState> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (line.back() == ',') f.push_back("");
        if (f.size() != 5)
            raise(Errc::MalformedRow, "line " + std::to_string(line_no) + ": expected 5 fields");
        LabeledState l;
        l.date = Date::parse(f[0]);
        l.region = f[1];
        auto base = state_from_code(f[2]);
        if (!base)
            raise(Errc::MalformedRow,
                  "line " + std::to_string(line_no) + ": bad state '" + f[2] + "'");
        l.base = *base;
        auto cat = catastrophe_from_code(f[3]);
        if (!cat)
            raise(Errc::MalformedRow,
                  "line " + std::to_string(line_no) + ": bad catastrophe '" + f[3] + "'");
        l.catastrophe = *cat;
        l.carried_forward = f[4] == "true";
        out.push_back(std::move(l));
    }
    return out;
}

} // namespace epihmm
