#include "gwr/policy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gwr {

namespace {

constexpr double kExcluded = -std::numeric_limits<double>::infinity();

double parse_param(const std::string& text, std::size_t colon, const char* what) {
    if (colon == std::string::npos || colon + 1 >= text.size()) {
        throw std::invalid_argument(std::string("policy '") + text + "' needs a " + what);
    }
    std::size_t used = 0;
    double v = std::stod(text.substr(colon + 1), &used);
    if (colon + 1 + used != text.size()) {
        throw std::invalid_argument("trailing characters in policy parameter: " + text);
    }
    if (std::isnan(v) || v < 0.0 || v > 1.0) {
        throw std::invalid_argument(std::string(what) + " must be in [0, 1]: " + text);
    }
    return v;
}

std::string trimmed(double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

}  // namespace

PolicySpec default_policy() { return RecencyDecayPolicy{0.5}; }

PolicySpec parse_policy(const std::string& text) {
    if (text == "max") return MaxSaliencePolicy{};
    std::size_t colon = text.find(':');
    std::string head = text.substr(0, colon);
    if (head == "threshold") return ThresholdPolicy{parse_param(text, colon, "theta")};
    if (head == "recency") return RecencyDecayPolicy{parse_param(text, colon, "lambda")};
    throw std::invalid_argument("unknown policy '" + text +
                                "' (expected max, threshold:<theta> or recency:<lambda>)");
}

std::string policy_string(const PolicySpec& policy) {
    if (std::holds_alternative<MaxSaliencePolicy>(policy)) return "max";
    if (const auto* t = std::get_if<ThresholdPolicy>(&policy)) {
        return "threshold:" + trimmed(t->theta);
    }
    const auto& r = std::get<RecencyDecayPolicy>(policy);
    return "recency:" + trimmed(r.lambda);
}

double score(const PolicySpec& policy, const Proposal& proposal, const WorkspaceState& state) {
    const double s = proposal.salience.value();
    if (std::holds_alternative<MaxSaliencePolicy>(policy)) return s;
    if (const auto* t = std::get_if<ThresholdPolicy>(&policy)) {
        return s >= t->theta ? s : kExcluded;
    }
    const auto& r = std::get<RecencyDecayPolicy>(policy);
    const auto repeats = state.history_count(proposal.content.key);
    return s * std::pow(r.lambda, static_cast<double>(repeats));
}

SelectionOutcome select(const PolicySpec& policy, std::span<const Proposal> proposals,
                        const WorkspaceState& state) {
    SelectionOutcome outcome;
    outcome.scoreboard.reserve(proposals.size());
    std::size_t best = proposals.size();
    double best_score = kExcluded;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        double sc = score(policy, proposals[i], state);
        outcome.scoreboard.emplace_back(proposals[i].content.key, sc);
        if (sc != kExcluded && sc > best_score) {
            best_score = sc;
            best = i;
        }
    }
    if (best < proposals.size()) outcome.winner = proposals[best];
    return outcome;
}

}  // namespace gwr
