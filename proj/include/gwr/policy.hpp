#pragma once
// Selection policies: pure scoring functions plus a deterministic
// argmax with the canonical-order tie-break.

#include <span>
#include <string>
#include <variant>

#include "gwr/workspace.hpp"

namespace gwr {

struct MaxSaliencePolicy {};

// Excludes proposals whose salience falls below theta.
struct ThresholdPolicy {
    double theta = 0.5;
};

// score = salience * lambda^r where r counts the proposal's key in the
// history window. Guards against one module monopolizing consciousness.
struct RecencyDecayPolicy {
    double lambda = 0.5;
};

using PolicySpec = std::variant<MaxSaliencePolicy, ThresholdPolicy, RecencyDecayPolicy>;

PolicySpec default_policy();  // recency:0.5

// "max", "threshold:<theta>", "recency:<lambda>".
// Throws std::invalid_argument on unknown strings or out-of-range params.
PolicySpec parse_policy(const std::string& text);
std::string policy_string(const PolicySpec& policy);

// -infinity marks an excluded proposal.
double score(const PolicySpec& policy, const Proposal& proposal, const WorkspaceState& state);

struct SelectionOutcome {
    std::optional<Proposal> winner;
    std::vector<std::pair<ContentKey, double>> scoreboard;  // canonical order, all inputs
};

// Proposals must already be in canonical order; ties go to the earlier
// position.
SelectionOutcome select(const PolicySpec& policy, std::span<const Proposal> proposals,
                        const WorkspaceState& state);

}  // namespace gwr
