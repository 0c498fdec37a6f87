#pragma once
// Metrics are recomputed from trace files alone, so any third party can
// verify the numbers from the JSONL artifact.

#include "gwr/trace.hpp"

namespace gwr {

struct MetricsReport {
    std::uint64_t cycles = 0;
    std::optional<std::uint64_t> steps_to_goal;  // empty: goal never reached
    std::uint64_t collisions = 0;
    std::optional<std::uint64_t> adaptation_latency;  // empty: no adapted instruction
    std::uint64_t cycles_saved = 0;
};

// Throws TraceError naming the first offending line.
MetricsReport compute_metrics(const ParsedTrace& trace);

json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const json& j);

std::string metrics_table(const MetricsReport& report);
std::string compare_table(const MetricsReport& gwt, const MetricsReport& pipeline);

}  // namespace gwr
