#include "gwr/metrics.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>

namespace gwr {

namespace {

struct PlanSeen {
    CycleIndex cycle;
    Cell target;
};

struct InstructionSeen {
    CycleIndex cycle;
    Cell goal;
};

[[noreturn]] void bad_line(std::size_t line_no, const std::string& why) {
    throw TraceError(line_no, why);
}

Cell cell_or_throw(const json& j, std::size_t line_no, const char* field) {
    try {
        return cell_from_json(j);
    } catch (const std::invalid_argument&) {
        bad_line(line_no, std::string("field '") + field + "' is not a cell");
    }
}

}  // namespace

MetricsReport compute_metrics(const ParsedTrace& trace) {
    if (!trace.header.is_object() || !trace.header.contains("engine") ||
        !trace.header["engine"].is_string()) {
        throw TraceError(1, "header has no engine field");
    }
    const std::string engine = trace.header["engine"].get<std::string>();
    const bool pipeline = engine.rfind("pipeline", 0) == 0;

    MetricsReport report;
    std::vector<PlanSeen> plans;
    std::vector<InstructionSeen> instructions;
    std::uint64_t steps = 0;
    bool reached = false;

    auto note_plan = [&plans](const json& payload, CycleIndex cycle, std::size_t line_no) {
        plans.push_back(PlanSeen{cycle, cell_or_throw(payload.at("target"), line_no, "target")});
    };

    for (std::size_t i = 0; i < trace.lines.size(); ++i) {
        const std::size_t line_no = i + 2;
        const json& line = trace.lines[i];
        if (!line.is_object()) bad_line(line_no, "event is not an object");
        if (!line.contains("cycle") || !line["cycle"].is_number_unsigned()) {
            bad_line(line_no, "missing unsigned 'cycle'");
        }
        if (!line.contains("phase") || !line["phase"].is_string()) {
            bad_line(line_no, "missing 'phase'");
        }
        const CycleIndex cycle = line["cycle"].get<CycleIndex>();
        const std::string phase = line["phase"].get<std::string>();
        report.cycles = std::max(report.cycles, cycle + 1);

        if (phase == "inject") {
            if (!line.contains("payload") || !line["payload"].is_object()) {
                bad_line(line_no, "inject event has no payload");
            }
            const json& payload = line["payload"];
            if (payload.value("kind", "") == "instruction") {
                instructions.push_back(InstructionSeen{
                    cycle, cell_or_throw(payload.at("goal"), line_no, "goal")});
            }
        } else if (phase == "broadcast" && !pipeline) {
            if (!line.contains("payload") || !line["payload"].is_object()) {
                bad_line(line_no, "broadcast event has no payload");
            }
            const json& payload = line["payload"];
            const std::string kind = payload.value("kind", "");
            if (kind == "plan") {
                note_plan(payload, cycle, line_no);
            } else if (kind == "chunk") {
                for (const json& inner : payload.value("interior", json::array())) {
                    if (inner.value("payload", json()).value("kind", "") == "plan") {
                        note_plan(inner["payload"], cycle, line_no);
                    }
                }
            }
            const json& collapsed = line.value("collapsed", json::array());
            if (!collapsed.is_array()) bad_line(line_no, "'collapsed' is not an array");
            if (collapsed.size() > 1) report.cycles_saved += collapsed.size() - 1;
        } else if (phase == "collect" && pipeline) {
            for (const json& proposal : line.value("proposals", json::array())) {
                if (proposal.value("payload", json()).value("kind", "") == "plan") {
                    note_plan(proposal["payload"], cycle, line_no);
                }
            }
        } else if (phase == "apply") {
            if (!line.contains("delta") || !line["delta"].is_object()) {
                bad_line(line_no, "apply event has no delta");
            }
            const json& delta = line["delta"];
            if (delta.value("collision", false)) report.collisions += 1;
            if (!reached) {
                if (delta.contains("move") && !delta["move"].is_null()) steps += 1;
                if (delta.value("at_goal", false)) {
                    report.steps_to_goal = steps;
                    reached = true;
                }
            }
        }
    }

    std::optional<std::uint64_t> worst;
    for (const InstructionSeen& instruction : instructions) {
        std::optional<std::uint64_t> latency;
        for (const PlanSeen& plan : plans) {
            if (plan.cycle >= instruction.cycle && plan.target == instruction.goal) {
                const std::uint64_t candidate = plan.cycle - instruction.cycle;
                if (!latency || candidate < *latency) latency = candidate;
            }
        }
        if (latency && (!worst || *latency > *worst)) worst = latency;
    }
    report.adaptation_latency = worst;
    return report;
}

json metrics_to_json(const MetricsReport& report) {
    json m{{"cycles", report.cycles}};
    m["steps_to_goal"] =
        report.steps_to_goal ? json(*report.steps_to_goal) : json("unreached");
    m["collisions"] = report.collisions;
    m["adaptation_latency"] =
        report.adaptation_latency ? json(*report.adaptation_latency) : json(nullptr);
    m["cycles_saved"] = report.cycles_saved;
    return json{{"metrics", std::move(m)}};
}

MetricsReport metrics_from_json(const json& j) {
    const json& m = j.contains("metrics") ? j["metrics"] : j;
    MetricsReport report;
    report.cycles = m.at("cycles").get<std::uint64_t>();
    if (m.at("steps_to_goal").is_number_unsigned()) {
        report.steps_to_goal = m["steps_to_goal"].get<std::uint64_t>();
    }
    report.collisions = m.at("collisions").get<std::uint64_t>();
    if (m.at("adaptation_latency").is_number_unsigned()) {
        report.adaptation_latency = m["adaptation_latency"].get<std::uint64_t>();
    }
    report.cycles_saved = m.at("cycles_saved").get<std::uint64_t>();
    return report;
}

namespace {

std::string value_cell(const std::optional<std::uint64_t>& v, const char* empty) {
    return v ? std::to_string(*v) : std::string(empty);
}

}  // namespace

std::string metrics_table(const MetricsReport& report) {
    char buf[96];
    std::string out = "metric              value\n";
    auto row = [&](const char* name, const std::string& value) {
        std::snprintf(buf, sizeof(buf), "%-19s %s\n", name, value.c_str());
        out += buf;
    };
    row("cycles", std::to_string(report.cycles));
    row("steps_to_goal", value_cell(report.steps_to_goal, "unreached"));
    row("collisions", std::to_string(report.collisions));
    row("adaptation_latency", value_cell(report.adaptation_latency, "n/a"));
    row("cycles_saved", std::to_string(report.cycles_saved));
    return out;
}

std::string compare_table(const MetricsReport& gwt, const MetricsReport& pipeline) {
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-19s %10s %10s %10s\n", "metric", "gwt", "pipeline",
                  "delta");
    out += buf;
    auto row = [&](const char* name, const std::optional<std::uint64_t>& a,
                   const std::optional<std::uint64_t>& b, const char* empty) {
        std::string delta = "n/a";
        if (a && b) {
            delta = std::to_string(static_cast<std::int64_t>(*a) -
                                   static_cast<std::int64_t>(*b));
        }
        std::snprintf(buf, sizeof(buf), "%-19s %10s %10s %10s\n", name,
                      value_cell(a, empty).c_str(), value_cell(b, empty).c_str(),
                      delta.c_str());
        out += buf;
    };
    row("cycles", gwt.cycles, pipeline.cycles, "0");
    row("steps_to_goal", gwt.steps_to_goal, pipeline.steps_to_goal, "unreached");
    row("collisions", gwt.collisions, pipeline.collisions, "0");
    row("adaptation_latency", gwt.adaptation_latency, pipeline.adaptation_latency, "n/a");
    row("cycles_saved", gwt.cycles_saved, pipeline.cycles_saved, "0");
    return out;
}

}  // namespace gwr
