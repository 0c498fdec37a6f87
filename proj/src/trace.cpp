#include "gwr/trace.hpp"

#include <fstream>
#include <sstream>

namespace gwr {

const char* phase_name(Phase phase) {
    switch (phase) {
        case Phase::Inject: return "inject";
        case Phase::Collect: return "collect";
        case Phase::Select: return "select";
        case Phase::Broadcast: return "broadcast";
        case Phase::Apply: return "apply";
    }
    return "unknown";
}

json header_to_json(const TraceHeader& header) {
    json j;
    j["trace"] = "gwr.v1";
    j["engine"] = header.engine;
    j["scenario"] = header.scenario;
    j["policy"] = header.policy;
    j["seed"] = header.seed;
    j["history_bound"] = header.history_bound;
    return j;
}

std::string trace_to_string(const TraceHeader& header, const std::vector<TraceEvent>& events,
                            const json* metrics_line) {
    std::string out = header_to_json(header).dump();
    out.push_back('\n');
    for (const TraceEvent& e : events) {
        out += e.line.dump();
        out.push_back('\n');
    }
    if (metrics_line != nullptr) {
        out += metrics_line->dump();
        out.push_back('\n');
    }
    return out;
}

void write_trace_file(const std::filesystem::path& path, const TraceHeader& header,
                      const std::vector<TraceEvent>& events, const json* metrics_line) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open trace file for writing: " + path.string());
    f << trace_to_string(header, events, metrics_line);
}

TraceError::TraceError(std::size_t line, const std::string& what)
    : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_no(line) {}

ParsedTrace parse_trace(const std::string& text) {
    ParsedTrace parsed;
    parsed.metrics = json();
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw TraceError(line_no, "not valid JSON");
        if (line_no == 1) {
            if (!j.is_object() || j.value("trace", "") != "gwr.v1") {
                throw TraceError(line_no, "missing gwr.v1 trace header");
            }
            parsed.header = std::move(j);
            continue;
        }
        if (j.is_object() && j.contains("metrics")) {
            parsed.metrics = std::move(j);
            continue;
        }
        if (!j.is_object() || !j.contains("cycle") || !j.contains("phase")) {
            throw TraceError(line_no, "event is missing cycle or phase");
        }
        parsed.lines.push_back(std::move(j));
    }
    if (parsed.header.is_null()) throw TraceError(1, "empty trace");
    return parsed;
}

ParsedTrace read_trace_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open trace file: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_trace(ss.str());
}

}  // namespace gwr
