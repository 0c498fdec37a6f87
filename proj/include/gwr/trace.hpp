#pragma once
// Trace events and the JSON Lines trace file format. One event per line,
// fixed key order, UTF-8, LF endings, so identical runs diff byte-exact.

#include <filesystem>
#include <string>
#include <vector>

#include "gwr/jsonio.hpp"

namespace gwr {

enum class Phase { Inject, Collect, Select, Broadcast, Apply };

const char* phase_name(Phase phase);

// Append-only record of one phase of one cycle. `line` is the complete
// JSON object written to the trace file for this event.
struct TraceEvent {
    CycleIndex cycle = 0;
    Phase phase = Phase::Collect;
    json line;
};

// First line of every trace file: format tag plus run identity.
struct TraceHeader {
    std::string engine;    // "gwt" or "pipeline:<order>"
    std::string scenario;
    std::string policy;
    std::uint64_t seed = 0;
    std::size_t history_bound = 64;
};

json header_to_json(const TraceHeader& header);

std::string trace_to_string(const TraceHeader& header, const std::vector<TraceEvent>& events,
                            const json* metrics_line = nullptr);

void write_trace_file(const std::filesystem::path& path, const TraceHeader& header,
                      const std::vector<TraceEvent>& events, const json* metrics_line = nullptr);

// A parsed trace file. `lines` excludes the header and any trailing
// metrics line; both are kept separately.
struct ParsedTrace {
    json header;
    std::vector<json> lines;
    json metrics;  // null when absent
};

// Throws TraceError naming the first offending line.
struct TraceError : std::runtime_error {
    std::size_t line_no;
    TraceError(std::size_t line_no, const std::string& what);
};

ParsedTrace parse_trace(const std::string& text);
ParsedTrace read_trace_file(const std::filesystem::path& path);

}  // namespace gwr
