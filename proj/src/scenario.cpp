#include "gwr/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gwr/policy.hpp"

namespace gwr {

namespace {

constexpr const char* kScenarioTag = "gwr-scenario.v1";

const std::vector<std::string>& known_slots() {
    static const std::vector<std::string> slots{"vision", "detector", "voice", "planner",
                                                "motor"};
    return slots;
}

[[noreturn]] void fail(const std::string& field, const std::string& why) {
    throw ScenarioError("scenario." + field + ": " + why);
}

double read_unit(const json& j, const std::string& field) {
    if (!j.is_number()) fail(field, "must be a number in [0, 1]");
    const double v = j.get<double>();
    if (!(v >= 0.0 && v <= 1.0)) fail(field, "must be within [0, 1]");
    return v;
}

Cell read_cell(const json& j, const std::string& field) {
    try {
        return cell_from_json(j);
    } catch (const std::invalid_argument& e) {
        fail(field, e.what());
    }
}

Payload read_payload(const json& j, const std::string& field) {
    try {
        return payload_from_json(j);
    } catch (const std::invalid_argument& e) {
        fail(field, e.what());
    }
}

GridWorld world_from_json(const json& j) {
    if (!j.is_object()) fail("world", "must be an object");
    GridWorld world;
    world.width = j.value("width", 0);
    world.height = j.value("height", 0);
    world.robot = read_cell(j.at("robot"), "world.robot");
    world.goal = read_cell(j.at("goal"), "world.goal");
    for (std::size_t i = 0; const json& c : j.value("obstacles", json::array())) {
        world.obstacles.insert(read_cell(c, "world.obstacles[" + std::to_string(i++) + "]"));
    }
    for (std::size_t h = 0; const json& track : j.value("humans", json::array())) {
        HumanTrack human;
        if (!track.is_array()) {
            fail("world.humans[" + std::to_string(h) + "]", "must be an array of cells");
        }
        for (std::size_t i = 0; const json& c : track) {
            human.cells.push_back(read_cell(
                c, "world.humans[" + std::to_string(h) + "][" + std::to_string(i++) + "]"));
        }
        world.humans.push_back(std::move(human));
        ++h;
    }
    try {
        validate_world(world);
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("scenario.") + e.what());
    }
    return world;
}

json world_to_json(const GridWorld& world) {
    json j{{"width", world.width}, {"height", world.height}};
    j["robot"] = cell_to_json(world.robot);
    j["goal"] = cell_to_json(world.goal);
    json obstacles = json::array();
    for (Cell c : world.obstacles) obstacles.push_back(cell_to_json(c));
    j["obstacles"] = std::move(obstacles);
    json humans = json::array();
    for (const HumanTrack& h : world.humans) {
        json track = json::array();
        for (Cell c : h.cells) track.push_back(cell_to_json(c));
        humans.push_back(std::move(track));
    }
    j["humans"] = std::move(humans);
    return j;
}

SalienceParams salience_from_json(const json& j) {
    SalienceParams p;
    if (j.is_null()) return p;
    if (!j.is_object()) fail("salience", "must be an object");
    p.alert = j.contains("alert") ? read_unit(j["alert"], "salience.alert") : p.alert;
    p.instruction_goal = j.contains("instruction_goal")
                             ? read_unit(j["instruction_goal"], "salience.instruction_goal")
                             : p.instruction_goal;
    p.plan_base =
        j.contains("plan_base") ? read_unit(j["plan_base"], "salience.plan_base") : p.plan_base;
    p.plan_urgent = j.contains("plan_urgent")
                        ? read_unit(j["plan_urgent"], "salience.plan_urgent")
                        : p.plan_urgent;
    p.percept_base = j.contains("percept_base")
                         ? read_unit(j["percept_base"], "salience.percept_base")
                         : p.percept_base;
    p.percept_proximity =
        j.contains("percept_proximity")
            ? read_unit(j["percept_proximity"], "salience.percept_proximity")
            : p.percept_proximity;
    p.percept_novelty = j.contains("percept_novelty")
                            ? read_unit(j["percept_novelty"], "salience.percept_novelty")
                            : p.percept_novelty;
    p.ambient = j.contains("ambient") ? read_unit(j["ambient"], "salience.ambient") : p.ambient;
    p.context_boost = j.contains("context_boost")
                          ? read_unit(j["context_boost"], "salience.context_boost")
                          : p.context_boost;
    return p;
}

json salience_to_json(const SalienceParams& p) {
    return json{{"alert", p.alert},
                {"instruction_goal", p.instruction_goal},
                {"plan_base", p.plan_base},
                {"plan_urgent", p.plan_urgent},
                {"percept_base", p.percept_base},
                {"percept_proximity", p.percept_proximity},
                {"percept_novelty", p.percept_novelty},
                {"ambient", p.ambient},
                {"context_boost", p.context_boost}};
}

}  // namespace

Scenario scenario_from_json(const json& j) {
    if (!j.is_object()) throw ScenarioError("scenario: root must be an object");
    if (j.value("scenario", "") != kScenarioTag) {
        fail("scenario", std::string("missing format tag \"") + kScenarioTag + "\"");
    }
    Scenario s;
    s.name = j.value("name", "");
    if (s.name.empty()) fail("name", "must be a non-empty string");

    const std::string kind = j.value("kind", "");
    if (kind == "grid") {
        s.kind = ScenarioKind::Grid;
    } else if (kind == "abstract") {
        s.kind = ScenarioKind::Abstract;
    } else {
        fail("kind", "must be \"grid\" or \"abstract\", got \"" + kind + "\"");
    }

    s.policy = j.value("policy", s.policy);
    try {
        parse_policy(s.policy);
    } catch (const std::invalid_argument& e) {
        fail("policy", e.what());
    }

    if (j.contains("memory")) {
        const json& m = j["memory"];
        if (!m.is_object()) fail("memory", "must be an object");
        s.memory_enabled = m.value("enabled", true);
        s.memory.suffix_order = m.value("suffix_order", s.memory.suffix_order);
        s.memory.chunk_cap = m.value("chunk_cap", s.memory.chunk_cap);
        s.memory.recall_threshold = m.value("recall_threshold", s.memory.recall_threshold);
        s.memory.salience_base = m.value("salience_base", s.memory.salience_base);
        if (s.memory.suffix_order == 0) fail("memory.suffix_order", "must be at least 1");
        if (s.memory.chunk_cap == 0) fail("memory.chunk_cap", "must be at least 1");
        if (s.memory.recall_threshold < 0.0) fail("memory.recall_threshold", "must be >= 0");
        if (s.memory.salience_base < 0.0 || s.memory.salience_base > 1.0) {
            fail("memory.salience_base", "must be within [0, 1]");
        }
    }

    if (j.contains("stop")) {
        const json& st = j["stop"];
        if (!st.is_object()) fail("stop", "must be an object");
        s.stop.max_cycles = st.value("max_cycles", s.stop.max_cycles);
        s.stop.on_goal = st.value("on_goal", false);
        s.stop.on_last_script_key = st.value("on_last_script_key", false);
        if (s.stop.max_cycles == 0) fail("stop.max_cycles", "must be at least 1");
    }

    for (std::size_t i = 0; const json& e : j.value("events", json::array())) {
        const std::string field = "events[" + std::to_string(i++) + "]";
        if (!e.is_object()) fail(field, "must be an object");
        ScenarioEvent event;
        event.arrival = e.value("arrival", 0.0);
        if (!(event.arrival >= 0.0) || !std::isfinite(event.arrival)) {
            fail(field + ".arrival", "must be a finite number >= 0");
        }
        event.salience = read_unit(e.at("salience"), field + ".salience");
        event.payload = read_payload(e.at("payload"), field + ".payload");
        if (std::holds_alternative<ChunkRecallPayload>(event.payload)) {
            fail(field + ".payload", "chunk payloads cannot be injected");
        }
        s.events.push_back(std::move(event));
    }

    if (s.kind == ScenarioKind::Grid) {
        if (!j.contains("world")) fail("world", "required for grid scenarios");
        s.world = world_from_json(j["world"]);
        s.salience = salience_from_json(j.value("salience", json()));
        s.pipeline = known_slots();
        if (j.contains("pipeline")) {
            if (!j["pipeline"].is_array() || j["pipeline"].empty()) {
                fail("pipeline", "must be a non-empty array of slot names");
            }
            s.pipeline.clear();
            for (const json& slot : j["pipeline"]) {
                const std::string name = slot.is_string() ? slot.get<std::string>() : "";
                if (std::find(known_slots().begin(), known_slots().end(), name) ==
                    known_slots().end()) {
                    fail("pipeline", "unknown slot \"" + name + "\"");
                }
                s.pipeline.push_back(name);
            }
        }
        if (s.stop.on_last_script_key) {
            fail("stop.on_last_script_key", "only valid for abstract scenarios");
        }
    } else {
        if (!j.contains("modules") || !j["modules"].is_array() || j["modules"].empty()) {
            fail("modules", "abstract scenarios need a non-empty module list");
        }
        for (std::size_t i = 0; const json& m : j["modules"]) {
            const std::string field = "modules[" + std::to_string(i++) + "]";
            ScriptedModuleSpec spec;
            spec.name = m.value("name", "");
            if (spec.name.empty()) fail(field + ".name", "must be a non-empty string");
            spec.priority = m.value("priority", 0u);
            if (spec.priority == 0) fail(field + ".priority", "must be at least 1");
            for (const ScriptedModuleSpec& other : s.modules) {
                if (other.name == spec.name) fail(field + ".name", "duplicate module name");
                if (other.priority == spec.priority) {
                    fail(field + ".priority", "duplicate priority");
                }
            }
            for (std::size_t k = 0; const json& entry : m.value("script", json::array())) {
                const std::string sfield = field + ".script[" + std::to_string(k++) + "]";
                ScriptedProposal p;
                p.cycle = entry.value("cycle", 0ull);
                p.salience = read_unit(entry.at("salience"), sfield + ".salience");
                p.payload = read_payload(entry.at("payload"), sfield + ".payload");
                if (std::holds_alternative<ChunkRecallPayload>(p.payload)) {
                    fail(sfield + ".payload", "chunk payloads cannot be scripted");
                }
                spec.script.push_back(std::move(p));
            }
            s.modules.push_back(std::move(spec));
        }
        if (s.stop.on_goal) fail("stop.on_goal", "only valid for grid scenarios");
    }
    return s;
}

json scenario_to_json(const Scenario& s) {
    json j{{"scenario", kScenarioTag}, {"name", s.name}};
    j["kind"] = s.kind == ScenarioKind::Grid ? "grid" : "abstract";
    j["policy"] = s.policy;
    j["memory"] = json{{"enabled", s.memory_enabled},
                       {"suffix_order", s.memory.suffix_order},
                       {"chunk_cap", s.memory.chunk_cap},
                       {"recall_threshold", s.memory.recall_threshold},
                       {"salience_base", s.memory.salience_base}};
    j["stop"] = json{{"max_cycles", s.stop.max_cycles},
                     {"on_goal", s.stop.on_goal},
                     {"on_last_script_key", s.stop.on_last_script_key}};
    json events = json::array();
    for (const ScenarioEvent& e : s.events) {
        events.push_back(json{{"arrival", e.arrival},
                              {"salience", e.salience},
                              {"payload", payload_to_json(e.payload)}});
    }
    j["events"] = std::move(events);
    if (s.kind == ScenarioKind::Grid) {
        j["world"] = world_to_json(s.world);
        j["salience"] = salience_to_json(s.salience);
        j["pipeline"] = s.pipeline;
    } else {
        json modules = json::array();
        for (const ScriptedModuleSpec& m : s.modules) {
            json script = json::array();
            for (const ScriptedProposal& p : m.script) {
                script.push_back(json{{"cycle", p.cycle},
                                      {"salience", p.salience},
                                      {"payload", payload_to_json(p.payload)}});
            }
            modules.push_back(json{
                {"name", m.name}, {"priority", m.priority}, {"script", std::move(script)}});
        }
        j["modules"] = std::move(modules);
    }
    return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot read scenario file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        const std::size_t stop = std::min(e.byte, text.size());
        for (std::size_t i = 0; i < stop; ++i) {
            if (text[i] == '\n') ++line;
        }
        throw ScenarioError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
    try {
        return scenario_from_json(j);
    } catch (const ScenarioError& e) {
        throw ScenarioError(path.string() + ": " + e.what());
    }
}

void save_scenario(const std::filesystem::path& path, const Scenario& scenario) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ScenarioError("cannot write scenario file: " + path.string());
    out << scenario_to_json(scenario).dump(2) << '\n';
}

}  // namespace gwr
