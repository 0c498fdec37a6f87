#pragma once
// Scenario files: a grid world with the standard module cast, or an
// abstract scripted-module scenario. JSON on disk, validated on load.

#include <filesystem>

#include "gwr/grid.hpp"
#include "gwr/jsonio.hpp"
#include "gwr/memory.hpp"

namespace gwr {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Salience constants of the grid-world cast. Defaults encode the
// priority story: safety alerts interrupt goal changes, goal changes
// interrupt routine planning, planning outranks idle percepts.
struct SalienceParams {
    double alert = 0.9;
    double instruction_goal = 0.8;
    double plan_base = 0.5;
    double plan_urgent = 0.7;
    double percept_base = 0.2;
    double percept_proximity = 0.2;
    double percept_novelty = 0.05;
    double ambient = 0.4;
    double context_boost = 0.2;
};

struct ScriptedProposal {
    CycleIndex cycle = 0;
    Payload payload;
    double salience = 0.0;
};

struct ScriptedModuleSpec {
    std::string name;
    std::uint32_t priority = 1;
    std::vector<ScriptedProposal> script;
};

struct ScenarioEvent {
    double arrival = 0.0;
    double salience = 0.0;
    Payload payload;
};

struct StopSpec {
    std::uint64_t max_cycles = 1000;
    bool on_goal = false;             // grid: stop once the robot stands on the goal
    bool on_last_script_key = false;  // abstract: stop once the final scripted
                                      // content has been broadcast or collapsed
};

enum class ScenarioKind { Grid, Abstract };

struct Scenario {
    std::string name;
    ScenarioKind kind = ScenarioKind::Grid;
    std::string policy = "recency:0.5";
    bool memory_enabled = true;
    MemoryConfig memory;
    StopSpec stop;
    std::vector<ScenarioEvent> events;

    GridWorld world;                    // grid only
    SalienceParams salience;            // grid only
    std::vector<std::string> pipeline;  // grid only: default slot order

    std::vector<ScriptedModuleSpec> modules;  // abstract only
};

// Throws ScenarioError; parse failures name the line, validation
// failures name the field.
Scenario scenario_from_json(const json& j);
json scenario_to_json(const Scenario& scenario);
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const Scenario& scenario);

}  // namespace gwr
