#pragma once
// Wires scenarios to engines: the grid-world module cast for the
// workspace engine, the fixed-order pipeline baseline, and the shared
// world-stepping logic both engines use in their Apply phase.

#include "gwr/engine.hpp"
#include "gwr/scenario.hpp"

namespace gwr {

// Perceives the room and any humans. Human percepts gain salience with
// proximity and novelty, and a context boost when the current conscious
// content is an Alert (or a Goal the human stands near).
class VisionModule : public SpecialistModule {
  public:
    VisionModule(const GridWorld* world, SalienceParams params);

    std::string name() const override { return "vision"; }
    std::vector<Proposal> propose(const WorkspaceState& state, StepBudget& budget) override;
    void receive_broadcast(const Content& content, CycleIndex cycle,
                           StepBudget& budget) override;

  private:
    const GridWorld* world_;
    SalienceParams params_;
    std::set<Cell> seen_;
};

// Raises an Alert when a human stands on the remaining route within
// manhattan distance 2 of the robot. Tracks the route from broadcast
// Plans only.
class HumanDetectorModule : public SpecialistModule {
  public:
    HumanDetectorModule(const GridWorld* world, SalienceParams params);

    std::string name() const override { return "detector"; }
    std::vector<Proposal> propose(const WorkspaceState& state, StepBudget& budget) override;
    void receive_broadcast(const Content& content, CycleIndex cycle,
                           StepBudget& budget) override;

  private:
    const GridWorld* world_;
    SalienceParams params_;
    std::optional<PlanPayload> plan_;
};

// Turns broadcast Instructions into Goal proposals; keeps proposing
// until the goal itself is broadcast.
class VoiceModule : public SpecialistModule {
  public:
    explicit VoiceModule(SalienceParams params);

    std::string name() const override { return "voice"; }
    std::vector<Proposal> propose(const WorkspaceState& state, StepBudget& budget) override;
    void receive_broadcast(const Content& content, CycleIndex cycle,
                           StepBudget& budget) override;

  private:
    SalienceParams params_;
    std::optional<Cell> pending_;
};

// Routes to the current goal, avoiding cells where humans were recently
// broadcast. Re-proposes its cached route (stable content key) while it
// stays valid; replans — urgently after an Alert — when it does not.
class PlannerModule : public SpecialistModule {
  public:
    PlannerModule(const GridWorld* world, SalienceParams params);

    std::string name() const override { return "planner"; }
    std::vector<Proposal> propose(const WorkspaceState& state, StepBudget& budget) override;
    void receive_broadcast(const Content& content, CycleIndex cycle,
                           StepBudget& budget) override;

    Cell goal() const { return goal_; }

  private:
    std::set<Cell> active_avoid(CycleIndex cycle) const;

    const GridWorld* world_;
    SalienceParams params_;
    Cell goal_;
    bool urgent_ = false;
    std::optional<PlanPayload> cached_;
    std::vector<std::pair<Cell, CycleIndex>> avoid_;
};

// Holds the adopted route and hands one move per Apply phase to the
// harness. Adopts a plan only when the robot stands on its route with
// moves still ahead, so stale recalled routes cannot teleport the
// executor.
class MotorModule : public SpecialistModule {
  public:
    explicit MotorModule(const GridWorld* world);

    std::string name() const override { return "motor"; }
    std::vector<Proposal> propose(const WorkspaceState& state, StepBudget& budget) override;
    void receive_broadcast(const Content& content, CycleIndex cycle,
                           StepBudget& budget) override;

    std::optional<Move> take_move();
    void adopt(const PlanPayload& plan);

  private:
    const GridWorld* world_;
    std::optional<PlanPayload> active_;
    std::size_t next_ = 0;
};

// Plays back a fixed proposal script; used by abstract scenarios and
// the scripted-salience test drivers.
class ScriptedModule : public SpecialistModule {
  public:
    explicit ScriptedModule(ScriptedModuleSpec spec);

    std::string name() const override { return spec_.name; }
    std::vector<Proposal> propose(const WorkspaceState& state, StepBudget& budget) override;
    void receive_broadcast(const Content& content, CycleIndex cycle,
                           StepBudget& budget) override;

  private:
    ScriptedModuleSpec spec_;
};

struct RunOptions {
    std::string policy;  // empty: scenario default
    std::uint64_t seed = 0;
    std::uint64_t max_cycles = 0;  // 0: scenario default
    bool no_memory = false;
    bool parallel_collect = false;
    std::size_t history_bound = 64;
    std::optional<EpisodeStore> memory_in;
};

struct RunOutput {
    TraceHeader header;
    std::vector<TraceEvent> events;
    StopReason stop = StopReason::MaxCycles;
    std::uint64_t cycles = 0;
    GridWorld final_world;
    std::optional<EpisodeStore> memory_out;
};

// One world step shared by both engines' Apply phase: consume at most
// one motor move (dropping moves into obstacles), advance the tick and
// every human, then report robot cell, collision, and goal arrival.
json apply_world_step(GridWorld& world, std::optional<Move> move, Cell current_goal);

RunOutput run_gwt(const Scenario& scenario, const RunOptions& options);
RunOutput run_pipeline(const Scenario& scenario, const RunOptions& options,
                       std::vector<std::string> order = {});

std::string pipeline_engine_label(const std::vector<std::string>& order);
// Parses "vision,planner,motor"; throws std::invalid_argument on
// unknown slot names.
std::vector<std::string> parse_pipeline_order(const std::string& text);

}  // namespace gwr
