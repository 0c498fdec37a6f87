#include "gwr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gwr/policy.hpp"

namespace gwr {

namespace {

double cap_unit(double v) { return std::min(1.0, v); }

// Cells a plan touches, origin first.
std::vector<Cell> plan_cells(const PlanPayload& plan) {
    std::vector<Cell> cells{plan.origin};
    Cell cur = plan.origin;
    for (Move m : plan.moves) {
        cur = step(cur, m);
        cells.push_back(cur);
    }
    return cells;
}

// Route cells still ahead of the robot, or empty when the robot is not
// on the route at all.
std::vector<Cell> remaining_cells(const PlanPayload& plan, Cell robot) {
    std::vector<Cell> cells = plan_cells(plan);
    auto at = std::find(cells.begin(), cells.end(), robot);
    if (at == cells.end()) return {};
    return std::vector<Cell>(at, cells.end());
}

const GoalPayload* as_goal(const Payload& payload) { return std::get_if<GoalPayload>(&payload); }

// A plan is adoptable when the robot stands on its route with moves
// still ahead; returns the index of the next move to execute.
std::optional<std::size_t> locate_on_route(const PlanPayload& plan, Cell robot) {
    if (!plan.reachable || plan.moves.empty()) return std::nullopt;
    const std::vector<Cell> cells = plan_cells(plan);
    const auto at = std::find(cells.begin(), cells.end(), robot);
    if (at == cells.end()) return std::nullopt;
    const auto index = static_cast<std::size_t>(at - cells.begin());
    if (index >= plan.moves.size()) return std::nullopt;
    return index;
}

}  // namespace

// ---------------------------------------------------------------- vision

VisionModule::VisionModule(const GridWorld* world, SalienceParams params)
    : world_(world), params_(params) {}

std::vector<Proposal> VisionModule::propose(const WorkspaceState& state, StepBudget& budget) {
    budget.charge(1 + world_->humans.size());
    std::vector<Proposal> proposals;
    proposals.push_back(
        make_proposal(PerceptPayload{"room", std::nullopt}, params_.ambient, state.cycle));

    const AlertPayload* alert_context = nullptr;
    const GoalPayload* goal_context = nullptr;
    if (state.conscious) {
        alert_context = std::get_if<AlertPayload>(&state.conscious->payload);
        goal_context = std::get_if<GoalPayload>(&state.conscious->payload);
    }

    for (Cell cell : world_->human_cells()) {
        const std::int64_t d = std::max<std::int64_t>(1, manhattan(world_->robot, cell));
        double salience = params_.percept_base + params_.percept_proximity / double(d);
        if (seen_.insert(cell).second) salience += params_.percept_novelty;
        const bool relevant =
            alert_context != nullptr ||
            (goal_context != nullptr && manhattan(cell, goal_context->target) <= 2);
        if (relevant) salience += params_.context_boost;
        proposals.push_back(
            make_proposal(PerceptPayload{"human", cell}, cap_unit(salience), state.cycle));
    }
    return proposals;
}

void VisionModule::receive_broadcast(const Content&, CycleIndex, StepBudget& budget) {
    budget.charge(1);
}

// -------------------------------------------------------------- detector

HumanDetectorModule::HumanDetectorModule(const GridWorld* world, SalienceParams params)
    : world_(world), params_(params) {}

std::vector<Proposal> HumanDetectorModule::propose(const WorkspaceState& state,
                                                   StepBudget& budget) {
    budget.charge(1 + world_->humans.size());
    if (!plan_ || !plan_->reachable) return {};
    const std::vector<Cell> route = remaining_cells(*plan_, world_->robot);
    if (route.empty()) return {};

    std::optional<Cell> threat;
    for (Cell cell : world_->human_cells()) {
        if (manhattan(world_->robot, cell) > 2) continue;
        if (std::find(route.begin(), route.end(), cell) == route.end()) continue;
        if (!threat || manhattan(world_->robot, cell) < manhattan(world_->robot, *threat) ||
            (manhattan(world_->robot, cell) == manhattan(world_->robot, *threat) &&
             cell < *threat)) {
            threat = cell;
        }
    }
    if (!threat) return {};
    return {make_proposal(AlertPayload{"human-on-path", *threat}, params_.alert, state.cycle)};
}

void HumanDetectorModule::receive_broadcast(const Content& content, CycleIndex,
                                            StepBudget& budget) {
    budget.charge(1);
    if (const auto* plan = std::get_if<PlanPayload>(&content.payload)) plan_ = *plan;
}

// ----------------------------------------------------------------- voice

VoiceModule::VoiceModule(SalienceParams params) : params_(params) {}

std::vector<Proposal> VoiceModule::propose(const WorkspaceState& state, StepBudget& budget) {
    budget.charge(1);
    if (!pending_) return {};
    return {make_proposal(GoalPayload{*pending_}, params_.instruction_goal, state.cycle)};
}

void VoiceModule::receive_broadcast(const Content& content, CycleIndex, StepBudget& budget) {
    budget.charge(1);
    if (const auto* instruction = std::get_if<InstructionPayload>(&content.payload)) {
        pending_ = instruction->goal;
        return;
    }
    if (const GoalPayload* goal = as_goal(content.payload)) {
        if (pending_ && goal->target == *pending_) pending_.reset();
    }
}

// --------------------------------------------------------------- planner

PlannerModule::PlannerModule(const GridWorld* world, SalienceParams params)
    : world_(world), params_(params), goal_(world->goal) {}

std::set<Cell> PlannerModule::active_avoid(CycleIndex cycle) const {
    std::set<Cell> cells;
    for (const auto& [cell, seen] : avoid_) {
        if (cycle <= seen + 3) cells.insert(cell);
    }
    return cells;
}

std::vector<Proposal> PlannerModule::propose(const WorkspaceState& state, StepBudget& budget) {
    budget.charge(2);
    std::erase_if(avoid_, [&](const auto& entry) { return state.cycle > entry.second + 3; });
    if (world_->robot == goal_) {
        cached_.reset();
        return {};
    }

    const std::set<Cell> avoid = active_avoid(state.cycle);
    bool valid = cached_.has_value() && cached_->target == goal_ && cached_->reachable;
    if (valid) {
        const std::vector<Cell> remaining = remaining_cells(*cached_, world_->robot);
        valid = !remaining.empty();
        for (Cell cell : remaining) {
            if (avoid.count(cell)) valid = false;
        }
    }
    if (!valid) {
        budget.charge(static_cast<std::uint64_t>(world_->width) * world_->height);
        cached_ = plan_route(*world_, world_->robot, goal_, avoid);
    }
    const double salience = urgent_ ? params_.plan_urgent : params_.plan_base;
    return {make_proposal(*cached_, salience, state.cycle)};
}

void PlannerModule::receive_broadcast(const Content& content, CycleIndex cycle,
                                      StepBudget& budget) {
    budget.charge(1);
    if (const GoalPayload* goal = as_goal(content.payload)) {
        if (goal->target != goal_) {
            goal_ = goal->target;
            cached_.reset();
        }
        return;
    }
    if (const auto* alert = std::get_if<AlertPayload>(&content.payload)) {
        avoid_.emplace_back(alert->cell, cycle);
        urgent_ = true;
        cached_.reset();
        return;
    }
    if (const auto* percept = std::get_if<PerceptPayload>(&content.payload)) {
        if (percept->label == "human" && percept->cell &&
            manhattan(world_->robot, *percept->cell) <= 2) {
            avoid_.emplace_back(*percept->cell, cycle);
        }
        return;
    }
    if (const auto* plan = std::get_if<PlanPayload>(&content.payload)) {
        if (cached_ && *plan == *cached_) urgent_ = false;
    }
}

// ----------------------------------------------------------------- motor

MotorModule::MotorModule(const GridWorld* world) : world_(world) {}

std::vector<Proposal> MotorModule::propose(const WorkspaceState&, StepBudget& budget) {
    budget.charge(1);
    return {};
}

void MotorModule::adopt(const PlanPayload& plan) {
    const auto index = locate_on_route(plan, world_->robot);
    if (!index) return;
    active_ = plan;
    next_ = *index;
}

void MotorModule::receive_broadcast(const Content& content, CycleIndex, StepBudget& budget) {
    budget.charge(1);
    if (const auto* plan = std::get_if<PlanPayload>(&content.payload)) adopt(*plan);
}

std::optional<Move> MotorModule::take_move() {
    if (!active_ || next_ >= active_->moves.size()) return std::nullopt;
    const Move m = active_->moves[next_++];
    if (next_ >= active_->moves.size()) active_.reset();
    return m;
}

// -------------------------------------------------------------- scripted

ScriptedModule::ScriptedModule(ScriptedModuleSpec spec) : spec_(std::move(spec)) {}

std::vector<Proposal> ScriptedModule::propose(const WorkspaceState& state, StepBudget& budget) {
    budget.charge(1);
    std::vector<Proposal> proposals;
    for (const ScriptedProposal& entry : spec_.script) {
        if (entry.cycle == state.cycle) {
            proposals.push_back(make_proposal(entry.payload, entry.salience, state.cycle));
        }
    }
    return proposals;
}

void ScriptedModule::receive_broadcast(const Content&, CycleIndex, StepBudget& budget) {
    budget.charge(1);
}

// -------------------------------------------------------------- world step

json apply_world_step(GridWorld& world, std::optional<Move> move, Cell current_goal) {
    std::optional<Move> executed = move;
    bool dropped = false;
    if (executed) {
        const Cell target = step(world.robot, *executed);
        if (world.blocked(target)) {
            dropped = true;
            executed.reset();
        } else {
            world.robot = target;
        }
    }
    world.tick += 1;
    bool collision = false;
    for (const HumanTrack& h : world.humans) {
        if (h.at(world.tick) == world.robot) collision = true;
    }
    json delta{{"robot", cell_to_json(world.robot)}, {"tick", world.tick}};
    delta["move"] = executed ? json(std::string(1, move_letter(*executed))) : json(nullptr);
    delta["collision"] = collision;
    delta["at_goal"] = world.robot == current_goal;
    if (dropped) delta["warning"] = "move into blocked cell dropped";
    return delta;
}

// ------------------------------------------------------------ gwt runner

RunOutput run_gwt(const Scenario& scenario, const RunOptions& options) {
    EngineConfig config;
    const std::string policy_text = options.policy.empty() ? scenario.policy : options.policy;
    config.policy = parse_policy(policy_text);
    config.seed = options.seed;
    config.history_bound = options.history_bound;
    config.max_cycles = options.max_cycles ? options.max_cycles : scenario.stop.max_cycles;
    config.parallel_collect = options.parallel_collect;
    Engine engine(config);

    GridWorld world = scenario.world;
    Cell current_goal = world.goal;
    MotorModule* motor = nullptr;
    EpisodicMemoryModule* memory = nullptr;
    std::optional<ContentKey> stop_key;

    if (scenario.kind == ScenarioKind::Grid) {
        engine.register_module(std::make_unique<VoiceModule>(scenario.salience), 1);
        engine.register_module(std::make_unique<VisionModule>(&world, scenario.salience), 2);
        engine.register_module(std::make_unique<HumanDetectorModule>(&world, scenario.salience),
                               3);
        engine.register_module(std::make_unique<PlannerModule>(&world, scenario.salience), 4);
        auto motor_module = std::make_unique<MotorModule>(&world);
        motor = motor_module.get();
        engine.register_module(std::move(motor_module), 5);
    } else {
        std::uint32_t highest = 0;
        for (const ScriptedModuleSpec& spec : scenario.modules) {
            engine.register_module(std::make_unique<ScriptedModule>(spec), spec.priority);
            highest = std::max(highest, spec.priority);
        }
        if (scenario.stop.on_last_script_key) {
            const ScriptedProposal* last = nullptr;
            for (const ScriptedModuleSpec& spec : scenario.modules) {
                for (const ScriptedProposal& entry : spec.script) {
                    if (!last || entry.cycle >= last->cycle) last = &entry;
                }
            }
            if (last) stop_key = content_key(last->payload);
        }
    }

    if (scenario.memory_enabled && !options.no_memory) {
        const std::uint32_t memory_priority =
            scenario.kind == ScenarioKind::Grid
                ? 6
                : [&] {
                      std::uint32_t p = 0;
                      for (const ScriptedModuleSpec& spec : scenario.modules) {
                          p = std::max(p, spec.priority);
                      }
                      return p + 1;
                  }();
        auto module = std::make_unique<EpisodicMemoryModule>(scenario.memory);
        if (options.memory_in) module->replace_store(*options.memory_in);
        memory = module.get();
        engine.register_module(std::move(module), memory_priority);
    }

    for (const ScenarioEvent& event : scenario.events) {
        engine.inject_event(ExternalEvent{event.payload, Salience(event.salience),
                                          event.arrival});
    }

    if (scenario.kind == ScenarioKind::Grid) {
        engine.set_apply_hook([&world, &current_goal, motor](const Content* winner,
                                                             CycleIndex) -> json {
            if (winner) {
                if (const GoalPayload* goal = as_goal(winner->payload)) {
                    current_goal = goal->target;
                }
                if (const ChunkRecallPayload* chunk = as_chunk(*winner)) {
                    for (const Content& inner : chunk->interior) {
                        if (const GoalPayload* goal = as_goal(inner.payload)) {
                            current_goal = goal->target;
                        }
                    }
                }
            }
            return apply_world_step(world, motor->take_move(), current_goal);
        });
    }
    if (memory) {
        engine.set_cycle_hook([memory](const Content* winner, const json& delta, CycleIndex) {
            if (!winner || !as_chunk(*winner)) return;
            const bool collided = delta.value("collision", false);
            const bool warned = delta.contains("warning");
            memory->reinforce_chunk(winner->key, !collided && !warned);
        });
    }

    StopCondition stop;
    if (scenario.kind == ScenarioKind::Grid && scenario.stop.on_goal) {
        stop.predicate = [&world, &current_goal](const WorkspaceState&) {
            return world.robot == current_goal;
        };
    }
    stop.content = stop_key;
    const RunResult result = engine.run_until(stop);

    RunOutput out;
    out.header = TraceHeader{"gwt", scenario.name, policy_text, options.seed,
                             config.history_bound};
    out.events = engine.trace();
    out.stop = result.reason;
    out.cycles = engine.state().cycle;
    out.final_world = world;
    if (memory) out.memory_out = memory->store();
    return out;
}

// ------------------------------------------------------- pipeline runner

std::string pipeline_engine_label(const std::vector<std::string>& order) {
    std::string label = "pipeline:";
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i) label += ',';
        label += order[i];
    }
    return label;
}

std::vector<std::string> parse_pipeline_order(const std::string& text) {
    static const std::vector<std::string> known{"vision", "detector", "voice", "planner",
                                                "motor"};
    std::vector<std::string> order;
    std::string slot;
    std::stringstream in(text);
    while (std::getline(in, slot, ',')) {
        if (std::find(known.begin(), known.end(), slot) == known.end()) {
            throw std::invalid_argument("unknown pipeline slot \"" + slot + "\"");
        }
        order.push_back(slot);
    }
    if (order.empty()) throw std::invalid_argument("pipeline order must name at least one slot");
    return order;
}

RunOutput run_pipeline(const Scenario& scenario, const RunOptions& options,
                       std::vector<std::string> order) {
    if (scenario.kind != ScenarioKind::Grid) {
        throw ScenarioError("the pipeline engine requires a grid scenario");
    }
    if (order.empty()) order = scenario.pipeline;

    GridWorld world = scenario.world;
    const SalienceParams& params = scenario.salience;
    const std::uint64_t max_cycles =
        options.max_cycles ? options.max_cycles : scenario.stop.max_cycles;

    struct PendingEvent {
        CycleIndex effective;
        double arrival;
        double salience;
        Payload payload;
        ContentKey key;
        bool consumed = false;
    };
    std::vector<PendingEvent> events;
    for (const ScenarioEvent& event : scenario.events) {
        PendingEvent p;
        p.effective = static_cast<CycleIndex>(std::ceil(std::max(0.0, event.arrival)));
        p.arrival = event.arrival;
        p.salience = event.salience;
        p.payload = event.payload;
        p.key = content_key(event.payload);
        events.push_back(std::move(p));
    }

    Cell goal = world.goal;
    bool urgent = false;
    std::vector<std::pair<Cell, CycleIndex>> avoid;
    std::optional<PlanPayload> adopted;
    std::size_t next_move = 0;
    std::set<Cell> seen;
    std::optional<PlanPayload> detector_plan;

    struct Datum {
        Content content;
        double salience;
    };
    std::optional<Datum> datum;

    std::vector<TraceEvent> trace;
    auto push = [&trace](Phase phase, CycleIndex cycle, json line) {
        trace.push_back(TraceEvent{cycle, phase, std::move(line)});
    };

    StopReason reason = StopReason::MaxCycles;
    std::uint64_t cycles = 0;
    for (CycleIndex cycle = 0; cycle < max_cycles; ++cycle) {
        // Inject: record arrivals, sorted the same way the workspace
        // engine sorts them.
        std::vector<const PendingEvent*> due;
        for (const PendingEvent& e : events) {
            if (e.effective == cycle) due.push_back(&e);
        }
        std::stable_sort(due.begin(), due.end(), [](const PendingEvent* a,
                                                    const PendingEvent* b) {
            if (a->salience != b->salience) return a->salience > b->salience;
            return a->key < b->key;
        });
        for (const PendingEvent* e : due) {
            push(Phase::Inject, cycle,
                 json{{"cycle", cycle},
                      {"phase", phase_name(Phase::Inject)},
                      {"key", key_hex(e->key)},
                      {"payload", payload_to_json(e->payload)},
                      {"salience", e->salience},
                      {"arrival", e->arrival}});
        }

        // One slot per cycle, consuming the previous slot's output.
        const std::string& slot = order[cycle % order.size()];
        const ModuleId slot_id{slot, static_cast<std::uint32_t>((cycle % order.size()) + 1)};
        std::optional<Datum> produced;

        if (slot == "vision") {
            std::optional<Datum> best;
            auto consider = [&](Payload payload, double salience) {
                Content content(std::move(payload), slot_id, cycle);
                if (!best || salience > best->salience ||
                    (salience == best->salience && content.key < best->content.key)) {
                    best = Datum{std::move(content), salience};
                }
            };
            consider(PerceptPayload{"room", std::nullopt}, params.ambient);
            for (Cell cell : world.human_cells()) {
                const std::int64_t d = std::max<std::int64_t>(1, manhattan(world.robot, cell));
                double salience = params.percept_base + params.percept_proximity / double(d);
                if (seen.insert(cell).second) salience += params.percept_novelty;
                consider(PerceptPayload{"human", cell}, cap_unit(salience));
            }
            produced = best;
        } else if (slot == "detector") {
            if (datum && std::holds_alternative<PlanPayload>(datum->content.payload)) {
                detector_plan = std::get<PlanPayload>(datum->content.payload);
            }
            const PlanPayload* route_plan =
                detector_plan ? &*detector_plan : (adopted ? &*adopted : nullptr);
            if (route_plan && route_plan->reachable) {
                const std::vector<Cell> route = remaining_cells(*route_plan, world.robot);
                std::optional<Cell> threat;
                for (Cell cell : world.human_cells()) {
                    if (manhattan(world.robot, cell) > 2) continue;
                    if (std::find(route.begin(), route.end(), cell) == route.end()) continue;
                    if (!threat || manhattan(world.robot, cell) < manhattan(world.robot, *threat) ||
                        (manhattan(world.robot, cell) == manhattan(world.robot, *threat) &&
                         cell < *threat)) {
                        threat = cell;
                    }
                }
                if (threat) {
                    produced = Datum{
                        Content(AlertPayload{"human-on-path", *threat}, slot_id, cycle),
                        params.alert};
                }
            }
        } else if (slot == "voice") {
            const PendingEvent* latest = nullptr;
            for (PendingEvent& e : events) {
                if (e.consumed || e.effective > cycle) continue;
                if (!std::holds_alternative<InstructionPayload>(e.payload)) continue;
                e.consumed = true;
                latest = &e;
            }
            if (latest) {
                const auto& instruction = std::get<InstructionPayload>(latest->payload);
                produced = Datum{Content(GoalPayload{instruction.goal}, slot_id, cycle),
                                 params.instruction_goal};
            }
        } else if (slot == "planner") {
            if (datum) {
                if (const GoalPayload* g = as_goal(datum->content.payload)) {
                    goal = g->target;
                } else if (const auto* alert =
                               std::get_if<AlertPayload>(&datum->content.payload)) {
                    avoid.emplace_back(alert->cell, cycle);
                    urgent = true;
                }
            }
            std::erase_if(avoid, [&](const auto& entry) { return cycle > entry.second + 3; });
            if (world.robot != goal) {
                std::set<Cell> avoid_cells;
                for (const auto& [cell, at] : avoid) avoid_cells.insert(cell);
                PlanPayload plan = plan_route(world, world.robot, goal, avoid_cells);
                produced = Datum{Content(plan, slot_id, cycle),
                                 urgent ? params.plan_urgent : params.plan_base};
                urgent = false;
            }
        } else if (slot == "motor") {
            if (datum && std::holds_alternative<PlanPayload>(datum->content.payload)) {
                const auto& plan = std::get<PlanPayload>(datum->content.payload);
                if (const auto index = locate_on_route(plan, world.robot)) {
                    adopted = plan;
                    next_move = *index;
                }
            }
        }

        json proposals = json::array();
        if (produced) {
            proposals.push_back(json{{"key", key_hex(produced->content.key)},
                                     {"payload", payload_to_json(produced->content.payload)},
                                     {"source", slot},
                                     {"proposer", slot},
                                     {"salience", produced->salience}});
        }
        push(Phase::Collect, cycle,
             json{{"cycle", cycle},
                  {"phase", phase_name(Phase::Collect)},
                  {"polled", json::array({slot})},
                  {"faulted", json::array()},
                  {"proposals", std::move(proposals)}});
        datum = std::move(produced);

        std::optional<Move> move;
        if (adopted && next_move < adopted->moves.size()) {
            move = adopted->moves[next_move++];
            if (next_move >= adopted->moves.size()) adopted.reset();
        }
        json delta = apply_world_step(world, move, goal);
        push(Phase::Apply, cycle,
             json{{"cycle", cycle}, {"phase", phase_name(Phase::Apply)}, {"delta", delta}});

        cycles = cycle + 1;
        if (scenario.stop.on_goal && world.robot == goal) {
            reason = StopReason::PredicateSatisfied;
            break;
        }
    }
    if (reason == StopReason::MaxCycles && scenario.stop.on_goal) {
        reason = StopReason::BudgetExhausted;
    }

    RunOutput out;
    out.header = TraceHeader{pipeline_engine_label(order), scenario.name,
                             options.policy.empty() ? scenario.policy : options.policy,
                             options.seed, options.history_bound};
    out.events = std::move(trace);
    out.stop = reason;
    out.cycles = cycles;
    out.final_world = world;
    return out;
}

}  // namespace gwr
