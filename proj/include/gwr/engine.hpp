#pragma once
// The Selection-Broadcast Cycle engine. Each cycle: inject external
// events, collect proposals from every registered module, select at
// most one winner, broadcast it to all modules, apply world effects.

#include <functional>
#include <memory>
#include <set>
#include <span>

#include "gwr/policy.hpp"
#include "gwr/trace.hpp"
#include "gwr/workspace.hpp"

namespace gwr {

struct BudgetExceeded {};

// Cooperative step budget: modules charge for work as they go; the
// engine faults a module for the cycle when its budget runs out.
// Wall-clock budgets would break byte-determinism.
class StepBudget {
  public:
    explicit StepBudget(std::uint64_t limit) : limit_(limit) {}

    void charge(std::uint64_t steps = 1) {
        used_ += steps;
        if (used_ > limit_) throw BudgetExceeded{};
    }

    std::uint64_t used() const { return used_; }

  private:
    std::uint64_t limit_;
    std::uint64_t used_ = 0;
};

// A parallel specialized module. Implementations must be deterministic
// given internal state, inputs, and their registration seed; the engine
// owns each module and touches it from one task at a time.
class SpecialistModule {
  public:
    virtual ~SpecialistModule() = default;

    virtual std::string name() const = 0;
    virtual void seed(std::uint64_t) {}
    virtual std::vector<Proposal> propose(const WorkspaceState& state, StepBudget& budget) = 0;
    virtual void receive_broadcast(const Content& content, CycleIndex cycle,
                                   StepBudget& budget) = 0;

    const ModuleId& id() const { return id_; }

  protected:
    Proposal make_proposal(Payload payload, double salience, CycleIndex cycle) const {
        Content content(std::move(payload), id_, cycle);
        return Proposal{std::move(content), Salience(salience), id_};
    }

  private:
    friend class Engine;
    ModuleId id_;
};

struct ExternalEvent {
    Payload payload;
    Salience salience;
    double arrival = 0.0;  // fractional arrivals round up to the next cycle
};

struct InjectAck {
    bool accepted = true;
    CycleIndex effective_cycle = 0;
};

struct EngineConfig {
    PolicySpec policy = default_policy();
    std::size_t history_bound = 64;
    std::uint64_t step_budget = 1'000'000;
    std::uint64_t seed = 0;
    std::uint64_t max_cycles = 1000;
    bool parallel_collect = false;
    std::optional<std::size_t> inject_queue_limit;  // back-pressure, default off
};

struct CycleOutcome {
    std::optional<Content> winner;
    std::vector<ContentKey> broadcast_keys;  // interior keys for chunk winners
    json apply_delta;
};

enum class StopReason { MaxCycles, BudgetExhausted, PredicateSatisfied, ContentSeen };

const char* stop_reason_name(StopReason reason);

struct StopCondition {
    std::optional<std::uint64_t> max_cycles;
    std::function<bool(const WorkspaceState&)> predicate;
    std::optional<ContentKey> content;  // stop once this key is broadcast or collapsed
};

struct RunResult {
    StopReason reason = StopReason::MaxCycles;
};

class Engine {
  public:
    explicit Engine(EngineConfig config);

    // Rejects duplicate names, duplicate priorities, the reserved
    // external identity, and registration after the first cycle.
    ModuleId register_module(std::unique_ptr<SpecialistModule> module, std::uint32_t priority);

    InjectAck inject_event(ExternalEvent event);

    CycleOutcome run_cycle();
    RunResult run_until(const StopCondition& stop);

    const WorkspaceState& state() const { return state_; }
    const EngineConfig& config() const { return config_; }
    const std::vector<TraceEvent>& trace() const { return trace_; }
    std::size_t module_count() const { return modules_.size(); }
    SpecialistModule* find_module(const std::string& name);

    // World-effect commit point, run in the Apply phase; returns the
    // delta recorded in the trace. Absent hook means an empty delta.
    void set_apply_hook(std::function<json(const Content* winner, CycleIndex)> hook);
    // Runs after Apply with the cycle's winner and delta (harness glue,
    // e.g. chunk outcome feedback).
    void set_cycle_hook(std::function<void(const Content* winner, const json& delta,
                                           CycleIndex)> hook);

  private:
    struct Slot {
        ModuleId id;
        std::unique_ptr<SpecialistModule> module;
    };

    struct QueuedEvent {
        Payload payload;
        ContentKey key;
        Salience salience;
        double arrival = 0.0;
        CycleIndex effective = 0;
    };

    std::vector<QueuedEvent> take_due(CycleIndex cycle);
    std::vector<Proposal> collect(CycleIndex cycle, std::vector<std::string>& faulted_names);
    void push_event(Phase phase, CycleIndex cycle, json line);

    EngineConfig config_;
    WorkspaceState state_;
    std::vector<Slot> modules_;  // kept sorted by priority
    std::vector<QueuedEvent> queue_;
    std::set<std::string> faulted_;
    std::vector<TraceEvent> trace_;
    std::function<json(const Content*, CycleIndex)> apply_hook_;
    std::function<void(const Content*, const json&, CycleIndex)> cycle_hook_;
    bool started_ = false;
};

}  // namespace gwr
