#include "gwr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

namespace gwr {

const char* stop_reason_name(StopReason reason) {
    switch (reason) {
        case StopReason::MaxCycles: return "max cycles";
        case StopReason::BudgetExhausted: return "budget exhausted";
        case StopReason::PredicateSatisfied: return "predicate satisfied";
        case StopReason::ContentSeen: return "content seen";
    }
    return "unknown";
}

Engine::Engine(EngineConfig config) : config_(std::move(config)) {
    state_.history_bound = config_.history_bound;
}

ModuleId Engine::register_module(std::unique_ptr<SpecialistModule> module,
                                 std::uint32_t priority) {
    if (started_) throw std::invalid_argument("register_module: engine already started");
    if (!module) throw std::invalid_argument("register_module: null module");
    const std::string name = module->name();
    if (name.empty()) throw std::invalid_argument("register_module: empty module name");
    if (name == external_id().name || priority == kExternalPriority) {
        throw std::invalid_argument("register_module: '" + name +
                                    "' collides with the reserved external input identity");
    }
    for (const Slot& slot : modules_) {
        if (slot.id.name == name) {
            throw std::invalid_argument("register_module: duplicate module name '" + name + "'");
        }
        if (slot.id.priority == priority) {
            throw std::invalid_argument("register_module: duplicate priority " +
                                        std::to_string(priority) + " for '" + name + "'");
        }
    }
    ModuleId id{name, priority};
    module->id_ = id;
    module->seed(derive_seed(config_.seed, name));
    Slot slot{id, std::move(module)};
    auto at = std::upper_bound(modules_.begin(), modules_.end(), priority,
                               [](std::uint32_t p, const Slot& s) { return p < s.id.priority; });
    modules_.insert(at, std::move(slot));
    return id;
}

SpecialistModule* Engine::find_module(const std::string& name) {
    for (Slot& slot : modules_) {
        if (slot.id.name == name) return slot.module.get();
    }
    return nullptr;
}

void Engine::set_apply_hook(std::function<json(const Content*, CycleIndex)> hook) {
    apply_hook_ = std::move(hook);
}

void Engine::set_cycle_hook(std::function<void(const Content*, const json&, CycleIndex)> hook) {
    cycle_hook_ = std::move(hook);
}

InjectAck Engine::inject_event(ExternalEvent event) {
    if (!std::isfinite(event.arrival)) {
        throw std::invalid_argument("inject_event: arrival must be finite");
    }
    if (config_.inject_queue_limit && queue_.size() >= *config_.inject_queue_limit) {
        return InjectAck{false, 0};
    }
    const double up = std::ceil(std::max(0.0, event.arrival));
    QueuedEvent queued;
    queued.payload = std::move(event.payload);
    queued.key = content_key(queued.payload);
    queued.salience = event.salience;
    queued.arrival = event.arrival;
    queued.effective = std::max(static_cast<CycleIndex>(up), state_.cycle);
    const InjectAck ack{true, queued.effective};
    queue_.push_back(std::move(queued));
    return ack;
}

std::vector<Engine::QueuedEvent> Engine::take_due(CycleIndex cycle) {
    std::vector<QueuedEvent> due;
    auto keep = queue_.begin();
    for (auto it = queue_.begin(); it != queue_.end(); ++it) {
        if (it->effective <= cycle) {
            due.push_back(std::move(*it));
        } else {
            if (keep != it) *keep = std::move(*it);
            ++keep;
        }
    }
    queue_.erase(keep, queue_.end());
    std::stable_sort(due.begin(), due.end(), [](const QueuedEvent& a, const QueuedEvent& b) {
        if (a.salience.value() != b.salience.value()) {
            return a.salience.value() > b.salience.value();
        }
        return a.key < b.key;
    });
    return due;
}

void Engine::push_event(Phase phase, CycleIndex cycle, json line) {
    trace_.push_back(TraceEvent{cycle, phase, std::move(line)});
}

std::vector<Proposal> Engine::collect(CycleIndex cycle, std::vector<std::string>& faulted_names) {
    std::vector<std::vector<Proposal>> results(modules_.size());
    std::vector<bool> faulted(modules_.size(), false);

    auto poll = [&](std::size_t i) {
        StepBudget budget(config_.step_budget);
        try {
            results[i] = modules_[i].module->propose(state_, budget);
        } catch (const BudgetExceeded&) {
            results[i].clear();
            faulted[i] = true;
        }
    };

    if (config_.parallel_collect) {
        std::vector<std::future<void>> tasks;
        tasks.reserve(modules_.size());
        for (std::size_t i = 0; i < modules_.size(); ++i) {
            tasks.push_back(std::async(std::launch::async, poll, i));
        }
        for (auto& task : tasks) task.get();
    } else {
        for (std::size_t i = 0; i < modules_.size(); ++i) poll(i);
    }

    std::vector<Proposal> merged;
    for (std::size_t i = 0; i < modules_.size(); ++i) {
        if (faulted[i]) {
            faulted_.insert(modules_[i].id.name);
            faulted_names.push_back(modules_[i].id.name);
            continue;
        }
        for (Proposal& p : results[i]) {
            p.proposer = modules_[i].id;
            merged.push_back(std::move(p));
        }
    }
    (void)cycle;
    return merged;
}

CycleOutcome Engine::run_cycle() {
    if (state_.cycle >= config_.max_cycles) {
        throw std::logic_error("run_cycle: max_cycles exhausted");
    }
    started_ = true;
    faulted_.clear();
    const CycleIndex cycle = state_.cycle;

    // Inject: queued events whose effective cycle has arrived become
    // external proposals, one trace line each in canonical order.
    std::vector<Proposal> proposals;
    for (QueuedEvent& ev : take_due(cycle)) {
        Content content(std::move(ev.payload), external_id(), cycle);
        json line{{"cycle", cycle},
                  {"phase", phase_name(Phase::Inject)},
                  {"key", key_hex(content.key)},
                  {"payload", payload_to_json(content.payload)},
                  {"salience", ev.salience.value()},
                  {"arrival", ev.arrival}};
        push_event(Phase::Inject, cycle, std::move(line));
        proposals.push_back(Proposal{std::move(content), ev.salience, external_id()});
    }

    // Collect: poll every module (serially or concurrently), then apply
    // the canonical order so scheduling never shows in the trace.
    std::vector<std::string> faulted_names;
    for (Proposal& p : collect(cycle, faulted_names)) proposals.push_back(std::move(p));
    proposals = canonical_order(std::move(proposals));

    json polled = json::array();
    for (const Slot& slot : modules_) polled.push_back(slot.id.name);
    json proposal_lines = json::array();
    for (const Proposal& p : proposals) {
        proposal_lines.push_back(json{{"key", key_hex(p.content.key)},
                                      {"payload", payload_to_json(p.content.payload)},
                                      {"source", p.content.source.name},
                                      {"proposer", p.proposer.name},
                                      {"salience", p.salience.value()}});
    }
    push_event(Phase::Collect, cycle,
               json{{"cycle", cycle},
                    {"phase", phase_name(Phase::Collect)},
                    {"polled", polled},
                    {"faulted", faulted_names},
                    {"proposals", std::move(proposal_lines)}});

    // Select: at most one winner.
    SelectionOutcome outcome = select(config_.policy, proposals, state_);
    json scoreboard = json::array();
    for (const auto& [key, sc] : outcome.scoreboard) {
        json entry{{"key", key_hex(key)}};
        if (std::isinf(sc) && sc < 0.0) {
            entry["score"] = nullptr;
        } else {
            entry["score"] = sc;
        }
        scoreboard.push_back(std::move(entry));
    }
    json select_line{{"cycle", cycle}, {"phase", phase_name(Phase::Select)}};
    select_line["winner"] =
        outcome.winner ? json(key_hex(outcome.winner->content.key)) : json(nullptr);
    select_line["scoreboard"] = std::move(scoreboard);
    push_event(Phase::Select, cycle, std::move(select_line));

    // Broadcast: the winner reaches every module, proposer included, in
    // priority order. Chunk winners deliver their interior contents in
    // recorded order within this one cycle.
    CycleOutcome result;
    if (outcome.winner) {
        const Content& winner = outcome.winner->content;
        std::vector<const Content*> deliveries;
        json collapsed = json::array();
        if (const ChunkRecallPayload* chunk = as_chunk(winner)) {
            for (const Content& c : chunk->interior) {
                deliveries.push_back(&c);
                collapsed.push_back(key_hex(c.key));
            }
        } else {
            deliveries.push_back(&winner);
        }

        std::vector<StepBudget> budgets(modules_.size(), StepBudget(config_.step_budget));
        for (const Content* content : deliveries) {
            for (std::size_t i = 0; i < modules_.size(); ++i) {
                if (faulted_.count(modules_[i].id.name)) continue;
                try {
                    modules_[i].module->receive_broadcast(*content, cycle, budgets[i]);
                } catch (const BudgetExceeded&) {
                    faulted_.insert(modules_[i].id.name);
                }
            }
        }
        json receivers = json::array();
        for (const Slot& slot : modules_) {
            if (!faulted_.count(slot.id.name)) receivers.push_back(slot.id.name);
        }
        push_event(Phase::Broadcast, cycle,
                   json{{"cycle", cycle},
                        {"phase", phase_name(Phase::Broadcast)},
                        {"key", key_hex(winner.key)},
                        {"payload", payload_to_json(winner.payload)},
                        {"source", winner.source.name},
                        {"salience", outcome.winner->salience.value()},
                        {"receivers", std::move(receivers)},
                        {"collapsed", collapsed}});

        state_.conscious = winner;
        for (const Content* content : deliveries) {
            state_.remember(content->key);
            result.broadcast_keys.push_back(content->key);
        }
        result.winner = winner;
    }

    // Apply: commit world effects and record the delta.
    const Content* winner_ptr = result.winner ? &*result.winner : nullptr;
    json delta = apply_hook_ ? apply_hook_(winner_ptr, cycle) : json::object();
    push_event(Phase::Apply, cycle,
               json{{"cycle", cycle}, {"phase", phase_name(Phase::Apply)}, {"delta", delta}});
    if (cycle_hook_) cycle_hook_(winner_ptr, delta, cycle);

    state_.cycle = cycle + 1;
    result.apply_delta = std::move(delta);
    return result;
}

RunResult Engine::run_until(const StopCondition& stop) {
    if (stop.predicate && stop.predicate(state_)) {
        return RunResult{StopReason::PredicateSatisfied};
    }
    std::uint64_t limit = config_.max_cycles;
    if (stop.max_cycles) limit = std::min(limit, *stop.max_cycles);
    while (state_.cycle < limit) {
        CycleOutcome outcome = run_cycle();
        if (stop.content) {
            for (ContentKey key : outcome.broadcast_keys) {
                if (key == *stop.content) return RunResult{StopReason::ContentSeen};
            }
        }
        if (stop.predicate && stop.predicate(state_)) {
            return RunResult{StopReason::PredicateSatisfied};
        }
    }
    const bool open_ended = static_cast<bool>(stop.predicate) || stop.content.has_value();
    return RunResult{open_ended ? StopReason::BudgetExhausted : StopReason::MaxCycles};
}

}  // namespace gwr
