// Unit tests for the workspace runtime. Expected values come from
// independent oracles implemented in this file (breadth-first search,
// brute-force argmax, hand-walked cycle simulations) rather than from
// the code under test.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "gwr/engine.hpp"
#include "gwr/grid.hpp"
#include "gwr/harness.hpp"
#include "gwr/memory.hpp"
#include "gwr/metrics.hpp"
#include "gwr/policy.hpp"
#include "gwr/scenario.hpp"
#include "gwr/trace.hpp"

using namespace gwr;

namespace {

Payload percept(const std::string& label) { return PerceptPayload{label, std::nullopt}; }

Content make_content(Payload payload, const std::string& module, std::uint32_t priority,
                     CycleIndex born = 0) {
    return Content(std::move(payload), ModuleId{module, priority}, born);
}

Proposal make_bid(Payload payload, double salience, const std::string& module,
                  std::uint32_t priority, CycleIndex born = 0) {
    Content content = make_content(std::move(payload), module, priority, born);
    ModuleId proposer = content.source;
    return Proposal{std::move(content), Salience(salience), proposer};
}

// Independent shortest-path oracle: plain breadth-first search.
std::optional<std::uint64_t> bfs_length(const GridWorld& world, Cell from, Cell goal,
                                        const std::set<Cell>& avoid = {}) {
    if (world.blocked(from)) return std::nullopt;
    if (from == goal) return 0;
    std::map<Cell, std::uint64_t> dist{{from, 0}};
    std::deque<Cell> queue{from};
    while (!queue.empty()) {
        const Cell cur = queue.front();
        queue.pop_front();
        for (Move m : {Move::North, Move::East, Move::South, Move::West}) {
            const Cell next = step(cur, m);
            if (world.blocked(next) || avoid.count(next) || dist.count(next)) continue;
            dist[next] = dist[cur] + 1;
            if (next == goal) return dist[next];
            queue.push_back(next);
        }
    }
    return std::nullopt;
}

// Independent scoring reimplementation for the argmax oracle.
double oracle_score(const PolicySpec& policy, const Proposal& p, const WorkspaceState& state) {
    const double s = p.salience.value();
    if (std::holds_alternative<MaxSaliencePolicy>(policy)) return s;
    if (const auto* t = std::get_if<ThresholdPolicy>(&policy)) {
        return s < t->theta ? -std::numeric_limits<double>::infinity() : s;
    }
    const auto& r = std::get<RecencyDecayPolicy>(policy);
    const auto repeats = std::count(state.history.begin(), state.history.end(), p.content.key);
    return s * std::pow(r.lambda, static_cast<double>(repeats));
}

std::optional<std::size_t> oracle_argmax(const PolicySpec& policy,
                                         const std::vector<Proposal>& ordered,
                                         const WorkspaceState& state) {
    std::optional<std::size_t> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        const double s = oracle_score(policy, ordered[i], state);
        if (std::isinf(s) && s < 0) continue;
        if (!best || s > best_score) {
            best = i;
            best_score = s;
        }
    }
    return best;
}

bool route_walks(const PlanPayload& plan, const GridWorld& world) {
    Cell cur = plan.origin;
    for (Move m : plan.moves) {
        cur = step(cur, m);
        if (world.blocked(cur)) return false;
    }
    return cur == plan.target;
}

// A module whose propose() and receive_broadcast() charge fixed costs;
// used to exercise budget faulting.
class CostlyModule : public SpecialistModule {
  public:
    CostlyModule(std::string name, std::uint64_t propose_cost, std::uint64_t receive_cost,
                 double salience = 0.5)
        : name_(std::move(name)),
          propose_cost_(propose_cost),
          receive_cost_(receive_cost),
          salience_(salience) {}

    std::string name() const override { return name_; }

    std::vector<Proposal> propose(const WorkspaceState& state, StepBudget& budget) override {
        budget.charge(propose_cost_);
        return {make_proposal(percept(name_ + "-" + std::to_string(state.cycle)), salience_,
                              state.cycle)};
    }

    void receive_broadcast(const Content&, CycleIndex, StepBudget& budget) override {
        budget.charge(receive_cost_);
        ++received_;
    }

    std::uint64_t received() const { return received_; }

  private:
    std::string name_;
    std::uint64_t propose_cost_;
    std::uint64_t receive_cost_;
    double salience_;
    std::uint64_t received_ = 0;
};

// Proposes a chunk wrapping the given contents, once.
class ChunkOnceModule : public SpecialistModule {
  public:
    ChunkOnceModule(std::string name, std::vector<Content> interior)
        : name_(std::move(name)), interior_(std::move(interior)) {}

    std::string name() const override { return name_; }

    std::vector<Proposal> propose(const WorkspaceState& state, StepBudget& budget) override {
        budget.charge();
        if (done_) return {};
        done_ = true;
        return {make_proposal(ChunkRecallPayload{interior_}, 0.9, state.cycle)};
    }

    void receive_broadcast(const Content&, CycleIndex, StepBudget& budget) override {
        budget.charge();
    }

  private:
    std::string name_;
    std::vector<Content> interior_;
    bool done_ = false;
};

ScriptedModuleSpec script_spec(std::string name, std::uint32_t priority,
                               std::vector<ScriptedProposal> script) {
    ScriptedModuleSpec spec;
    spec.name = std::move(name);
    spec.priority = priority;
    spec.script = std::move(script);
    return spec;
}

std::filesystem::path scenario_path(const std::string& file) {
    return std::filesystem::path(GWR_SCENARIO_DIR) / file;
}

std::vector<json> lines_of(const RunOutput& out, const std::string& phase) {
    std::vector<json> found;
    for (const TraceEvent& e : out.events) {
        if (e.line.at("phase") == phase) found.push_back(e.line);
    }
    return found;
}

MetricsReport metrics_of(const RunOutput& out) {
    return compute_metrics(parse_trace(trace_to_string(out.header, out.events)));
}

std::string winner_kind(const json& broadcast_line) {
    return broadcast_line.at("payload").at("kind").get<std::string>();
}

}  // namespace

// ---------------------------------------------------------------- core

TEST_CASE("content keys: corpus of distinct payloads has distinct keys") {
    std::vector<Payload> corpus;
    for (int i = 0; i < 40; ++i) corpus.push_back(percept("label-" + std::to_string(i)));
    for (int i = 0; i < 10; ++i) {
        corpus.push_back(PerceptPayload{"human", Cell{i, 2 * i}});
        corpus.push_back(GoalPayload{Cell{i, i + 1}});
        corpus.push_back(InstructionPayload{Cell{i + 1, i}});
        corpus.push_back(AlertPayload{"human-on-path", Cell{i, 9 - i}});
    }
    for (int i = 0; i < 10; ++i) {
        PlanPayload plan;
        plan.origin = Cell{0, i};
        plan.target = Cell{i, 0};
        for (int k = 0; k < i; ++k) plan.moves.push_back(Move::East);
        plan.reachable = i % 2 == 0;
        corpus.push_back(plan);
    }
    corpus.push_back(percept(""));
    corpus.push_back(PerceptPayload{"", Cell{0, 0}});

    std::set<std::uint64_t> keys;
    for (const Payload& p : corpus) keys.insert(content_key(p).value);
    CHECK(keys.size() == corpus.size());
}

TEST_CASE("content keys: stable across construction and hex round-trip") {
    const Payload p = PerceptPayload{"door", Cell{3, 4}};
    const ContentKey k1 = content_key(p);
    const ContentKey k2 = content_key(p);
    CHECK(k1 == k2);

    const std::string hex = key_hex(k1);
    CHECK(hex.size() == 16);
    CHECK(hex.find_first_not_of("0123456789abcdef") == std::string::npos);
    const auto back = key_from_hex(hex);
    REQUIRE(back.has_value());
    CHECK(*back == k1);

    CHECK_FALSE(key_from_hex("xyz").has_value());
    CHECK_FALSE(key_from_hex("0123").has_value());
}

TEST_CASE("content keys: 10^4 random distinct payloads are collision-free") {
    std::mt19937_64 rng(20260816);
    std::set<std::string> labels;
    while (labels.size() < 10000) {
        labels.insert("p" + std::to_string(rng()));
    }
    std::set<std::uint64_t> keys;
    for (const std::string& label : labels) keys.insert(content_key(percept(label)).value);
    CHECK(keys.size() == labels.size());
}

TEST_CASE("canonical order matches a brute-force comparator oracle") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> salience_step(0, 20);
    std::uniform_int_distribution<std::uint32_t> priority_of(1, 6);
    std::uniform_int_distribution<int> label_of(0, 9);

    for (int round = 0; round < 200; ++round) {
        std::vector<Proposal> list;
        const int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            list.push_back(make_bid(percept("p" + std::to_string(label_of(rng))),
                                    salience_step(rng) / 20.0, "m", priority_of(rng)));
        }

        std::vector<Proposal> expected = list;
        std::stable_sort(expected.begin(), expected.end(),
                         [](const Proposal& a, const Proposal& b) {
                             if (a.salience.value() != b.salience.value()) {
                                 return a.salience.value() > b.salience.value();
                             }
                             if (a.proposer.priority != b.proposer.priority) {
                                 return a.proposer.priority < b.proposer.priority;
                             }
                             return a.content.key < b.content.key;
                         });

        const std::vector<Proposal> got = canonical_order(list);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].content.key == expected[i].content.key);
            CHECK(got[i].salience == expected[i].salience);
        }

        // Idempotence and permutation invariance.
        const std::vector<Proposal> again = canonical_order(got);
        std::vector<Proposal> shuffled = list;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const std::vector<Proposal> from_shuffled = canonical_order(shuffled);
        REQUIRE(again.size() == got.size());
        REQUIRE(from_shuffled.size() == got.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(again[i].content.key == got[i].content.key);
            CHECK(from_shuffled[i].content.key == got[i].content.key);
        }
    }
}

TEST_CASE("salience rejects out-of-range and NaN values") {
    CHECK_THROWS_AS(Salience(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(Salience(1.1), std::invalid_argument);
    CHECK_THROWS_AS(Salience(std::nan("")), std::invalid_argument);
    CHECK(Salience(0.0).value() == 0.0);
    CHECK(Salience(1.0).value() == 1.0);
}

TEST_CASE("chunk contents enforce interior invariants") {
    CHECK_THROWS_AS(make_content(ChunkRecallPayload{}, "m", 1), std::invalid_argument);

    const Content inner = make_content(percept("a"), "m", 1);
    const Content wrapper = make_content(ChunkRecallPayload{{inner}}, "m", 1);
    CHECK_THROWS_AS(make_content(ChunkRecallPayload{{wrapper}}, "m", 1), std::invalid_argument);
}

TEST_CASE("moves serialize to NESW letters and back") {
    const std::vector<Move> moves{Move::North, Move::East, Move::South, Move::West};
    CHECK(moves_string(moves) == "NESW");
    CHECK(moves_from_string("NESW") == moves);
    CHECK_THROWS_AS(moves_from_string("NX"), std::invalid_argument);

    Cell c{5, 5};
    c = step(c, Move::North);
    CHECK(c == Cell{5, 4});
    c = step(c, Move::East);
    CHECK(c == Cell{6, 4});
    c = step(c, Move::South);
    CHECK(c == Cell{6, 5});
    c = step(c, Move::West);
    CHECK(c == Cell{5, 5});
}

TEST_CASE("derive_seed separates modules and masters") {
    CHECK(derive_seed(1, "vision") == derive_seed(1, "vision"));
    CHECK(derive_seed(1, "vision") != derive_seed(1, "motor"));
    CHECK(derive_seed(1, "vision") != derive_seed(2, "vision"));
}

TEST_CASE("content json round-trip re-validates the key") {
    const Content c = make_content(PerceptPayload{"human", Cell{2, 3}}, "vision", 2, 7);
    json j = content_to_json(c);
    const Content back = content_from_json(j);
    CHECK(back.key == c.key);
    CHECK(back.source.name == "vision");
    CHECK(back.born_cycle == 7);

    j["key"] = "0000000000000000";
    CHECK_THROWS_AS(content_from_json(j), std::invalid_argument);
}

// -------------------------------------------------------------- policy

TEST_CASE("recency decay: salience 0.8 with two repeats scores 0.2") {
    WorkspaceState state;
    const Proposal p = make_bid(percept("door"), 0.8, "m", 1);
    state.remember(p.content.key);
    state.remember(p.content.key);
    const double got = score(RecencyDecayPolicy{0.5}, p, state);
    CHECK(got == doctest::Approx(0.2));
}

TEST_CASE("threshold policy excludes with -infinity") {
    WorkspaceState state;
    const Proposal p = make_bid(percept("dim"), 0.3, "m", 1);
    const double got = score(ThresholdPolicy{0.5}, p, state);
    CHECK(std::isinf(got));
    CHECK(got < 0);
}

TEST_CASE("select matches a brute-force argmax oracle on 10^4 random lists") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> salience_step(0, 10);
    std::uniform_int_distribution<std::uint32_t> priority_of(1, 6);
    std::uniform_int_distribution<int> label_of(0, 7);
    std::uniform_int_distribution<int> policy_of(0, 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int round = 0; round < 10000; ++round) {
        PolicySpec policy;
        switch (policy_of(rng)) {
            case 0: policy = MaxSaliencePolicy{}; break;
            case 1: policy = ThresholdPolicy{unit(rng)}; break;
            default: policy = RecencyDecayPolicy{unit(rng)}; break;
        }

        WorkspaceState state;
        const int history_len = static_cast<int>(rng() % 6);
        for (int i = 0; i < history_len; ++i) {
            state.remember(content_key(percept("p" + std::to_string(label_of(rng)))));
        }

        std::vector<Proposal> list;
        const int n = static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) {
            list.push_back(make_bid(percept("p" + std::to_string(label_of(rng))),
                                    salience_step(rng) / 10.0, "m", priority_of(rng)));
        }
        const std::vector<Proposal> ordered = canonical_order(list);

        const SelectionOutcome got = select(policy, ordered, state);
        const auto want = oracle_argmax(policy, ordered, state);

        REQUIRE(got.scoreboard.size() == ordered.size());
        if (!want) {
            CHECK_FALSE(got.winner.has_value());
        } else {
            REQUIRE(got.winner.has_value());
            CHECK(got.winner->content.key == ordered[*want].content.key);
        }
    }
}

TEST_CASE("selection is invariant under proposal permutation") {
    std::mt19937_64 rng(5);
    WorkspaceState state;
    std::vector<Proposal> list;
    for (int i = 0; i < 8; ++i) {
        list.push_back(make_bid(percept("p" + std::to_string(i % 4)), (i % 5) / 4.0, "m",
                                1 + static_cast<std::uint32_t>(i % 3)));
    }
    const SelectionOutcome base = select(default_policy(), canonical_order(list), state);
    for (int round = 0; round < 20; ++round) {
        std::shuffle(list.begin(), list.end(), rng);
        const SelectionOutcome got = select(default_policy(), canonical_order(list), state);
        REQUIRE(got.winner.has_value() == base.winner.has_value());
        if (base.winner) CHECK(got.winner->content.key == base.winner->content.key);
    }
}

TEST_CASE("max-salience winner is invariant under uniform downscaling") {
    WorkspaceState state;
    std::vector<Proposal> list;
    for (int i = 0; i < 6; ++i) {
        list.push_back(make_bid(percept("p" + std::to_string(i)), (i + 2) / 10.0, "m", 1));
    }
    const SelectionOutcome base = select(MaxSaliencePolicy{}, canonical_order(list), state);

    std::vector<Proposal> scaled;
    for (const Proposal& p : list) {
        scaled.push_back(make_bid(p.content.payload, p.salience.value() * 0.5, "m", 1));
    }
    const SelectionOutcome got = select(MaxSaliencePolicy{}, canonical_order(scaled), state);
    REQUIRE(base.winner.has_value());
    REQUIRE(got.winner.has_value());
    CHECK(got.winner->content.key == base.winner->content.key);
}

TEST_CASE("threshold winners shrink monotonically as theta rises") {
    std::mt19937_64 rng(17);
    WorkspaceState state;
    for (int round = 0; round < 100; ++round) {
        std::vector<Proposal> list;
        const int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
            list.push_back(
                make_bid(percept("p" + std::to_string(i)), (rng() % 11) / 10.0, "m", 1));
        }
        const std::vector<Proposal> ordered = canonical_order(list);
        bool seen_empty = false;
        for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const SelectionOutcome got = select(ThresholdPolicy{theta}, ordered, state);
            if (got.winner) {
                CHECK_FALSE(seen_empty);
                CHECK(got.winner->salience.value() >= theta);
            } else {
                seen_empty = true;
            }
        }
    }
}

TEST_CASE("policy strings parse and round-trip") {
    CHECK(policy_string(parse_policy("max")) == "max");
    CHECK(policy_string(parse_policy("threshold:0.25")) == "threshold:0.25");
    CHECK(policy_string(parse_policy("recency:0.5")) == "recency:0.5");
    CHECK(policy_string(default_policy()) == "recency:0.5");
    CHECK_THROWS_AS(parse_policy("bogus"), std::invalid_argument);
    CHECK_THROWS_AS(parse_policy("threshold:2"), std::invalid_argument);
    CHECK_THROWS_AS(parse_policy("recency:-1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_policy("recency:abc"), std::invalid_argument);
}

// -------------------------------------------------------------- engine

TEST_CASE("module registration rejects bad identities") {
    Engine engine{EngineConfig{}};
    CHECK_THROWS_AS(engine.register_module(nullptr, 1), std::invalid_argument);
    CHECK_THROWS_AS(engine.register_module(std::make_unique<CostlyModule>("", 1, 1), 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(engine.register_module(std::make_unique<CostlyModule>("external", 1, 1), 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(engine.register_module(std::make_unique<CostlyModule>("a", 1, 1), 0),
                    std::invalid_argument);

    engine.register_module(std::make_unique<CostlyModule>("a", 1, 1), 2);
    CHECK_THROWS_AS(engine.register_module(std::make_unique<CostlyModule>("a", 1, 1), 3),
                    std::invalid_argument);
    CHECK_THROWS_AS(engine.register_module(std::make_unique<CostlyModule>("b", 1, 1), 2),
                    std::invalid_argument);

    engine.run_cycle();
    CHECK_THROWS_AS(engine.register_module(std::make_unique<CostlyModule>("late", 1, 1), 4),
                    std::logic_error);
}

TEST_CASE("empty engine selects no winner and stops on max cycles") {
    Engine engine{EngineConfig{}};
    const CycleOutcome outcome = engine.run_cycle();
    CHECK_FALSE(outcome.winner.has_value());
    CHECK(outcome.broadcast_keys.empty());

    const std::vector<TraceEvent>& trace = engine.trace();
    bool saw_null_select = false;
    for (const TraceEvent& e : trace) {
        if (e.phase == Phase::Select) {
            CHECK(e.line.at("winner").is_null());
            saw_null_select = true;
        }
        CHECK(e.phase != Phase::Broadcast);
    }
    CHECK(saw_null_select);

    StopCondition stop;
    stop.max_cycles = 3;
    const RunResult result = engine.run_until(stop);
    CHECK(result.reason == StopReason::MaxCycles);
    CHECK(engine.state().cycle == 3);
}

TEST_CASE("injection: fractional arrivals round up, negatives clamp, NaN throws") {
    Engine engine{EngineConfig{}};
    const InjectAck a = engine.inject_event({percept("a"), Salience(0.5), 2.7});
    CHECK(a.accepted);
    CHECK(a.effective_cycle == 3);

    const InjectAck b = engine.inject_event({percept("b"), Salience(0.5), -4.0});
    CHECK(b.effective_cycle == 0);

    CHECK_THROWS_AS(engine.inject_event({percept("c"), Salience(0.5), std::nan("")}),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        engine.inject_event({percept("d"), Salience(0.5),
                             std::numeric_limits<double>::infinity()}),
        std::invalid_argument);
}

TEST_CASE("deferred events keep their payload intact while queued") {
    EngineConfig config;
    config.policy = MaxSaliencePolicy{};
    Engine engine{config};
    const Payload payload = percept("deferred-label");
    engine.inject_event({payload, Salience(0.9), 2.0});

    CHECK_FALSE(engine.run_cycle().winner.has_value());
    CHECK_FALSE(engine.run_cycle().winner.has_value());
    const CycleOutcome due = engine.run_cycle();
    REQUIRE(due.winner.has_value());
    CHECK(due.winner->key == content_key(payload));
    CHECK(std::get<PerceptPayload>(due.winner->payload).label == "deferred-label");
}

TEST_CASE("injection after cycles have run lands on the current cycle at earliest") {
    Engine engine{EngineConfig{}};
    engine.run_cycle();
    engine.run_cycle();
    const InjectAck ack = engine.inject_event({percept("late"), Salience(0.5), 0.0});
    CHECK(ack.effective_cycle == 2);
}

TEST_CASE("inject queue limit applies back-pressure") {
    EngineConfig config;
    config.inject_queue_limit = 1;
    Engine engine{config};
    CHECK(engine.inject_event({percept("a"), Salience(0.5), 0.0}).accepted);
    CHECK_FALSE(engine.inject_event({percept("b"), Salience(0.5), 0.0}).accepted);
}

TEST_CASE("equal-salience external ties resolve by key in either injection order") {
    const Payload pa = percept("tie-a");
    const Payload pb = percept("tie-b");
    const ContentKey expected = std::min(content_key(pa), content_key(pb));

    for (bool swap : {false, true}) {
        EngineConfig config;
        config.policy = MaxSaliencePolicy{};
        Engine engine{config};
        engine.inject_event({swap ? pb : pa, Salience(0.9), 0.0});
        engine.inject_event({swap ? pa : pb, Salience(0.9), 0.0});
        const CycleOutcome outcome = engine.run_cycle();
        REQUIRE(outcome.winner.has_value());
        CHECK(outcome.winner->key == expected);
        CHECK(outcome.winner->source.name == "external");
        CHECK(outcome.winner->source.priority == kExternalPriority);
    }
}

TEST_CASE("losing injected events are not retried on later cycles") {
    EngineConfig config;
    config.policy = MaxSaliencePolicy{};
    Engine engine{config};
    engine.inject_event({percept("strong"), Salience(0.9), 0.0});
    engine.inject_event({percept("weak"), Salience(0.4), 0.0});

    const CycleOutcome first = engine.run_cycle();
    REQUIRE(first.winner.has_value());
    CHECK(first.winner->key == content_key(percept("strong")));

    const CycleOutcome second = engine.run_cycle();
    CHECK_FALSE(second.winner.has_value());
}

TEST_CASE("chunk winners collapse their interior within one cycle") {
    const Content a = make_content(percept("step-a"), "provider", 1);
    const Content b = make_content(percept("step-b"), "provider", 1, 1);

    EngineConfig config;
    config.policy = MaxSaliencePolicy{};
    Engine engine{config};
    engine.register_module(std::make_unique<ChunkOnceModule>("provider", std::vector{a, b}), 1);
    auto listener = std::make_unique<CostlyModule>("listener", 1, 1, 0.1);
    CostlyModule* listener_ptr = listener.get();
    engine.register_module(std::move(listener), 2);

    const CycleOutcome outcome = engine.run_cycle();
    REQUIRE(outcome.winner.has_value());
    CHECK(as_chunk(*outcome.winner) != nullptr);
    REQUIRE(outcome.broadcast_keys.size() == 2);
    CHECK(outcome.broadcast_keys[0] == a.key);
    CHECK(outcome.broadcast_keys[1] == b.key);

    // Both interior contents reached every module during the same cycle.
    CHECK(listener_ptr->received() == 2);

    // History remembers the interior keys, in order.
    REQUIRE(engine.state().history.size() == 2);
    CHECK(engine.state().history[0] == a.key);
    CHECK(engine.state().history[1] == b.key);

    const std::vector<TraceEvent>& trace = engine.trace();
    const auto broadcast = std::find_if(trace.begin(), trace.end(), [](const TraceEvent& e) {
        return e.phase == Phase::Broadcast;
    });
    REQUIRE(broadcast != trace.end());
    const json& collapsed = broadcast->line.at("collapsed");
    REQUIRE(collapsed.size() == 2);
    CHECK(collapsed[0] == key_hex(a.key));
    CHECK(collapsed[1] == key_hex(b.key));
}

TEST_CASE("budget overruns fault the module for the cycle only") {
    EngineConfig config;
    config.step_budget = 5;
    config.policy = MaxSaliencePolicy{};
    Engine engine{config};
    engine.register_module(std::make_unique<CostlyModule>("greedy", 10, 1, 0.9), 1);
    engine.register_module(std::make_unique<CostlyModule>("frugal", 1, 1, 0.5), 2);

    const CycleOutcome outcome = engine.run_cycle();
    REQUIRE(outcome.winner.has_value());
    CHECK(outcome.winner->source.name == "frugal");

    const std::vector<TraceEvent>& trace = engine.trace();
    const auto collect = std::find_if(trace.begin(), trace.end(), [](const TraceEvent& e) {
        return e.phase == Phase::Collect;
    });
    REQUIRE(collect != trace.end());
    CHECK(collect->line.at("faulted") == json::array({"greedy"}));
    CHECK(collect->line.at("polled") == json::array({"greedy", "frugal"}));
}

TEST_CASE("budget overruns during broadcast drop the receiver from the acknowledgment list") {
    EngineConfig config;
    config.step_budget = 5;
    config.policy = MaxSaliencePolicy{};
    Engine engine{config};
    engine.register_module(std::make_unique<CostlyModule>("speaker", 1, 1, 0.9), 1);
    engine.register_module(std::make_unique<CostlyModule>("deaf", 1, 10, 0.1), 2);

    engine.run_cycle();
    const std::vector<TraceEvent>& trace = engine.trace();
    const auto broadcast = std::find_if(trace.begin(), trace.end(), [](const TraceEvent& e) {
        return e.phase == Phase::Broadcast;
    });
    REQUIRE(broadcast != trace.end());
    CHECK(broadcast->line.at("receivers") == json::array({"speaker"}));
}

TEST_CASE("broadcast reaches every module including the proposer, in priority order") {
    EngineConfig config;
    config.policy = MaxSaliencePolicy{};
    Engine engine{config};
    engine.register_module(std::make_unique<CostlyModule>("low", 1, 1, 0.2), 5);
    engine.register_module(std::make_unique<CostlyModule>("high", 1, 1, 0.9), 1);
    engine.register_module(std::make_unique<CostlyModule>("mid", 1, 1, 0.5), 3);

    engine.run_cycle();
    const std::vector<TraceEvent>& trace = engine.trace();
    const auto broadcast = std::find_if(trace.begin(), trace.end(), [](const TraceEvent& e) {
        return e.phase == Phase::Broadcast;
    });
    REQUIRE(broadcast != trace.end());
    CHECK(broadcast->line.at("receivers") == json::array({"high", "mid", "low"}));
}

TEST_CASE("run_until honors an immediately satisfied predicate") {
    Engine engine{EngineConfig{}};
    StopCondition stop;
    stop.predicate = [](const WorkspaceState&) { return true; };
    const RunResult result = engine.run_until(stop);
    CHECK(result.reason == StopReason::PredicateSatisfied);
    CHECK(engine.state().cycle == 0);
    CHECK(engine.trace().empty());
}

TEST_CASE("run_until stops once a watched content key is broadcast") {
    EngineConfig config;
    config.policy = MaxSaliencePolicy{};
    Engine engine{config};
    engine.register_module(
        std::make_unique<ScriptedModule>(script_spec(
            "m", 1,
            {{0, percept("first"), 0.5}, {1, percept("second"), 0.5}, {2, percept("third"), 0.5}})),
        1);
    StopCondition stop;
    stop.max_cycles = 10;
    stop.content = content_key(percept("second"));
    const RunResult result = engine.run_until(stop);
    CHECK(result.reason == StopReason::ContentSeen);
    CHECK(engine.state().cycle == 2);
}

TEST_CASE("engine refuses to run past its configured cycle limit") {
    EngineConfig config;
    config.max_cycles = 2;
    Engine engine{config};
    engine.run_cycle();
    engine.run_cycle();
    CHECK_THROWS_AS(engine.run_cycle(), std::logic_error);
}

TEST_CASE("serial and parallel collection produce byte-identical traces") {
    auto build = [](bool parallel) {
        EngineConfig config;
        config.parallel_collect = parallel;
        Engine engine{config};
        for (std::uint32_t m = 1; m <= 4; ++m) {
            std::vector<ScriptedProposal> script;
            for (CycleIndex c = 0; c < 6; ++c) {
                script.push_back({c, percept("m" + std::to_string(m) + "-" + std::to_string(c)),
                                  0.1 * m + 0.01 * c});
            }
            engine.register_module(
                std::make_unique<ScriptedModule>(
                    script_spec("m" + std::to_string(m), m, std::move(script))),
                m);
        }
        StopCondition stop;
        stop.max_cycles = 6;
        engine.run_until(stop);
        TraceHeader header{"gwt", "parallel-check", "recency:0.5", 0, 64};
        return trace_to_string(header, engine.trace());
    };
    CHECK(build(false) == build(true));
}

// -------------------------------------------------------------- memory

TEST_CASE("observe indexes every suffix up to the configured order") {
    EpisodeStore store;
    const Content a = make_content(percept("A"), "m", 1, 0);
    const Content b = make_content(percept("B"), "m", 1, 1);
    const Content c = make_content(percept("C"), "m", 1, 2);
    store.observe(a, 0);
    store.observe(b, 1);
    store.observe(c, 2);

    const auto* ab = store.continuation({a.key}, b.key);
    REQUIRE(ab != nullptr);
    CHECK(ab->count == 1);
    CHECK(ab->confidence == doctest::Approx(1.0));

    const auto* bc = store.continuation({b.key}, c.key);
    REQUIRE(bc != nullptr);
    CHECK(bc->count == 1);

    const auto* abc = store.continuation({a.key, b.key}, c.key);
    REQUIRE(abc != nullptr);
    CHECK(abc->count == 1);

    CHECK(store.continuation({c.key}, a.key) == nullptr);
    CHECK(store.log().size() == 3);
}

TEST_CASE("repeated transitions accumulate counts") {
    EpisodeStore store;
    const Content a = make_content(percept("A"), "m", 1);
    const Content b = make_content(percept("B"), "m", 1);
    store.observe(a, 0);
    store.observe(b, 1);
    store.observe(a, 2);
    store.observe(b, 3);

    const auto* ab = store.continuation({a.key}, b.key);
    REQUIRE(ab != nullptr);
    CHECK(ab->count == 2);
    CHECK(ab->confidence == doctest::Approx(1.0));
}

TEST_CASE("ambiguous continuations split confidence by frequency") {
    EpisodeStore store;
    const Content a = make_content(percept("A"), "m", 1);
    const Content b = make_content(percept("B"), "m", 1);
    const Content c = make_content(percept("C"), "m", 1);
    for (const Content* next : {&b, &b, &c}) {
        store.observe(a, 0);
        store.observe(*next, 1);
    }

    const auto* ab = store.continuation({a.key}, b.key);
    const auto* ac = store.continuation({a.key}, c.key);
    REQUIRE(ab != nullptr);
    REQUIRE(ac != nullptr);
    CHECK(ab->confidence == doctest::Approx(2.0 / 3.0));
    CHECK(ac->confidence == doctest::Approx(1.0 / 3.0));
    CHECK(ab->count == 2);
    CHECK(ac->count == 1);
}

TEST_CASE("reinforce confirms and contradicts stored steps") {
    EpisodeStore store;
    const Content a = make_content(percept("A"), "m", 1);
    const Content b = make_content(percept("B"), "m", 1);
    const Content c = make_content(percept("C"), "m", 1);
    // Four A->B transitions and one A->C: confidence 0.8 vs 0.2.
    for (int i = 0; i < 4; ++i) {
        store.observe(a, 0);
        store.observe(b, 1);
    }
    store.observe(a, 8);
    store.observe(c, 9);

    const std::vector<std::pair<std::vector<ContentKey>, ContentKey>> ab_step{{{a.key}, b.key}};
    CHECK(store.continuation({a.key}, b.key)->confidence == doctest::Approx(0.8));

    store.reinforce(ab_step, false);
    CHECK(store.continuation({a.key}, b.key)->confidence == doctest::Approx(0.4));

    store.reinforce(ab_step, true);
    CHECK(store.continuation({a.key}, b.key)->confidence == doctest::Approx(0.5));

    store.reinforce(ab_step, true);
    store.reinforce(ab_step, true);
    store.reinforce(ab_step, true);
    store.reinforce(ab_step, true);
    store.reinforce(ab_step, true);
    CHECK(store.continuation({a.key}, b.key)->confidence == doctest::Approx(1.0));

    // A later observation touching the same suffix recomputes confidence
    // from counts, washing the adjustments out.
    store.observe(a, 10);
    store.observe(b, 11);
    CHECK(store.continuation({a.key}, b.key)->confidence == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("recall chains the recorded continuation greedily") {
    MemoryConfig config;
    config.chunk_cap = 3;
    EpisodeStore store(config);
    std::vector<Content> run;
    for (int i = 1; i <= 5; ++i) {
        run.push_back(make_content(percept("k" + std::to_string(i)), "m", 1,
                                   static_cast<CycleIndex>(i - 1)));
    }
    for (std::size_t i = 0; i < run.size(); ++i) store.observe(run[i], i);
    store.observe(run[0], 5);

    std::vector<ContentKey> tail;
    for (std::size_t i = 3; i < 6; ++i) {
        tail.push_back(store.log()[i].key);
    }
    const auto recalled = store.recall(tail);
    REQUIRE(recalled.has_value());
    REQUIRE(recalled->interior.size() == 3);
    CHECK(recalled->interior[0].key == run[1].key);
    CHECK(recalled->interior[1].key == run[2].key);
    CHECK(recalled->interior[2].key == run[3].key);
    CHECK(recalled->confidence == doctest::Approx(1.0));
}

TEST_CASE("recall drops below-threshold continuations") {
    EpisodeStore store;
    const Content a = make_content(percept("A"), "m", 1);
    const Content b = make_content(percept("B"), "m", 1);
    store.observe(a, 0);
    store.observe(b, 1);
    const std::vector<std::pair<std::vector<ContentKey>, ContentKey>> ab_step{{{a.key}, b.key}};

    const std::vector<ContentKey> tail{a.key};
    CHECK(store.recall(tail).has_value());

    // Halve 1.0 down to 0.0625, under the 0.1 threshold.
    store.reinforce(ab_step, false);
    store.reinforce(ab_step, false);
    store.reinforce(ab_step, false);
    store.reinforce(ab_step, false);
    CHECK(store.continuation({a.key}, b.key)->confidence == doctest::Approx(0.0625));
    CHECK_FALSE(store.recall(tail).has_value());
}

TEST_CASE("recall threshold above one disables recall entirely") {
    MemoryConfig config;
    config.recall_threshold = 2.0;
    EpisodeStore store(config);
    const Content a = make_content(percept("A"), "m", 1);
    const Content b = make_content(percept("B"), "m", 1);
    for (int i = 0; i < 4; ++i) {
        store.observe(a, 2 * i);
        store.observe(b, 2 * i + 1);
    }
    CHECK_FALSE(store.recall(std::vector<ContentKey>{a.key}).has_value());
}

TEST_CASE("observing a chunk expands its interior in order") {
    EpisodeStore store;
    const Content a = make_content(percept("A"), "m", 1);
    const Content b = make_content(percept("B"), "m", 1);
    const Content wrapper = make_content(ChunkRecallPayload{{a, b}}, "memory", 6);
    store.observe(wrapper, 4);

    REQUIRE(store.log().size() == 2);
    CHECK(store.log()[0].key == a.key);
    CHECK(store.log()[1].key == b.key);
    CHECK(store.continuation({a.key}, b.key) != nullptr);
    CHECK(store.content(wrapper.key) == nullptr);
}

TEST_CASE("episode store snapshots round-trip through json and files") {
    MemoryConfig config;
    config.chunk_cap = 2;
    EpisodeStore store(config);
    std::vector<Content> run;
    for (int i = 0; i < 4; ++i) {
        run.push_back(make_content(percept("s" + std::to_string(i)), "m", 1,
                                   static_cast<CycleIndex>(i)));
        store.observe(run.back(), i);
    }

    const json snapshot = store.to_json();
    CHECK(snapshot.at("memory") == "gwr-memory.v1");
    const EpisodeStore back = EpisodeStore::from_json(snapshot);
    CHECK(back.to_json() == snapshot);
    CHECK(back.log().size() == store.log().size());
    CHECK(back.config().chunk_cap == 2);

    const auto path = std::filesystem::temp_directory_path() / "gwr-mem-roundtrip.json";
    store.save(path);
    const EpisodeStore loaded = EpisodeStore::load(path);
    CHECK(loaded.to_json() == snapshot);
    std::filesystem::remove(path);

    json bad = snapshot;
    bad["memory"] = "other";
    CHECK_THROWS(EpisodeStore::from_json(bad));
}

TEST_CASE("memory module warns on unknown chunk reinforcement") {
    EpisodicMemoryModule module;
    module.reinforce_chunk(ContentKey{42}, true);
    CHECK(module.warnings() == 1);
}

// ---------------------------------------------------------------- grid

TEST_CASE("plan_route: already at goal yields an empty reachable plan") {
    GridWorld world;
    world.width = 3;
    world.height = 3;
    world.robot = Cell{1, 1};
    world.goal = Cell{1, 1};
    const PlanPayload plan = plan_route(world, Cell{1, 1}, Cell{1, 1});
    CHECK(plan.reachable);
    CHECK(plan.moves.empty());
    CHECK(plan.origin == Cell{1, 1});
    CHECK(plan.target == Cell{1, 1});
}

TEST_CASE("plan_route: empty 5x5 corner-to-corner takes 8 moves") {
    GridWorld world;
    world.width = 5;
    world.height = 5;
    const PlanPayload plan = plan_route(world, Cell{0, 0}, Cell{4, 4});
    CHECK(plan.reachable);
    CHECK(plan.moves.size() == 8);
    CHECK(route_walks(plan, world));
}

TEST_CASE("plan_route: walled-off goals are unreachable") {
    GridWorld world;
    world.width = 5;
    world.height = 5;
    for (int y = 0; y < 5; ++y) world.obstacles.insert(Cell{2, y});
    const PlanPayload plan = plan_route(world, Cell{0, 2}, Cell{4, 2});
    CHECK_FALSE(plan.reachable);
    CHECK(plan.moves.empty());
}

TEST_CASE("plan_route: avoid cells are treated as obstacles") {
    GridWorld world;
    world.width = 5;
    world.height = 1;
    const PlanPayload direct = plan_route(world, Cell{0, 0}, Cell{4, 0});
    CHECK(direct.reachable);
    CHECK(direct.moves.size() == 4);

    const PlanPayload blocked = plan_route(world, Cell{0, 0}, Cell{4, 0}, {Cell{2, 0}});
    CHECK_FALSE(blocked.reachable);
}

TEST_CASE("plan_route matches the breadth-first-search oracle on random worlds") {
    std::mt19937_64 rng(20260816);
    std::uniform_int_distribution<int> coord(0, 8);
    for (int round = 0; round < 500; ++round) {
        GridWorld world;
        world.width = 9;
        world.height = 9;
        const int walls = static_cast<int>(rng() % 20);
        for (int i = 0; i < walls; ++i) world.obstacles.insert(Cell{coord(rng), coord(rng)});

        Cell from{coord(rng), coord(rng)};
        Cell goal{coord(rng), coord(rng)};
        world.obstacles.erase(from);
        world.obstacles.erase(goal);
        world.robot = from;
        world.goal = goal;

        const PlanPayload plan = plan_route(world, from, goal);
        const auto oracle = bfs_length(world, from, goal);
        if (oracle) {
            REQUIRE(plan.reachable);
            CHECK(plan.moves.size() == *oracle);
            CHECK(route_walks(plan, world));
        } else {
            CHECK_FALSE(plan.reachable);
        }
    }
}

TEST_CASE("validate_world names the offending field") {
    GridWorld world;
    world.width = 3;
    world.height = 3;
    world.robot = Cell{3, 0};
    CHECK_THROWS_WITH_AS(validate_world(world), "world.robot: cell (3,0) is out of bounds",
                         std::invalid_argument);

    world.robot = Cell{0, 0};
    world.goal = Cell{2, 2};
    world.obstacles.insert(Cell{2, 2});
    CHECK_THROWS_WITH_AS(validate_world(world), "world.goal: cell (2,2) is an obstacle",
                         std::invalid_argument);

    world.obstacles.clear();
    world.humans.push_back(HumanTrack{});
    CHECK_THROWS_WITH_AS(validate_world(world),
                         "world.humans[0]: trajectory must have at least one cell",
                         std::invalid_argument);

    world.humans[0].cells = {Cell{0, 5}};
    CHECK_THROWS_WITH_AS(validate_world(world), "world.humans[0][0]: cell (0,5) is out of bounds",
                         std::invalid_argument);
}

TEST_CASE("human tracks clamp at their final cell") {
    const HumanTrack track{{Cell{1, 0}, Cell{1, 1}}};
    CHECK(track.at(0) == Cell{1, 0});
    CHECK(track.at(1) == Cell{1, 1});
    CHECK(track.at(99) == Cell{1, 1});
}

// ------------------------------------------------------------ scenario

TEST_CASE("bundled scenario fixtures load and serialize byte-identically") {
    for (const char* name : {"fig4-abstract.json", "room-goal-switch.json",
                             "human-crossing.json", "corridor-repeat.json"}) {
        const auto path = scenario_path(name);
        std::ifstream in(path, std::ios::binary);
        REQUIRE(in.good());
        std::stringstream buffer;
        buffer << in.rdbuf();

        const Scenario scenario = load_scenario(path);
        CHECK(scenario_to_json(scenario).dump(2) + "\n" == buffer.str());
    }
}

TEST_CASE("scenario validation errors name the offending field") {
    json base{{"scenario", "gwr-scenario.v1"}, {"name", "t"}, {"kind", "abstract"},
              {"modules", json::array({json{{"name", "m"}, {"priority", 1}}})}};

    json bad = base;
    bad["scenario"] = "other";
    CHECK_THROWS_WITH_AS(scenario_from_json(bad),
                         "scenario.scenario: missing format tag \"gwr-scenario.v1\"",
                         ScenarioError);

    bad = base;
    bad["kind"] = "spherical";
    CHECK_THROWS_AS(scenario_from_json(bad), ScenarioError);

    bad = base;
    bad["policy"] = "bogus";
    CHECK_THROWS_AS(scenario_from_json(bad), ScenarioError);

    bad = base;
    bad["modules"] = json::array({json{{"name", "m"}, {"priority", 1}},
                                  json{{"name", "m"}, {"priority", 2}}});
    CHECK_THROWS_WITH_AS(scenario_from_json(bad), "scenario.modules[1].name: duplicate module name",
                         ScenarioError);

    bad = base;
    bad["modules"] = json::array({json{{"name", "m"}, {"priority", 1}},
                                  json{{"name", "n"}, {"priority", 1}}});
    CHECK_THROWS_AS(scenario_from_json(bad), ScenarioError);

    bad = base;
    bad["stop"] = json{{"on_goal", true}};
    CHECK_THROWS_WITH_AS(scenario_from_json(bad), "scenario.stop.on_goal: only valid for grid scenarios",
                         ScenarioError);

    bad = base;
    bad["events"] = json::array({json{{"arrival", 0.0}, {"salience", 0.5},
                                      {"payload", json{{"kind", "chunk"}, {"interior", json::array()}}}}});
    CHECK_THROWS_AS(scenario_from_json(bad), ScenarioError);

    json grid{{"scenario", "gwr-scenario.v1"}, {"name", "g"}, {"kind", "grid"},
              {"world", json{{"width", 3}, {"height", 3}, {"robot", json::array({0, 0})},
                             {"goal", json::array({2, 2})}}}};
    json bad_grid = grid;
    bad_grid["stop"] = json{{"on_last_script_key", true}};
    CHECK_THROWS_WITH_AS(scenario_from_json(bad_grid),
                         "scenario.stop.on_last_script_key: only valid for abstract scenarios",
                         ScenarioError);

    bad_grid = grid;
    bad_grid["pipeline"] = json::array({"vision", "wheels"});
    CHECK_THROWS_WITH_AS(scenario_from_json(bad_grid), "scenario.pipeline: unknown slot \"wheels\"",
                         ScenarioError);

    bad_grid = grid;
    bad_grid["salience"] = json{{"alert", 1.5}};
    CHECK_THROWS_WITH_AS(scenario_from_json(bad_grid), "scenario.salience.alert: must be within [0, 1]",
                         ScenarioError);
}

TEST_CASE("scenario parse errors report the file line") {
    const auto path = std::filesystem::temp_directory_path() / "gwr-broken-scenario.json";
    std::ofstream out(path, std::ios::binary);
    out << "{\n  \"scenario\": \"gwr-scenario.v1\",\n  \"name\": }\n";
    out.close();
    try {
        load_scenario(path);
        FAIL("expected ScenarioError");
    } catch (const ScenarioError& e) {
        const std::string what = e.what();
        CHECK(what.find(path.string() + ":3") != std::string::npos);
    }
    std::filesystem::remove(path);
}

// --------------------------------------------------- workspace harness

TEST_CASE("corridor without memory alternates plan and ambient percept") {
    const Scenario scenario = load_scenario(scenario_path("corridor-repeat.json"));
    RunOptions options;
    options.no_memory = true;
    const RunOutput out = run_gwt(scenario, options);

    CHECK(out.cycles == 6);
    CHECK(out.stop == StopReason::PredicateSatisfied);
    CHECK(out.final_world.robot == Cell{6, 0});

    const std::vector<json> broadcasts = lines_of(out, "broadcast");
    REQUIRE(broadcasts.size() == 6);
    const std::vector<std::string> kinds{"plan", "percept", "plan", "percept", "plan", "percept"};
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        CHECK(winner_kind(broadcasts[i]) == kinds[i]);
    }
    // The plan is re-proposed under one stable key, so the decayed plan
    // loses to the fresher ambient percept on alternating cycles.
    CHECK(broadcasts[0].at("key") == broadcasts[2].at("key"));
    CHECK(broadcasts[1].at("payload").at("label") == "room");

    const MetricsReport metrics = metrics_of(out);
    CHECK(metrics.cycles == 6);
    CHECK(metrics.steps_to_goal == 6);
    CHECK(metrics.collisions == 0);
    CHECK(metrics.cycles_saved == 0);
}

TEST_CASE("corridor with memory starts chunk-recalling within the first run") {
    const Scenario scenario = load_scenario(scenario_path("corridor-repeat.json"));
    const RunOutput out = run_gwt(scenario, RunOptions{});

    CHECK(out.cycles == 6);
    const std::vector<json> broadcasts = lines_of(out, "broadcast");
    REQUIRE(broadcasts.size() == 6);
    const std::vector<std::string> kinds{"plan", "percept", "plan", "chunk", "chunk", "chunk"};
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        CHECK(winner_kind(broadcasts[i]) == kinds[i]);
    }

    const MetricsReport metrics = metrics_of(out);
    CHECK(metrics.cycles_saved == 9);
    CHECK(metrics.steps_to_goal == 6);

    REQUIRE(out.memory_out.has_value());
    CHECK_FALSE(out.memory_out->empty());
}

TEST_CASE("corridor replay recalls from the snapshot on every cycle") {
    const Scenario scenario = load_scenario(scenario_path("corridor-repeat.json"));
    const RunOutput first = run_gwt(scenario, RunOptions{});
    REQUIRE(first.memory_out.has_value());

    RunOptions replay_options;
    replay_options.memory_in = first.memory_out;
    const RunOutput replay = run_gwt(scenario, replay_options);

    CHECK(replay.cycles == 6);
    const std::vector<json> broadcasts = lines_of(replay, "broadcast");
    REQUIRE(broadcasts.size() == 6);
    for (const json& b : broadcasts) CHECK(winner_kind(b) == "chunk");

    const MetricsReport metrics = metrics_of(replay);
    CHECK(metrics.cycles_saved == 18);
    CHECK(metrics.steps_to_goal == 6);
    CHECK(metrics.collisions == 0);
}

TEST_CASE("goal switch: instruction wins, goal and fresh plan follow within two cycles") {
    const Scenario scenario = load_scenario(scenario_path("room-goal-switch.json"));
    const RunOutput out = run_gwt(scenario, RunOptions{});

    CHECK(out.stop == StopReason::PredicateSatisfied);
    CHECK(out.final_world.robot == Cell{0, 8});

    std::map<CycleIndex, json> winners;
    for (const TraceEvent& e : out.events) {
        if (e.phase == Phase::Broadcast) winners[e.cycle] = e.line;
    }
    REQUIRE(winners.count(10));
    CHECK(winner_kind(winners[10]) == "instruction");
    REQUIRE(winners.count(11));
    CHECK(winner_kind(winners[11]) == "goal");
    CHECK(winners[11].at("payload").at("target") == json::array({0, 8}));
    REQUIRE(winners.count(12));
    CHECK(winner_kind(winners[12]) == "plan");
    CHECK(winners[12].at("payload").at("target") == json::array({0, 8}));

    const MetricsReport metrics = metrics_of(out);
    REQUIRE(metrics.adaptation_latency.has_value());
    CHECK(*metrics.adaptation_latency == 2);
    CHECK(metrics.collisions == 0);
}

TEST_CASE("human crossing: alert precedes an urgent detour and no collision") {
    const Scenario scenario = load_scenario(scenario_path("human-crossing.json"));
    const RunOutput out = run_gwt(scenario, RunOptions{});

    CHECK(out.stop == StopReason::PredicateSatisfied);
    CHECK(out.final_world.robot == Cell{8, 2});

    std::map<CycleIndex, json> winners;
    for (const TraceEvent& e : out.events) {
        if (e.phase == Phase::Broadcast) winners[e.cycle] = e.line;
    }
    REQUIRE(winners.count(2));
    CHECK(winner_kind(winners[2]) == "alert");
    CHECK(winners[2].at("payload").at("cell") == json::array({4, 2}));
    REQUIRE(winners.count(3));
    CHECK(winner_kind(winners[3]) == "plan");
    CHECK(winners[3].at("salience") == doctest::Approx(0.7));

    // The replanned route leaves the alerted cell out.
    const PlanPayload detour =
        std::get<PlanPayload>(payload_from_json(winners[3].at("payload")));
    Cell cur = detour.origin;
    for (Move m : detour.moves) {
        cur = step(cur, m);
        CHECK(cur != Cell{4, 2});
    }

    const MetricsReport metrics = metrics_of(out);
    CHECK(metrics.collisions == 0);
    CHECK(metrics.cycles == 10);
    CHECK(metrics.steps_to_goal == 10);
}

TEST_CASE("apply deltas drop moves into blocked cells with a warning") {
    GridWorld world;
    world.width = 2;
    world.height = 1;
    world.robot = Cell{1, 0};
    world.goal = Cell{1, 0};
    const json delta = apply_world_step(world, Move::East, world.goal);
    CHECK(world.robot == Cell{1, 0});
    CHECK(delta.at("move").is_null());
    CHECK(delta.at("warning") == "move into blocked cell dropped");
    CHECK(world.tick == 1);
}

// ------------------------------------------------------------ pipeline

TEST_CASE("pipeline latency follows slot distance") {
    const Scenario scenario = load_scenario(scenario_path("room-goal-switch.json"));
    const RunOutput out = run_pipeline(scenario, RunOptions{});

    // Instruction arrives at cycle 10; the voice slot next runs at cycle
    // 12 and the planner slot at 13, so the adapted plan appears 3
    // cycles after the instruction.
    const MetricsReport metrics = metrics_of(out);
    REQUIRE(metrics.adaptation_latency.has_value());
    CHECK(*metrics.adaptation_latency == 3);
    CHECK(out.header.engine == "pipeline:vision,detector,voice,planner,motor");
}

TEST_CASE("pipeline is blind between slots: the crossing human is hit") {
    const Scenario scenario = load_scenario(scenario_path("human-crossing.json"));
    const RunOutput out = run_pipeline(scenario, RunOptions{});
    const MetricsReport metrics = metrics_of(out);
    CHECK(metrics.collisions == 1);
    CHECK(metrics.steps_to_goal == 8);
    CHECK(out.stop == StopReason::PredicateSatisfied);
}

TEST_CASE("motor-only pipeline never moves and exhausts its budget") {
    const Scenario scenario = load_scenario(scenario_path("corridor-repeat.json"));
    const RunOutput out = run_pipeline(scenario, RunOptions{}, {"motor"});
    CHECK(out.stop == StopReason::BudgetExhausted);
    CHECK(out.final_world.robot == Cell{0, 0});
    const MetricsReport metrics = metrics_of(out);
    CHECK_FALSE(metrics.steps_to_goal.has_value());
    CHECK(out.header.engine == "pipeline:motor");
}

TEST_CASE("static world: both engines take the shortest-path step count") {
    const Scenario scenario = load_scenario(scenario_path("corridor-repeat.json"));
    const RunOutput gwt = run_gwt(scenario, RunOptions{});
    const RunOutput pipeline = run_pipeline(scenario, RunOptions{});
    const auto oracle = bfs_length(scenario.world, scenario.world.robot, scenario.world.goal);
    REQUIRE(oracle.has_value());
    CHECK(metrics_of(gwt).steps_to_goal == *oracle);
    CHECK(metrics_of(pipeline).steps_to_goal == *oracle);
}

TEST_CASE("pipeline rejects abstract scenarios") {
    const Scenario scenario = load_scenario(scenario_path("fig4-abstract.json"));
    CHECK_THROWS_AS(run_pipeline(scenario, RunOptions{}), ScenarioError);
}

TEST_CASE("pipeline order parsing") {
    CHECK(parse_pipeline_order("vision,motor") == std::vector<std::string>{"vision", "motor"});
    CHECK_THROWS_AS(parse_pipeline_order("vision,wheels"), std::invalid_argument);
    CHECK_THROWS_AS(parse_pipeline_order(""), std::invalid_argument);
    CHECK(pipeline_engine_label({"vision", "motor"}) == "pipeline:vision,motor");
}

// ------------------------------------------------------------- metrics

TEST_CASE("adaptation latency measures instruction-to-plan distance") {
    std::ostringstream trace;
    trace << R"({"trace":"gwr.v1","engine":"gwt","scenario":"t","policy":"max","seed":0,"history_bound":64})" << "\n";
    const Payload instruction = InstructionPayload{Cell{2, 2}};
    const Payload plan = PlanPayload{Cell{0, 0}, Cell{2, 2}, {Move::East}, true};
    trace << json{{"cycle", 3},
                  {"phase", "inject"},
                  {"key", key_hex(content_key(instruction))},
                  {"payload", payload_to_json(instruction)},
                  {"salience", 0.8},
                  {"arrival", 3.0}}
                 .dump()
          << "\n";
    trace << json{{"cycle", 5},
                  {"phase", "broadcast"},
                  {"key", key_hex(content_key(plan))},
                  {"payload", payload_to_json(plan)},
                  {"source", "planner"},
                  {"salience", 0.5},
                  {"receivers", json::array({"planner"})},
                  {"collapsed", json::array()}}
                 .dump()
          << "\n";
    trace << json{{"cycle", 5}, {"phase", "apply"}, {"delta", json::object()}}.dump() << "\n";

    const MetricsReport metrics = compute_metrics(parse_trace(trace.str()));
    REQUIRE(metrics.adaptation_latency.has_value());
    CHECK(*metrics.adaptation_latency == 2);
    CHECK(metrics.cycles == 6);
    CHECK_FALSE(metrics.steps_to_goal.has_value());
}

TEST_CASE("collisions and goal steps come from apply deltas") {
    std::ostringstream trace;
    trace << R"({"trace":"gwr.v1","engine":"gwt","scenario":"t","policy":"max","seed":0,"history_bound":64})" << "\n";
    const auto apply_line = [](CycleIndex cycle, const char* move, bool collision, bool at_goal) {
        json delta{{"robot", json::array({0, 0})},
                   {"tick", cycle + 1},
                   {"move", move ? json(move) : json()},
                   {"collision", collision},
                   {"at_goal", at_goal}};
        return json{{"cycle", cycle}, {"phase", "apply"}, {"delta", delta}}.dump();
    };
    trace << apply_line(0, "E", false, false) << "\n";
    trace << apply_line(1, "E", true, false) << "\n";
    trace << apply_line(2, nullptr, false, false) << "\n";
    trace << apply_line(3, "E", true, true) << "\n";
    trace << apply_line(4, "E", false, true) << "\n";

    const MetricsReport metrics = compute_metrics(parse_trace(trace.str()));
    CHECK(metrics.collisions == 2);
    REQUIRE(metrics.steps_to_goal.has_value());
    CHECK(*metrics.steps_to_goal == 3);
    CHECK(metrics.cycles == 5);
}

TEST_CASE("malformed trace lines are reported by line number") {
    const std::string header =
        R"({"trace":"gwr.v1","engine":"gwt","scenario":"t","policy":"max","seed":0,"history_bound":64})";
    const std::string ok_collect =
        R"({"cycle":0,"phase":"collect","polled":[],"faulted":[],"proposals":[]})";
    const std::string ok_select = R"({"cycle":0,"phase":"select","winner":null,"scoreboard":[]})";

    try {
        parse_trace(header + "\n" + ok_collect + "\n" + ok_select + "\n:::\n");
        FAIL("expected TraceError");
    } catch (const TraceError& e) {
        CHECK(e.line_no == 4);
        CHECK(std::string(e.what()).find("trace line 4: not valid JSON") != std::string::npos);
    }

    try {
        compute_metrics(parse_trace(header + "\n" + ok_collect + "\n" + ok_select + "\n" +
                                    R"({"cycle":0,"phase":"apply"})" + "\n"));
        FAIL("expected TraceError");
    } catch (const TraceError& e) {
        CHECK(e.line_no == 4);
        CHECK(std::string(e.what()).find("apply event has no delta") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_trace("{}\n"), TraceError);
    CHECK_THROWS_AS(parse_trace(""), TraceError);
}

TEST_CASE("metrics serialize to the trailing trace line and back") {
    MetricsReport report;
    report.cycles = 12;
    report.steps_to_goal = std::nullopt;
    report.collisions = 1;
    report.adaptation_latency = 3;
    report.cycles_saved = 4;

    const json j = metrics_to_json(report);
    CHECK(j.at("metrics").at("steps_to_goal") == "unreached");
    const MetricsReport back = metrics_from_json(j);
    CHECK(back.cycles == 12);
    CHECK_FALSE(back.steps_to_goal.has_value());
    CHECK(back.collisions == 1);
    CHECK(back.adaptation_latency == 3);
    CHECK(back.cycles_saved == 4);
}

TEST_CASE("chunk collapses add their interior length minus one to cycles_saved") {
    const Scenario scenario = load_scenario(scenario_path("fig4-abstract.json"));
    const RunOutput first = run_gwt(scenario, RunOptions{});
    REQUIRE(first.memory_out.has_value());
    CHECK(first.cycles == 3);
    CHECK(metrics_of(first).cycles_saved == 0);

    RunOptions replay_options;
    replay_options.memory_in = first.memory_out;
    const RunOutput replay = run_gwt(scenario, replay_options);
    CHECK(replay.cycles == 2);
    CHECK(metrics_of(replay).cycles_saved == 1);
}
