#pragma once
// Episodic chunk memory: records the stream of conscious contents,
// recognizes previously seen suffixes, and proposes the recorded
// continuation as a single chunk so replays skip already-known cycles.

#include <filesystem>
#include <map>

#include "gwr/engine.hpp"

namespace gwr {

struct MemoryConfig {
    std::size_t suffix_order = 3;   // longest suffix length indexed
    std::size_t chunk_cap = 4;      // max interior length of a recalled chunk
    double recall_threshold = 0.1;  // min chunk confidence to propose
    double salience_base = 0.6;     // chunk salience = base * confidence
};

// One recalled continuation: the contents to replay, the product of the
// per-step confidences, and the suffix that triggered the match. Each
// step records the (suffix, continuation key) pair that chose it, which
// is what reinforcement later adjusts.
struct ChunkProposal {
    std::vector<Content> interior;
    double confidence = 0.0;
    std::vector<ContentKey> suffix;
    std::vector<std::pair<std::vector<ContentKey>, ContentKey>> steps;
};

class EpisodeStore {
  public:
    struct LogEntry {
        ContentKey key;
        CycleIndex cycle = 0;
    };

    struct Continuation {
        std::uint64_t count = 0;
        double confidence = 0.0;
    };

    explicit EpisodeStore(MemoryConfig config = {});

    const MemoryConfig& config() const { return config_; }

    // Appends to the log and refreshes every suffix index entry of
    // length <= suffix_order. Chunk contents are expanded: interiors
    // are observed in recorded order, the wrapper itself is not.
    void observe(const Content& content, CycleIndex cycle);

    // Longest-suffix match over the tail of `recent`, greedily chained
    // up to chunk_cap items while the confidence product stays at or
    // above the recall threshold. Empty when nothing qualifies.
    std::optional<ChunkProposal> recall(std::span<const ContentKey> recent) const;

    // Adjusts the stored confidence of every step along the chunk's
    // chain: confirmed adds 0.1 (clamped to 1), contradicted halves.
    // Steps are identified by (suffix, continuation key) pairs.
    void reinforce(const std::vector<std::pair<std::vector<ContentKey>, ContentKey>>& steps,
                   bool confirmed);

    const std::vector<LogEntry>& log() const { return log_; }
    const Continuation* continuation(const std::vector<ContentKey>& suffix,
                                     ContentKey next) const;
    const Content* content(ContentKey key) const;
    bool empty() const { return log_.empty(); }

    json to_json() const;
    static EpisodeStore from_json(const json& j);
    void save(const std::filesystem::path& path) const;
    static EpisodeStore load(const std::filesystem::path& path);

  private:
    void index_new_tail();

    MemoryConfig config_;
    std::vector<LogEntry> log_;
    std::map<ContentKey, Content> contents_;
    std::map<std::vector<ContentKey>, std::map<ContentKey, Continuation>> index_;
};

// The specialist module wrapping an EpisodeStore. Observes every
// broadcast, proposes recalled chunks from its own log tail, and keeps
// the chain of each proposed chunk so the harness can reinforce it by
// chunk key after the world reacts.
class EpisodicMemoryModule : public SpecialistModule {
  public:
    explicit EpisodicMemoryModule(MemoryConfig config = {}, std::string name = "memory");

    std::string name() const override { return name_; }
    std::vector<Proposal> propose(const WorkspaceState& state, StepBudget& budget) override;
    void receive_broadcast(const Content& content, CycleIndex cycle,
                           StepBudget& budget) override;

    // Outcome feedback for a chunk this module proposed. Unknown keys
    // are a warning-counting no-op.
    void reinforce_chunk(ContentKey chunk_key, bool confirmed);

    EpisodeStore& store() { return store_; }
    const EpisodeStore& store() const { return store_; }
    void replace_store(EpisodeStore store) { store_ = std::move(store); }
    std::uint64_t warnings() const { return warnings_; }

  private:
    using ChainSteps = std::vector<std::pair<std::vector<ContentKey>, ContentKey>>;

    std::string name_;
    EpisodeStore store_;
    std::map<ContentKey, ChainSteps> pending_;
    std::uint64_t warnings_ = 0;
};

}  // namespace gwr
