#include "gwr/memory.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace gwr {

namespace {

constexpr const char* kSnapshotTag = "gwr-memory.v1";

}  // namespace

EpisodeStore::EpisodeStore(MemoryConfig config) : config_(config) {
    if (config_.suffix_order == 0) {
        throw std::invalid_argument("suffix_order must be at least 1");
    }
    if (config_.chunk_cap == 0) {
        throw std::invalid_argument("chunk_cap must be at least 1");
    }
}

void EpisodeStore::observe(const Content& content, CycleIndex cycle) {
    if (const ChunkRecallPayload* chunk = as_chunk(content)) {
        for (const Content& inner : chunk->interior) observe(inner, cycle);
        return;
    }
    contents_.emplace(content.key, content);
    log_.push_back(LogEntry{content.key, cycle});
    index_new_tail();
}

void EpisodeStore::index_new_tail() {
    const std::size_t n = log_.size();
    const ContentKey next = log_[n - 1].key;
    for (std::size_t len = 1; len <= config_.suffix_order && len < n; ++len) {
        std::vector<ContentKey> suffix;
        suffix.reserve(len);
        for (std::size_t i = n - 1 - len; i < n - 1; ++i) suffix.push_back(log_[i].key);
        auto& continuations = index_[suffix];
        continuations[next].count += 1;
        std::uint64_t total = 0;
        for (const auto& [key, cont] : continuations) total += cont.count;
        for (auto& [key, cont] : continuations) {
            cont.confidence = static_cast<double>(cont.count) / static_cast<double>(total);
        }
    }
}

const EpisodeStore::Continuation* EpisodeStore::continuation(
    const std::vector<ContentKey>& suffix, ContentKey next) const {
    auto it = index_.find(suffix);
    if (it == index_.end()) return nullptr;
    auto jt = it->second.find(next);
    if (jt == it->second.end()) return nullptr;
    return &jt->second;
}

const Content* EpisodeStore::content(ContentKey key) const {
    auto it = contents_.find(key);
    return it == contents_.end() ? nullptr : &it->second;
}

std::optional<ChunkProposal> EpisodeStore::recall(std::span<const ContentKey> recent) const {
    if (recent.empty()) return std::nullopt;

    std::vector<ContentKey> tail(recent.begin(), recent.end());
    ChunkProposal proposal;
    double product = 1.0;

    // Each step matches the longest indexed suffix of the running tail
    // and takes the strongest continuation; the chain stops when the
    // confidence product would drop below the recall threshold.
    while (proposal.interior.size() < config_.chunk_cap) {
        const std::map<ContentKey, Continuation>* continuations = nullptr;
        std::vector<ContentKey> matched;
        const std::size_t longest = std::min(config_.suffix_order, tail.size());
        for (std::size_t len = longest; len >= 1; --len) {
            std::vector<ContentKey> suffix(tail.end() - static_cast<std::ptrdiff_t>(len),
                                           tail.end());
            auto it = index_.find(suffix);
            if (it != index_.end() && !it->second.empty()) {
                continuations = &it->second;
                matched = std::move(suffix);
                break;
            }
        }
        if (!continuations) break;

        const std::pair<const ContentKey, Continuation>* best = nullptr;
        for (const auto& entry : *continuations) {
            if (entry.second.confidence < config_.recall_threshold) continue;
            if (!best || entry.second.confidence > best->second.confidence ||
                (entry.second.confidence == best->second.confidence &&
                 entry.second.count > best->second.count)) {
                best = &entry;
            }
        }
        if (!best) break;
        if (product * best->second.confidence < config_.recall_threshold) break;
        const Content* next = content(best->first);
        if (!next) break;

        product *= best->second.confidence;
        proposal.interior.push_back(*next);
        if (proposal.steps.empty()) proposal.suffix = matched;
        proposal.steps.emplace_back(std::move(matched), best->first);
        tail.push_back(best->first);
    }

    if (proposal.interior.empty()) return std::nullopt;
    proposal.confidence = product;
    return proposal;
}

void EpisodeStore::reinforce(
    const std::vector<std::pair<std::vector<ContentKey>, ContentKey>>& steps, bool confirmed) {
    for (const auto& [suffix, next] : steps) {
        auto it = index_.find(suffix);
        if (it == index_.end()) continue;
        auto jt = it->second.find(next);
        if (jt == it->second.end()) continue;
        if (confirmed) {
            jt->second.confidence = std::min(1.0, jt->second.confidence + 0.1);
        } else {
            jt->second.confidence *= 0.5;
        }
    }
}

json EpisodeStore::to_json() const {
    json j{{"memory", kSnapshotTag},
           {"config",
            json{{"suffix_order", config_.suffix_order},
                 {"chunk_cap", config_.chunk_cap},
                 {"recall_threshold", config_.recall_threshold},
                 {"salience_base", config_.salience_base}}}};
    json log_lines = json::array();
    for (const LogEntry& entry : log_) {
        log_lines.push_back(json{{"key", key_hex(entry.key)}, {"cycle", entry.cycle}});
    }
    j["log"] = std::move(log_lines);
    json contents = json::array();
    for (const auto& [key, content] : contents_) contents.push_back(content_to_json(content));
    j["contents"] = std::move(contents);
    json index = json::array();
    for (const auto& [suffix, continuations] : index_) {
        json suffix_keys = json::array();
        for (ContentKey key : suffix) suffix_keys.push_back(key_hex(key));
        json conts = json::array();
        for (const auto& [key, cont] : continuations) {
            conts.push_back(json{{"key", key_hex(key)},
                                 {"count", cont.count},
                                 {"confidence", cont.confidence}});
        }
        index.push_back(json{{"suffix", std::move(suffix_keys)},
                             {"continuations", std::move(conts)}});
    }
    j["index"] = std::move(index);
    return j;
}

namespace {

ContentKey parse_key_field(const json& j, const char* context) {
    if (!j.is_string()) {
        throw std::runtime_error(std::string("memory snapshot: ") + context +
                                 " must be a 16-hex-digit key");
    }
    auto key = key_from_hex(j.get<std::string>());
    if (!key) {
        throw std::runtime_error(std::string("memory snapshot: bad key '") +
                                 j.get<std::string>() + "' in " + context);
    }
    return *key;
}

}  // namespace

EpisodeStore EpisodeStore::from_json(const json& j) {
    if (!j.is_object() || j.value("memory", "") != kSnapshotTag) {
        throw std::runtime_error(std::string("memory snapshot: missing tag \"") + kSnapshotTag +
                                 "\"");
    }
    const json& cfg = j.at("config");
    MemoryConfig config;
    config.suffix_order = cfg.at("suffix_order").get<std::size_t>();
    config.chunk_cap = cfg.at("chunk_cap").get<std::size_t>();
    config.recall_threshold = cfg.at("recall_threshold").get<double>();
    config.salience_base = cfg.at("salience_base").get<double>();
    EpisodeStore store(config);
    for (const json& c : j.at("contents")) {
        Content content = content_from_json(c);
        store.contents_.emplace(content.key, std::move(content));
    }
    for (const json& entry : j.at("log")) {
        store.log_.push_back(LogEntry{parse_key_field(entry.at("key"), "log entry"),
                                      entry.at("cycle").get<CycleIndex>()});
    }
    for (const json& entry : j.at("index")) {
        std::vector<ContentKey> suffix;
        for (const json& k : entry.at("suffix")) {
            suffix.push_back(parse_key_field(k, "index suffix"));
        }
        auto& continuations = store.index_[std::move(suffix)];
        for (const json& c : entry.at("continuations")) {
            Continuation cont;
            cont.count = c.at("count").get<std::uint64_t>();
            cont.confidence = c.at("confidence").get<double>();
            continuations.emplace(parse_key_field(c.at("key"), "continuation"), cont);
        }
    }
    return store;
}

void EpisodeStore::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("memory snapshot: cannot write " + path.string());
    }
    out << to_json().dump(2) << '\n';
}

EpisodeStore EpisodeStore::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("memory snapshot: cannot read " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("memory snapshot: " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

EpisodicMemoryModule::EpisodicMemoryModule(MemoryConfig config, std::string name)
    : name_(std::move(name)), store_(config) {}

std::vector<Proposal> EpisodicMemoryModule::propose(const WorkspaceState& state,
                                                    StepBudget& budget) {
    budget.charge(1);
    if (store_.empty()) return {};

    const auto& log = store_.log();
    const std::size_t tail_len = std::min(store_.config().suffix_order, log.size());
    std::vector<ContentKey> tail;
    tail.reserve(tail_len);
    for (std::size_t i = log.size() - tail_len; i < log.size(); ++i) {
        tail.push_back(log[i].key);
    }

    budget.charge(tail.size());
    auto recalled = store_.recall(tail);
    if (!recalled) return {};

    const double salience =
        std::min(1.0, store_.config().salience_base * recalled->confidence);
    ChunkRecallPayload payload{std::move(recalled->interior)};
    Proposal proposal = make_proposal(std::move(payload), salience, state.cycle);
    pending_[proposal.content.key] = std::move(recalled->steps);
    return {std::move(proposal)};
}

void EpisodicMemoryModule::receive_broadcast(const Content& content, CycleIndex cycle,
                                             StepBudget& budget) {
    budget.charge(1);
    store_.observe(content, cycle);
}

void EpisodicMemoryModule::reinforce_chunk(ContentKey chunk_key, bool confirmed) {
    auto it = pending_.find(chunk_key);
    if (it == pending_.end()) {
        ++warnings_;
        return;
    }
    store_.reinforce(it->second, confirmed);
    pending_.erase(it);
}

}  // namespace gwr
