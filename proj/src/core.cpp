#include "gwr/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gwr {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
    std::uint64_t h = kFnvOffset;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_i32(std::vector<std::uint8_t>& out, std::int32_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
}

void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

void put_cell(std::vector<std::uint8_t>& out, Cell c) {
    put_i32(out, c.x);
    put_i32(out, c.y);
}

}  // namespace

std::int64_t manhattan(Cell a, Cell b) {
    return std::llabs(static_cast<std::int64_t>(a.x) - b.x) +
           std::llabs(static_cast<std::int64_t>(a.y) - b.y);
}

Cell step(Cell from, Move m) {
    switch (m) {
        case Move::North: return {from.x, from.y - 1};
        case Move::East: return {from.x + 1, from.y};
        case Move::South: return {from.x, from.y + 1};
        case Move::West: return {from.x - 1, from.y};
    }
    return from;
}

char move_letter(Move m) {
    switch (m) {
        case Move::North: return 'N';
        case Move::East: return 'E';
        case Move::South: return 'S';
        case Move::West: return 'W';
    }
    return '?';
}

std::optional<Move> move_from_letter(char c) {
    switch (c) {
        case 'N': return Move::North;
        case 'E': return Move::East;
        case 'S': return Move::South;
        case 'W': return Move::West;
        default: return std::nullopt;
    }
}

const ModuleId& external_id() {
    static const ModuleId id{"external", kExternalPriority};
    return id;
}

Salience::Salience(double value) : value_(value) {
    if (std::isnan(value) || value < 0.0 || value > 1.0) {
        throw std::invalid_argument("salience must be a real in [0, 1]");
    }
}

std::string key_hex(ContentKey key) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(key.value));
    return buf;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
    std::vector<std::uint8_t> bytes;
    put_u64(bytes, master);
    bytes.insert(bytes.end(), name.begin(), name.end());
    return fnv1a(bytes);
}

std::optional<ContentKey> key_from_hex(std::string_view hex) {
    if (hex.size() != 16) return std::nullopt;
    std::uint64_t v = 0;
    for (char c : hex) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
        else return std::nullopt;
    }
    return ContentKey{v};
}

bool operator==(const ChunkRecallPayload& a, const ChunkRecallPayload& b) {
    if (a.interior.size() != b.interior.size()) return false;
    for (std::size_t i = 0; i < a.interior.size(); ++i) {
        if (a.interior[i].key != b.interior[i].key) return false;
    }
    return true;
}

const char* payload_kind(const Payload& payload) {
    switch (payload.index()) {
        case 0: return "percept";
        case 1: return "plan";
        case 2: return "goal";
        case 3: return "instruction";
        case 4: return "alert";
        case 5: return "chunk";
    }
    return "unknown";
}

std::vector<std::uint8_t> canonical_bytes(const Payload& payload) {
    std::vector<std::uint8_t> out;
    if (const auto* p = std::get_if<PerceptPayload>(&payload)) {
        put_u8(out, 0x01);
        put_str(out, p->label);
        put_u8(out, p->cell.has_value() ? 1 : 0);
        if (p->cell) put_cell(out, *p->cell);
    } else if (const auto* p = std::get_if<PlanPayload>(&payload)) {
        put_u8(out, 0x02);
        put_cell(out, p->origin);
        put_cell(out, p->target);
        put_u8(out, p->reachable ? 1 : 0);
        put_u32(out, static_cast<std::uint32_t>(p->moves.size()));
        for (Move m : p->moves) put_u8(out, static_cast<std::uint8_t>(m));
    } else if (const auto* p = std::get_if<GoalPayload>(&payload)) {
        put_u8(out, 0x03);
        put_cell(out, p->target);
    } else if (const auto* p = std::get_if<InstructionPayload>(&payload)) {
        put_u8(out, 0x04);
        put_cell(out, p->goal);
    } else if (const auto* p = std::get_if<AlertPayload>(&payload)) {
        put_u8(out, 0x05);
        put_str(out, p->reason);
        put_cell(out, p->cell);
    } else if (const auto* p = std::get_if<ChunkRecallPayload>(&payload)) {
        put_u8(out, 0x06);
        put_u32(out, static_cast<std::uint32_t>(p->interior.size()));
        for (const Content& c : p->interior) put_u64(out, c.key.value);
    }
    return out;
}

ContentKey content_key(const Payload& payload) {
    return ContentKey{fnv1a(canonical_bytes(payload))};
}

Content::Content(Payload p, ModuleId src, CycleIndex born)
    : payload(std::move(p)), source(std::move(src)), born_cycle(born) {
    if (const auto* chunk = std::get_if<ChunkRecallPayload>(&payload)) {
        if (chunk->interior.empty()) {
            throw std::invalid_argument("chunk interior must be non-empty");
        }
        for (const Content& c : chunk->interior) {
            if (std::holds_alternative<ChunkRecallPayload>(c.payload)) {
                throw std::invalid_argument("chunk interiors must not nest chunks");
            }
        }
    }
    key = content_key(payload);
}

const ChunkRecallPayload* as_chunk(const Content& content) {
    return std::get_if<ChunkRecallPayload>(&content.payload);
}

bool proposal_before(const Proposal& a, const Proposal& b) {
    if (a.salience.value() != b.salience.value()) {
        return a.salience.value() > b.salience.value();
    }
    if (a.proposer.priority != b.proposer.priority) {
        return a.proposer.priority < b.proposer.priority;
    }
    return a.content.key < b.content.key;
}

std::vector<Proposal> canonical_order(std::vector<Proposal> proposals) {
    std::stable_sort(proposals.begin(), proposals.end(), proposal_before);
    return proposals;
}

}  // namespace gwr
