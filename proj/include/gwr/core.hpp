#pragma once
// Shared vocabulary of the runtime: contents, proposals, keys, and the
// canonical encodings that make digests and orderings reproducible.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gwr {

using CycleIndex = std::uint64_t;

struct Cell {
    std::int32_t x = 0;
    std::int32_t y = 0;

    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

std::int64_t manhattan(Cell a, Cell b);

enum class Move : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };

Cell step(Cell from, Move m);
char move_letter(Move m);
std::optional<Move> move_from_letter(char c);

// Identity of a registered module. Priority breaks selection ties;
// lower value wins. Priority 0 is reserved for external input.
struct ModuleId {
    std::string name;
    std::uint32_t priority = 0;

    friend bool operator==(const ModuleId&, const ModuleId&) = default;
};

inline constexpr std::uint32_t kExternalPriority = 0;
const ModuleId& external_id();

// Competitive strength of a proposal, normalized to [0, 1]. NaN and
// out-of-range values are rejected at construction.
class Salience {
  public:
    Salience() = default;
    explicit Salience(double value);

    double value() const { return value_; }

    friend bool operator==(const Salience&, const Salience&) = default;

  private:
    double value_ = 0.0;
};

// 64-bit canonical digest of a payload. Identical payloads yield
// identical keys across runs and platforms.
struct ContentKey {
    std::uint64_t value = 0;

    friend bool operator==(const ContentKey&, const ContentKey&) = default;
    friend auto operator<=>(const ContentKey&, const ContentKey&) = default;
};

std::string key_hex(ContentKey key);
std::optional<ContentKey> key_from_hex(std::string_view hex);

// Stable per-module seed derived from a master seed and a module name.
std::uint64_t derive_seed(std::uint64_t master, std::string_view name);

struct Content;

struct PerceptPayload {
    std::string label;
    std::optional<Cell> cell;

    friend bool operator==(const PerceptPayload&, const PerceptPayload&) = default;
};

struct PlanPayload {
    Cell origin;
    Cell target;
    std::vector<Move> moves;
    bool reachable = true;

    friend bool operator==(const PlanPayload&, const PlanPayload&) = default;
};

struct GoalPayload {
    Cell target;

    friend bool operator==(const GoalPayload&, const GoalPayload&) = default;
};

struct InstructionPayload {
    Cell goal;

    friend bool operator==(const InstructionPayload&, const InstructionPayload&) = default;
};

struct AlertPayload {
    std::string reason;
    Cell cell;

    friend bool operator==(const AlertPayload&, const AlertPayload&) = default;
};

// A recorded continuation recalled as one unit. Interior contents are
// delivered in order within a single cycle. Nesting is rejected.
struct ChunkRecallPayload {
    std::vector<Content> interior;

    friend bool operator==(const ChunkRecallPayload& a, const ChunkRecallPayload& b);
};

using Payload = std::variant<PerceptPayload, PlanPayload, GoalPayload,
                             InstructionPayload, AlertPayload, ChunkRecallPayload>;

const char* payload_kind(const Payload& payload);

// Canonical byte layout of a payload (the digest input). Field order is
// fixed, integers are little-endian:
//   percept     0x01 | u32 label len | label | u8 has_cell | i32 x | i32 y
//   plan        0x02 | i32 ox | i32 oy | i32 tx | i32 ty | u8 reachable
//                    | u32 n | n move bytes (N=0 E=1 S=2 W=3)
//   goal        0x03 | i32 x | i32 y
//   instruction 0x04 | i32 x | i32 y
//   alert       0x05 | u32 reason len | reason | i32 x | i32 y
//   chunk       0x06 | u32 n | n x u64 interior content key
std::vector<std::uint8_t> canonical_bytes(const Payload& payload);

// FNV-1a over canonical_bytes.
ContentKey content_key(const Payload& payload);

// One unit of workspace information. The key is a pure function of the
// payload; source and born_cycle are provenance only.
struct Content {
    ContentKey key;
    Payload payload;
    ModuleId source;
    CycleIndex born_cycle = 0;

    Content() = default;
    // Computes the key and enforces chunk invariants (non-empty interior,
    // no nested chunks). Throws std::invalid_argument on violation.
    Content(Payload payload, ModuleId source, CycleIndex born_cycle);
};

const ChunkRecallPayload* as_chunk(const Content& content);

// A module's bid for consciousness in the current cycle.
struct Proposal {
    Content content;
    Salience salience;
    ModuleId proposer;
};

// Total deterministic order: salience descending, proposer priority
// ascending, content key ascending. Permutation-invariant and idempotent.
std::vector<Proposal> canonical_order(std::vector<Proposal> proposals);

bool proposal_before(const Proposal& a, const Proposal& b);

}  // namespace gwr
