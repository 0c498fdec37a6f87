#include "gwr/jsonio.hpp"

#include <stdexcept>

namespace gwr {

json cell_to_json(Cell c) { return json::array({c.x, c.y}); }

Cell cell_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
        throw std::invalid_argument("cell must be an [x, y] integer pair");
    }
    return Cell{j[0].get<std::int32_t>(), j[1].get<std::int32_t>()};
}

std::string moves_string(const std::vector<Move>& moves) {
    std::string s;
    s.reserve(moves.size());
    for (Move m : moves) s.push_back(move_letter(m));
    return s;
}

std::vector<Move> moves_from_string(const std::string& s) {
    std::vector<Move> moves;
    moves.reserve(s.size());
    for (char c : s) {
        auto m = move_from_letter(c);
        if (!m) throw std::invalid_argument(std::string("unknown move letter '") + c + "'");
        moves.push_back(*m);
    }
    return moves;
}

json payload_to_json(const Payload& payload) {
    json j;
    j["kind"] = payload_kind(payload);
    if (const auto* p = std::get_if<PerceptPayload>(&payload)) {
        j["label"] = p->label;
        if (p->cell) j["cell"] = cell_to_json(*p->cell);
    } else if (const auto* p = std::get_if<PlanPayload>(&payload)) {
        j["origin"] = cell_to_json(p->origin);
        j["target"] = cell_to_json(p->target);
        j["moves"] = moves_string(p->moves);
        j["reachable"] = p->reachable;
    } else if (const auto* p = std::get_if<GoalPayload>(&payload)) {
        j["target"] = cell_to_json(p->target);
    } else if (const auto* p = std::get_if<InstructionPayload>(&payload)) {
        j["goal"] = cell_to_json(p->goal);
    } else if (const auto* p = std::get_if<AlertPayload>(&payload)) {
        j["reason"] = p->reason;
        j["cell"] = cell_to_json(p->cell);
    } else if (const auto* p = std::get_if<ChunkRecallPayload>(&payload)) {
        json interior = json::array();
        for (const Content& c : p->interior) interior.push_back(content_to_json(c));
        j["interior"] = std::move(interior);
    }
    return j;
}

Payload payload_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
        throw std::invalid_argument("payload must be an object with a 'kind' string");
    }
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "percept") {
        PerceptPayload p;
        p.label = j.at("label").get<std::string>();
        if (j.contains("cell")) p.cell = cell_from_json(j["cell"]);
        return p;
    }
    if (kind == "plan") {
        PlanPayload p;
        p.origin = cell_from_json(j.at("origin"));
        p.target = cell_from_json(j.at("target"));
        p.moves = moves_from_string(j.at("moves").get<std::string>());
        p.reachable = j.at("reachable").get<bool>();
        return p;
    }
    if (kind == "goal") {
        return GoalPayload{cell_from_json(j.at("target"))};
    }
    if (kind == "instruction") {
        return InstructionPayload{cell_from_json(j.at("goal"))};
    }
    if (kind == "alert") {
        AlertPayload p;
        p.reason = j.at("reason").get<std::string>();
        p.cell = cell_from_json(j.at("cell"));
        return p;
    }
    if (kind == "chunk") {
        ChunkRecallPayload p;
        for (const json& cj : j.at("interior")) p.interior.push_back(content_from_json(cj));
        return p;
    }
    throw std::invalid_argument("unknown payload kind '" + kind + "'");
}

json content_to_json(const Content& content) {
    json j;
    j["key"] = key_hex(content.key);
    j["payload"] = payload_to_json(content.payload);
    j["source"] = content.source.name;
    j["priority"] = content.source.priority;
    j["born"] = content.born_cycle;
    return j;
}

Content content_from_json(const json& j) {
    Payload payload = payload_from_json(j.at("payload"));
    ModuleId source{j.at("source").get<std::string>(), j.at("priority").get<std::uint32_t>()};
    Content content(std::move(payload), std::move(source), j.at("born").get<CycleIndex>());
    if (j.contains("key")) {
        auto key = key_from_hex(j["key"].get<std::string>());
        if (!key || *key != content.key) {
            throw std::invalid_argument("content key does not match payload digest");
        }
    }
    return content;
}

}  // namespace gwr
