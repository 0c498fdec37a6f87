#pragma once
// JSON encodings shared by scenario files, trace files, and memory
// snapshots. All writers use ordered_json so key order is fixed and
// output is byte-stable.

#include <json.hpp>

#include "gwr/core.hpp"

namespace gwr {

using json = nlohmann::ordered_json;

json cell_to_json(Cell c);
Cell cell_from_json(const json& j);

json payload_to_json(const Payload& payload);
// Throws std::invalid_argument on unknown kinds or malformed fields.
Payload payload_from_json(const json& j);

json content_to_json(const Content& content);
Content content_from_json(const json& j);

std::string moves_string(const std::vector<Move>& moves);
std::vector<Move> moves_from_string(const std::string& s);

}  // namespace gwr
