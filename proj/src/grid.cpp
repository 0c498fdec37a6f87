#include "gwr/grid.hpp"

#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>

namespace gwr {

namespace {

std::string cell_str(Cell c) {
    return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")";
}

}  // namespace

void validate_world(const GridWorld& world) {
    if (world.width <= 0 || world.height <= 0) {
        throw std::invalid_argument("world.width/height: must be positive, got " +
                                    std::to_string(world.width) + "x" +
                                    std::to_string(world.height));
    }
    for (Cell c : world.obstacles) {
        if (!world.in_bounds(c)) {
            throw std::invalid_argument("world.obstacles: cell " + cell_str(c) +
                                        " is out of bounds");
        }
    }
    if (!world.in_bounds(world.robot)) {
        throw std::invalid_argument("world.robot: cell " + cell_str(world.robot) +
                                    " is out of bounds");
    }
    if (world.obstacles.count(world.robot)) {
        throw std::invalid_argument("world.robot: cell " + cell_str(world.robot) +
                                    " is an obstacle");
    }
    if (!world.in_bounds(world.goal)) {
        throw std::invalid_argument("world.goal: cell " + cell_str(world.goal) +
                                    " is out of bounds");
    }
    if (world.obstacles.count(world.goal)) {
        throw std::invalid_argument("world.goal: cell " + cell_str(world.goal) +
                                    " is an obstacle");
    }
    for (std::size_t h = 0; h < world.humans.size(); ++h) {
        const HumanTrack& track = world.humans[h];
        if (track.cells.empty()) {
            throw std::invalid_argument("world.humans[" + std::to_string(h) +
                                        "]: trajectory must have at least one cell");
        }
        for (std::size_t i = 0; i < track.cells.size(); ++i) {
            if (!world.in_bounds(track.cells[i])) {
                throw std::invalid_argument("world.humans[" + std::to_string(h) + "][" +
                                            std::to_string(i) + "]: cell " +
                                            cell_str(track.cells[i]) + " is out of bounds");
            }
        }
    }
}

PlanPayload plan_route(const GridWorld& world, Cell from, Cell goal,
                       const std::set<Cell>& avoid) {
    PlanPayload plan;
    plan.origin = from;
    plan.target = goal;
    plan.reachable = true;
    if (from == goal) return plan;
    if (!world.in_bounds(from) || world.blocked(goal) || avoid.count(goal)) {
        plan.reachable = false;
        return plan;
    }

    // A* with manhattan heuristic. The frontier orders by (f, h, cell)
    // so expansion order — and therefore the chosen path — is a pure
    // function of the inputs.
    using Node = std::tuple<std::int64_t, std::int64_t, Cell>;
    std::priority_queue<Node, std::vector<Node>, std::greater<>> frontier;
    std::map<Cell, std::int64_t> dist;
    std::map<Cell, std::pair<Cell, Move>> parent;

    dist[from] = 0;
    frontier.emplace(manhattan(from, goal), manhattan(from, goal), from);
    static constexpr Move kMoves[] = {Move::North, Move::East, Move::South, Move::West};

    while (!frontier.empty()) {
        const auto [f, h, cell] = frontier.top();
        frontier.pop();
        const std::int64_t g = f - h;
        auto at = dist.find(cell);
        if (at == dist.end() || g > at->second) continue;
        if (cell == goal) break;
        for (Move m : kMoves) {
            const Cell next = step(cell, m);
            if (world.blocked(next) || avoid.count(next)) continue;
            const std::int64_t ng = g + 1;
            auto it = dist.find(next);
            if (it != dist.end() && it->second <= ng) continue;
            dist[next] = ng;
            parent[next] = {cell, m};
            frontier.emplace(ng + manhattan(next, goal), manhattan(next, goal), next);
        }
    }

    if (!dist.count(goal)) {
        plan.reachable = false;
        return plan;
    }
    std::vector<Move> reversed;
    for (Cell cur = goal; cur != from;) {
        const auto& [prev, move] = parent.at(cur);
        reversed.push_back(move);
        cur = prev;
    }
    plan.moves.assign(reversed.rbegin(), reversed.rend());
    return plan;
}

}  // namespace gwr
