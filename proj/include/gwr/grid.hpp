#pragma once
// Deterministic 4-connected grid world: static obstacles, scripted
// human trajectories, one robot, one goal, one tick per cycle.

#include <set>

#include "gwr/core.hpp"

namespace gwr {

// A human's scripted path, one cell per tick; the track holds its last
// cell once the script runs out.
struct HumanTrack {
    std::vector<Cell> cells;

    Cell at(std::uint64_t tick) const {
        if (cells.empty()) return Cell{0, 0};
        const std::size_t i = std::min<std::size_t>(tick, cells.size() - 1);
        return cells[i];
    }
};

struct GridWorld {
    std::int32_t width = 0;
    std::int32_t height = 0;
    std::set<Cell> obstacles;
    std::vector<HumanTrack> humans;
    Cell robot;
    Cell goal;
    std::uint64_t tick = 0;

    bool in_bounds(Cell c) const {
        return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
    }

    bool blocked(Cell c) const { return !in_bounds(c) || obstacles.count(c) > 0; }

    std::vector<Cell> human_cells() const {
        std::vector<Cell> cells;
        cells.reserve(humans.size());
        for (const HumanTrack& h : humans) cells.push_back(h.at(tick));
        return cells;
    }
};

// Throws std::invalid_argument naming the offending field.
void validate_world(const GridWorld& world);

// Shortest 4-connected route from `from` to `goal`, avoiding static
// obstacles and `avoid` cells. Already-there yields an empty move list;
// no path yields reachable=false. Deterministic for fixed inputs.
PlanPayload plan_route(const GridWorld& world, Cell from, Cell goal,
                       const std::set<Cell>& avoid = {});

}  // namespace gwr
