#pragma once

#include <deque>
#include <optional>

#include "gwr/core.hpp"

namespace gwr {

// The limited-capacity workspace: at most one conscious content per
// cycle, plus a bounded window of recently broadcast keys. Chunk
// broadcasts record their interior keys in order.
struct WorkspaceState {
    CycleIndex cycle = 0;
    std::optional<Content> conscious;
    std::deque<ContentKey> history;
    std::size_t history_bound = 64;

    void remember(ContentKey key) {
        history.push_back(key);
        while (history.size() > history_bound) history.pop_front();
    }

    std::size_t history_count(ContentKey key) const {
        std::size_t n = 0;
        for (ContentKey k : history) {
            if (k == key) ++n;
        }
        return n;
    }
};

}  // namespace gwr
