#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ppe/grid_env.hpp"

namespace ppe {

enum class PlanStatus : std::uint8_t { Found, NoPath };

/// Instrumented planner output. `expansions` counts settled (popped) nodes.
struct PlanResult {
    PlanStatus status = PlanStatus::NoPath;
    std::vector<Coord> path;
    int cost = 0;
    std::size_t expansions = 0;
    double wall_time = 0.0;  // seconds

    bool found() const noexcept { return status == PlanStatus::Found; }
};

/// Same status, path, cost and expansions; wall time is ignored.
bool same_outcome(const PlanResult& a, const PlanResult& b) noexcept;

/// Optional restriction of the search to a subset of cells.
struct Region {
    std::optional<std::vector<std::uint8_t>> mask;

    static Region full() { return {}; }
    static Region from_mask(std::vector<std::uint8_t> m) { return {std::move(m)}; }

    bool contains(std::size_t i) const noexcept { return !mask || (*mask)[i] != 0; }
    /// Cells in the region (free or not); `total` when unrestricted.
    std::size_t size(std::size_t total) const noexcept;
};

enum class Heuristic : std::uint8_t { Zero, Manhattan };

PlanResult bfs_shortest(const GridScene& scene, const Region& region = {});
PlanResult dijkstra(const GridScene& scene, const Region& region = {});
PlanResult astar(const GridScene& scene, const Region& region = {},
                 Heuristic heuristic = Heuristic::Manhattan);

enum class PlannerKind : std::uint8_t { Dijkstra, AStar };

/// Dijkstra, or A* with the Manhattan heuristic.
PlanResult run_planner(PlannerKind kind, const GridScene& scene, const Region& region = {});

}  // namespace ppe
