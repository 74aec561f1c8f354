#include "ppe/planners.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <limits>
#include <queue>

#include "ppe/errors.hpp"

namespace ppe {

namespace {

using Clock = std::chrono::steady_clock;
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

void check_endpoints(const GridScene& scene, const Region& region) {
    if (region.mask && region.mask->size() != scene.size())
        throw ShapeMismatch("region mask size does not match the scene");
    if (!region.contains(scene.index(scene.start)) || !region.contains(scene.index(scene.goal)))
        throw RegionExcludesEndpoints("region must contain start and goal");
}

bool passable(const GridScene& scene, const Region& region, Coord c) {
    return scene.is_free(c) && region.contains(scene.index(c));
}

void trace_path(const GridScene& scene, const std::vector<std::size_t>& parent, PlanResult& out) {
    for (std::size_t i = scene.index(scene.goal); i != kNone; i = parent[i])
        out.path.push_back(scene.coord(i));
    std::reverse(out.path.begin(), out.path.end());
    out.cost = static_cast<int>(out.path.size()) - 1;
    out.status = PlanStatus::Found;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Best-first search keyed by (g + h, insertion counter) with lazy deletion.
// With h = 0 this is Dijkstra.
PlanResult best_first(const GridScene& scene, const Region& region, Heuristic heuristic) {
    check_endpoints(scene, region);
    const auto t0 = Clock::now();

    struct Entry {
        int priority;
        std::uint64_t order;
        std::size_t cell;
        bool operator>(const Entry& o) const noexcept {
            return priority != o.priority ? priority > o.priority : order > o.order;
        }
    };
    auto h = [&](Coord c) { return heuristic == Heuristic::Manhattan ? manhattan(c, scene.goal) : 0; };

    std::vector<int> dist(scene.size(), std::numeric_limits<int>::max());
    std::vector<std::size_t> parent(scene.size(), kNone);
    std::vector<bool> settled(scene.size(), false);
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    std::uint64_t counter = 0;

    const std::size_t start = scene.index(scene.start);
    const std::size_t goal = scene.index(scene.goal);
    dist[start] = 0;
    open.push({h(scene.start), counter++, start});

    PlanResult out;
    while (!open.empty()) {
        const Entry top = open.top();
        open.pop();
        if (settled[top.cell]) continue;
        settled[top.cell] = true;
        ++out.expansions;
        if (top.cell == goal) {
            trace_path(scene, parent, out);
            break;
        }
        const Coord u = scene.coord(top.cell);
        for (Move m : kMoves) {
            const Coord v = step(u, m);
            if (!passable(scene, region, v)) continue;
            const std::size_t vi = scene.index(v);
            if (settled[vi]) continue;
            const int nd = dist[top.cell] + 1;
            if (nd < dist[vi]) {
                dist[vi] = nd;
                parent[vi] = top.cell;
                open.push({nd + h(v), counter++, vi});
            }
        }
    }
    out.wall_time = seconds_since(t0);
    return out;
}

}  // namespace

bool same_outcome(const PlanResult& a, const PlanResult& b) noexcept {
    return a.status == b.status && a.path == b.path && a.cost == b.cost &&
           a.expansions == b.expansions;
}

std::size_t Region::size(std::size_t total) const noexcept {
    if (!mask) return total;
    return static_cast<std::size_t>(std::count_if(mask->begin(), mask->end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

PlanResult bfs_shortest(const GridScene& scene, const Region& region) {
    check_endpoints(scene, region);
    const auto t0 = Clock::now();
    std::vector<std::size_t> parent(scene.size(), kNone);
    std::vector<bool> seen(scene.size(), false);
    std::deque<std::size_t> queue{scene.index(scene.start)};
    seen[queue.front()] = true;

    PlanResult out;
    const std::size_t goal = scene.index(scene.goal);
    while (!queue.empty()) {
        const std::size_t ui = queue.front();
        queue.pop_front();
        ++out.expansions;
        if (ui == goal) {
            trace_path(scene, parent, out);
            break;
        }
        const Coord u = scene.coord(ui);
        for (Move m : kMoves) {
            const Coord v = step(u, m);
            if (!passable(scene, region, v) || seen[scene.index(v)]) continue;
            seen[scene.index(v)] = true;
            parent[scene.index(v)] = ui;
            queue.push_back(scene.index(v));
        }
    }
    out.wall_time = seconds_since(t0);
    return out;
}

PlanResult dijkstra(const GridScene& scene, const Region& region) {
    return best_first(scene, region, Heuristic::Zero);
}

PlanResult astar(const GridScene& scene, const Region& region, Heuristic heuristic) {
    return best_first(scene, region, heuristic);
}

PlanResult run_planner(PlannerKind kind, const GridScene& scene, const Region& region) {
    return kind == PlannerKind::Dijkstra ? dijkstra(scene, region)
                                         : astar(scene, region, Heuristic::Manhattan);
}

}  // namespace ppe
