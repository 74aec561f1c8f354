#pragma once

// Reference implementations used only by tests. They share no code with the
// library so agreement is meaningful.

#include <algorithm>
#include <array>
#include <climits>
#include <cmath>
#include <cstdint>
#include <deque>
#include <utility>
#include <vector>

#include "ppe/grid_env.hpp"

namespace oracle {

inline constexpr int kUnreached = INT_MAX;

/// Breadth-first distance field from `src`. `allowed` may be empty.
inline std::vector<int> distances(const ppe::GridScene& s, ppe::Coord src,
                                  const std::vector<std::uint8_t>& allowed = {}) {
    const int h = s.height, w = s.width;
    auto ok = [&](int r, int c) {
        if (r < 0 || c < 0 || r >= h || c >= w) return false;
        const std::size_t i = std::size_t(r) * std::size_t(w) + std::size_t(c);
        return s.cells[i] == ppe::Cell::Free && (allowed.empty() || allowed[i]);
    };
    std::vector<int> d(std::size_t(h) * std::size_t(w), kUnreached);
    if (!ok(src.row, src.col)) return d;
    std::deque<std::pair<int, int>> frontier{{src.row, src.col}};
    d[std::size_t(src.row) * std::size_t(w) + std::size_t(src.col)] = 0;
    while (!frontier.empty()) {
        const auto [r, c] = frontier.front();
        frontier.pop_front();
        const int here = d[std::size_t(r) * std::size_t(w) + std::size_t(c)];
        const int nr[4] = {r + 1, r - 1, r, r};
        const int nc[4] = {c, c, c + 1, c - 1};
        for (int k = 0; k < 4; ++k) {
            if (!ok(nr[k], nc[k])) continue;
            int& v = d[std::size_t(nr[k]) * std::size_t(w) + std::size_t(nc[k])];
            if (v == kUnreached) {
                v = here + 1;
                frontier.emplace_back(nr[k], nc[k]);
            }
        }
    }
    return d;
}

/// Optimal start-goal cost, or -1 when unreachable.
inline int optimal_cost(const ppe::GridScene& s, const std::vector<std::uint8_t>& allowed = {}) {
    const auto d = distances(s, s.start, allowed);
    const int v = d[s.index(s.goal)];
    return v == kUnreached ? -1 : v;
}

/// Checks a path is a 4-connected walk over free (and allowed) cells from
/// start to goal.
inline bool valid_path(const ppe::GridScene& s, const std::vector<ppe::Coord>& path,
                       const std::vector<std::uint8_t>& allowed = {}) {
    if (path.empty() || path.front() != s.start || path.back() != s.goal) return false;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (!s.is_free(path[i])) return false;
        if (!allowed.empty() && !allowed[s.index(path[i])]) return false;
        if (i > 0 && ppe::manhattan(path[i - 1], path[i]) != 1) return false;
    }
    return true;
}

/// Value iteration on the navigation MDP with the same reward rules as the
/// library. Returns Q*(s, a) per cell in Up, Right, Down, Left order.
struct Rewards {
    double goal = 1.0;
    double step = -0.01;
    double collision = -0.1;
    double shift = 0.0;  // constant added to every reward
};

inline std::vector<std::array<double, 4>> value_iteration(const ppe::GridScene& s, const Rewards& rw,
                                                          double gamma, int iters = 5000) {
    const int h = s.height, w = s.width;
    const std::size_t n = std::size_t(h) * std::size_t(w);
    std::vector<double> v(n, 0.0);
    std::vector<std::array<double, 4>> q(n, {0, 0, 0, 0});
    const int dr[4] = {-1, 0, 1, 0};
    const int dc[4] = {0, 1, 0, -1};
    for (int it = 0; it < iters; ++it) {
        std::vector<double> nv(n, 0.0);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const std::size_t i = std::size_t(r) * std::size_t(w) + std::size_t(c);
                if (s.cells[i] != ppe::Cell::Free || ppe::Coord{r, c} == s.goal) continue;
                double best = -1e300;
                for (int a = 0; a < 4; ++a) {
                    int tr = r + dr[a], tc = c + dc[a];
                    double reward = rw.step;
                    if (!s.is_free({tr, tc})) {
                        tr = r;
                        tc = c;
                        reward += rw.collision;
                    }
                    const std::size_t j = std::size_t(tr) * std::size_t(w) + std::size_t(tc);
                    double target;
                    if (ppe::Coord{tr, tc} == s.goal) target = rw.goal + rw.shift;
                    else target = reward + rw.shift + gamma * v[j];
                    q[i][std::size_t(a)] = target;
                    best = std::max(best, target);
                }
                nv[i] = best;
            }
        v = nv;
    }
    return q;
}

/// Indices of all maximal actions (within tol).
inline std::vector<int> argmax_set(const std::array<double, 4>& q, double tol = 1e-9) {
    const double m = *std::max_element(q.begin(), q.end());
    std::vector<int> out;
    for (int a = 0; a < 4; ++a)
        if (q[std::size_t(a)] >= m - tol) out.push_back(a);
    return out;
}

}  // namespace oracle
