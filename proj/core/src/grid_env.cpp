#include "ppe/grid_env.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "ppe/errors.hpp"
#include "ppe/rng.hpp"

namespace ppe {

namespace {

constexpr std::array<std::string_view, 5> kFamilyNames{
    "uniform_clutter", "rooms", "maze", "corridors", "diagonal_walls"};

void require_range(const char* what, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi)) {
        std::ostringstream os;
        os << "family parameter '" << what << "' = " << v << " outside [" << lo << ", " << hi
           << "]";
        throw ConfigError(os.str());
    }
}

using Grid = std::vector<Cell>;

struct Canvas {
    int h;
    int w;
    Grid cells;

    Canvas(int height, int width) : h(height), w(width), cells(height * width, Cell::Free) {}
    Cell& at(int r, int c) { return cells[static_cast<std::size_t>(r) * w + c]; }
    bool inside(int r, int c) const { return r >= 0 && c >= 0 && r < h && c < w; }
};

void sprinkle(Canvas& cv, double p, Rng& rng) {
    if (p <= 0.0) return;
    for (auto& cell : cv.cells) {
        if (bernoulli(rng, p)) cell = Cell::Obstacle;
    }
}

void build_rooms(Canvas& cv, const ScenarioFamily& f, Rng& rng) {
    const int pitch = f.spacing;
    const int r_off = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(pitch)));
    const int c_off = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(pitch)));
    std::vector<int> wall_rows;
    std::vector<int> wall_cols;
    for (int r = r_off + pitch - 1; r < cv.h - 1; r += pitch) wall_rows.push_back(r);
    for (int c = c_off + pitch - 1; c < cv.w - 1; c += pitch) wall_cols.push_back(c);

    // Clutter first so walls and doors overwrite it.
    sprinkle(cv, f.clutter, rng);
    for (int r : wall_rows)
        for (int c = 0; c < cv.w; ++c) cv.at(r, c) = Cell::Obstacle;
    for (int c : wall_cols)
        for (int r = 0; r < cv.h; ++r) cv.at(r, c) = Cell::Obstacle;

    // One door per wall segment between adjacent rooms.
    auto segments = [](const std::vector<int>& walls, int extent) {
        std::vector<std::pair<int, int>> segs;
        int lo = 0;
        for (int wpos : walls) {
            if (wpos - 1 >= lo) segs.emplace_back(lo, wpos - 1);
            lo = wpos + 1;
        }
        if (extent - 1 >= lo) segs.emplace_back(lo, extent - 1);
        return segs;
    };
    const auto col_segs = segments(wall_cols, cv.w);
    const auto row_segs = segments(wall_rows, cv.h);
    auto door = [&](int lo, int hi) {
        const int len = hi - lo + 1;
        const int width = std::min(f.gap, len);
        return lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(len - width + 1)));
    };
    for (int r : wall_rows) {
        for (auto [lo, hi] : col_segs) {
            const int width = std::min(f.gap, hi - lo + 1);
            const int at = door(lo, hi);
            for (int c = at; c < at + width; ++c) cv.at(r, c) = Cell::Free;
        }
    }
    for (int c : wall_cols) {
        for (auto [lo, hi] : row_segs) {
            const int width = std::min(f.gap, hi - lo + 1);
            const int at = door(lo, hi);
            for (int r = at; r < at + width; ++r) cv.at(r, c) = Cell::Free;
        }
    }
}

// Recursive division: walls on odd indices, openings on even indices.
void divide(Canvas& cv, int r0, int r1, int c0, int c1, Rng& rng) {
    const int hgt = r1 - r0 + 1;
    const int wid = c1 - c0 + 1;
    if (hgt < 3 || wid < 3) return;
    bool horizontal;
    if (hgt > wid) horizontal = true;
    else if (wid > hgt) horizontal = false;
    else horizontal = bernoulli(rng, 0.5);

    auto pick_odd = [&](int lo, int hi) {  // odd index strictly inside (lo, hi)
        std::vector<int> c;
        for (int v = lo + 1; v < hi; ++v)
            if (v % 2 == 1) c.push_back(v);
        return c.empty() ? -1 : c[uniform_index(rng, c.size())];
    };
    auto pick_even = [&](int lo, int hi) {
        std::vector<int> c;
        for (int v = lo; v <= hi; ++v)
            if (v % 2 == 0) c.push_back(v);
        return c.empty() ? lo : c[uniform_index(rng, c.size())];
    };

    if (horizontal) {
        const int y = pick_odd(r0, r1);
        if (y < 0) return;
        const int hole = pick_even(c0, c1);
        for (int c = c0; c <= c1; ++c)
            if (c != hole) cv.at(y, c) = Cell::Obstacle;
        divide(cv, r0, y - 1, c0, c1, rng);
        divide(cv, y + 1, r1, c0, c1, rng);
    } else {
        const int x = pick_odd(c0, c1);
        if (x < 0) return;
        const int hole = pick_even(r0, r1);
        for (int r = r0; r <= r1; ++r)
            if (r != hole) cv.at(r, x) = Cell::Obstacle;
        divide(cv, r0, r1, c0, x - 1, rng);
        divide(cv, r0, r1, x + 1, c1, rng);
    }
}

void build_maze(Canvas& cv, const ScenarioFamily& f, Rng& rng) {
    divide(cv, 0, cv.h - 1, 0, cv.w - 1, rng);
    if (f.clutter > 0.0) {
        for (auto& cell : cv.cells)
            if (cell == Cell::Obstacle && bernoulli(rng, f.clutter)) cell = Cell::Free;
    }
}

void build_corridors(Canvas& cv, const ScenarioFamily& f, Rng& rng) {
    const bool horizontal = bernoulli(rng, 0.5);
    const int along = horizontal ? cv.h : cv.w;
    const int across = horizontal ? cv.w : cv.h;
    const int off = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(f.spacing)));
    sprinkle(cv, f.clutter, rng);
    for (int line = off + f.spacing - 1; line < along - 1; line += f.spacing) {
        std::vector<bool> open(static_cast<std::size_t>(across), false);
        for (int g = 0; g < f.gap; ++g) {
            const int at = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(across - 1)));
            open[static_cast<std::size_t>(at)] = true;
            open[static_cast<std::size_t>(at) + 1] = true;
        }
        for (int t = 0; t < across; ++t) {
            const Cell v = open[static_cast<std::size_t>(t)] ? Cell::Free : Cell::Obstacle;
            if (horizontal) cv.at(line, t) = v;
            else cv.at(t, line) = v;
        }
    }
}

void build_diagonal_walls(Canvas& cv, const ScenarioFamily& f, Rng& rng) {
    // Anti-diagonal (r + c = k) or diagonal (r - c = k) staircases; a
    // one-cell staircase already blocks 4-connected motion.
    const bool anti = bernoulli(rng, 0.5);
    const int span = cv.h + cv.w - 1;
    const int off = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(f.spacing)));
    sprinkle(cv, f.clutter, rng);
    for (int k = off + f.spacing / 2; k < span; k += f.spacing) {
        std::vector<std::pair<int, int>> line;
        for (int r = 0; r < cv.h; ++r) {
            const int c = anti ? k - r : r - k + (cv.w - 1);
            if (c >= 0 && c < cv.w) line.emplace_back(r, c);
        }
        if (line.size() < 3) continue;
        std::vector<bool> open(line.size(), false);
        for (int g = 0; g < f.gap; ++g) open[uniform_index(rng, line.size())] = true;
        for (std::size_t i = 0; i < line.size(); ++i)
            cv.at(line[i].first, line[i].second) = open[i] ? Cell::Free : Cell::Obstacle;
    }
}

std::vector<int> bfs_distances(const GridScene& s, Coord from) {
    std::vector<int> dist(s.size(), -1);
    std::deque<Coord> queue;
    dist[s.index(from)] = 0;
    queue.push_back(from);
    while (!queue.empty()) {
        const Coord u = queue.front();
        queue.pop_front();
        for (Move m : kMoves) {
            const Coord v = step(u, m);
            if (!s.is_free(v) || dist[s.index(v)] >= 0) continue;
            dist[s.index(v)] = dist[s.index(u)] + 1;
            queue.push_back(v);
        }
    }
    return dist;
}

}  // namespace

std::string_view family_name(FamilyId id) noexcept {
    return kFamilyNames[static_cast<std::size_t>(id)];
}

std::optional<FamilyId> parse_family_name(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kFamilyNames.size(); ++i)
        if (kFamilyNames[i] == name) return static_cast<FamilyId>(i);
    return std::nullopt;
}

ScenarioFamily ScenarioFamily::defaults(FamilyId id) {
    switch (id) {
        case FamilyId::UniformClutter: return {id, 0.2, 0, 0};
        case FamilyId::Rooms: return {id, 0.05, 12, 2};
        case FamilyId::Maze: return {id, 0.0, 0, 0};
        case FamilyId::Corridors: return {id, 0.05, 5, 2};
        case FamilyId::DiagonalWalls: return {id, 0.05, 10, 3};
    }
    return {};
}

ScenarioFamily ScenarioFamily::uniform_clutter(double p) {
    return {FamilyId::UniformClutter, p, 0, 0};
}

void ScenarioFamily::validate() const {
    switch (id) {
        case FamilyId::UniformClutter: require_range("clutter", clutter, 0.0, 0.4); break;
        case FamilyId::Rooms:
            require_range("spacing", spacing, 6, 30);
            require_range("gap", gap, 1, 3);
            require_range("clutter", clutter, 0.0, 0.2);
            break;
        case FamilyId::Maze: require_range("clutter", clutter, 0.0, 0.3); break;
        case FamilyId::Corridors:
            require_range("spacing", spacing, 3, 20);
            require_range("gap", gap, 1, 5);
            require_range("clutter", clutter, 0.0, 0.2);
            break;
        case FamilyId::DiagonalWalls:
            require_range("spacing", spacing, 6, 30);
            require_range("gap", gap, 1, 5);
            require_range("clutter", clutter, 0.0, 0.2);
            break;
        default: throw ConfigError("unknown scenario family");
    }
}

GridScene GridScene::empty(int height, int width, Coord start, Coord goal) {
    GridScene s;
    s.height = height;
    s.width = width;
    s.cells.assign(static_cast<std::size_t>(height) * width, Cell::Free);
    s.start = start;
    s.goal = goal;
    s.validate();
    return s;
}

std::size_t GridScene::obstacle_count() const noexcept {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), Cell::Obstacle));
}

void GridScene::validate() const {
    if (width < 1 || height < 1 ||
        cells.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw std::invalid_argument("scene: bad dimensions");
    if (start == goal) throw std::invalid_argument("scene: start equals goal");
    if (!is_free(start)) throw std::invalid_argument("scene: start is not a free in-bounds cell");
    if (!is_free(goal)) throw std::invalid_argument("scene: goal is not a free in-bounds cell");
}

bool same_layout(const GridScene& a, const GridScene& b) noexcept {
    return a.width == b.width && a.height == b.height && a.start == b.start &&
           a.goal == b.goal && a.cells == b.cells;
}

bool is_solvable(const GridScene& scene) {
    return bfs_distances(scene, scene.start)[scene.index(scene.goal)] >= 0;
}

GridScene generate_scene(const ScenarioFamily& family, std::uint64_t seed, int height,
                         int width) {
    family.validate();
    if (height < 3 || width < 3) throw std::invalid_argument("scene dimensions must be >= 3");
    Rng rng(derive_seed(seed, 0x5CE7E + static_cast<std::uint64_t>(family.id)));
    const int min_dist = (width + height) / 2;

    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        Canvas cv(height, width);
        switch (family.id) {
            case FamilyId::UniformClutter: sprinkle(cv, family.clutter, rng); break;
            case FamilyId::Rooms: build_rooms(cv, family, rng); break;
            case FamilyId::Maze: build_maze(cv, family, rng); break;
            case FamilyId::Corridors: build_corridors(cv, family, rng); break;
            case FamilyId::DiagonalWalls: build_diagonal_walls(cv, family, rng); break;
        }
        std::vector<std::size_t> free_cells;
        for (std::size_t i = 0; i < cv.cells.size(); ++i)
            if (cv.cells[i] == Cell::Free) free_cells.push_back(i);
        if (free_cells.size() < 2) continue;

        GridScene scene;
        scene.height = height;
        scene.width = width;
        scene.cells = std::move(cv.cells);
        scene.family = family;
        scene.seed = seed;

        // Independent uniform draws conditioned on distance give a uniform
        // distribution over admissible (start, goal) pairs.
        bool placed = false;
        for (int draw = 0; draw < 200 && !placed; ++draw) {
            const Coord a = scene.coord(free_cells[uniform_index(rng, free_cells.size())]);
            const Coord b = scene.coord(free_cells[uniform_index(rng, free_cells.size())]);
            if (manhattan(a, b) >= min_dist) {
                scene.start = a;
                scene.goal = b;
                placed = true;
            }
        }
        if (!placed || !is_solvable(scene)) continue;
        return scene;
    }
    throw GenerationExhausted("generate_scene: no solvable scene for family '" +
                              std::string(family_name(family.id)) + "' after " +
                              std::to_string(kMaxGenerationAttempts) + " attempts");
}

std::array<std::uint8_t, 3> ImageRGB::at(int row, int col) const {
    const auto i = (static_cast<std::size_t>(row) * width + col) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

ImageRGB render_scene(const GridScene& scene) {
    ImageRGB img;
    img.width = scene.width;
    img.height = scene.height;
    img.pixels.resize(scene.size() * 3);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Coord c = scene.coord(i);
        const auto& color = c == scene.start  ? kStartColor
                            : c == scene.goal ? kGoalColor
                            : scene.cells[i] == Cell::Obstacle ? kObstacleColor
                                                               : kFreeColor;
        std::copy(color.begin(), color.end(), img.pixels.begin() + static_cast<long>(i * 3));
    }
    return img;
}

GridScene parse_image(const ImageRGB& image) {
    if (image.width < 1 || image.height < 1 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3)
        throw std::invalid_argument("parse_image: bad dimensions");
    GridScene s;
    s.width = image.width;
    s.height = image.height;
    s.cells.assign(static_cast<std::size_t>(s.width) * s.height, Cell::Free);
    int starts = 0;
    int goals = 0;
    for (int r = 0; r < s.height; ++r) {
        for (int c = 0; c < s.width; ++c) {
            const auto px = image.at(r, c);
            if (px == kFreeColor) continue;
            if (px == kObstacleColor) s.set({r, c}, Cell::Obstacle);
            else if (px == kStartColor) { s.start = {r, c}; ++starts; }
            else if (px == kGoalColor) { s.goal = {r, c}; ++goals; }
            else throw std::invalid_argument("parse_image: pixel outside the class palette");
        }
    }
    if (starts != 1 || goals != 1)
        throw std::invalid_argument("parse_image: expected exactly one start and one goal");
    s.validate();
    return s;
}

PathLabel compute_label(const GridScene& scene) {
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> parent(scene.size(), kNone);
    std::vector<bool> seen(scene.size(), false);
    std::deque<Coord> queue{scene.start};
    seen[scene.index(scene.start)] = true;
    while (!queue.empty()) {
        const Coord u = queue.front();
        queue.pop_front();
        if (u == scene.goal) break;
        for (Move m : kMoves) {
            const Coord v = step(u, m);
            if (!scene.is_free(v) || seen[scene.index(v)]) continue;
            seen[scene.index(v)] = true;
            parent[scene.index(v)] = scene.index(u);
            queue.push_back(v);
        }
    }
    if (!seen[scene.index(scene.goal)]) throw NoPath("compute_label: goal unreachable");

    PathLabel label;
    label.width = scene.width;
    label.height = scene.height;
    label.mask.assign(scene.size(), 0);
    for (std::size_t i = scene.index(scene.goal); i != kNone; i = parent[i]) {
        label.path_cells.push_back(scene.coord(i));
        label.mask[i] = 1;
    }
    std::reverse(label.path_cells.begin(), label.path_cells.end());
    return label;
}

GridScene perturb_scene(const GridScene& scene, int k, std::uint64_t seed) {
    if (k < 0) throw std::invalid_argument("perturb_scene: k must be >= 0");
    if (k == 0) return scene;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Coord c = scene.coord(i);
        if (c != scene.start && c != scene.goal) candidates.push_back(i);
    }
    if (static_cast<std::size_t>(k) > candidates.size())
        throw std::invalid_argument("perturb_scene: k exceeds the number of toggleable cells");

    Rng rng(derive_seed(seed, 0x9E27));
    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        // Partial Fisher-Yates: the first k entries are a uniform k-subset.
        auto pool = candidates;
        for (int i = 0; i < k; ++i) {
            const std::size_t j = static_cast<std::size_t>(i) +
                                  uniform_index(rng, pool.size() - static_cast<std::size_t>(i));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        }
        GridScene out = scene;
        for (int i = 0; i < k; ++i) {
            auto& cell = out.cells[pool[static_cast<std::size_t>(i)]];
            cell = cell == Cell::Free ? Cell::Obstacle : Cell::Free;
        }
        if (is_solvable(out)) return out;
    }
    throw GenerationExhausted("perturb_scene: no solvable perturbation after " +
                              std::to_string(kMaxGenerationAttempts) + " attempts");
}

}  // namespace ppe
