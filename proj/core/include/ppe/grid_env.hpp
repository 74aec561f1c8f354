#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ppe {

struct Coord {
    int row = 0;
    int col = 0;

    friend constexpr auto operator<=>(const Coord&, const Coord&) = default;
};

constexpr int manhattan(Coord a, Coord b) noexcept {
    return (a.row > b.row ? a.row - b.row : b.row - a.row) +
           (a.col > b.col ? a.col - b.col : b.col - a.col);
}

/// Moves in canonical order. Every neighbor loop in the project uses it.
enum class Move : std::uint8_t { Up = 0, Right = 1, Down = 2, Left = 3 };

inline constexpr std::array<Move, 4> kMoves{Move::Up, Move::Right, Move::Down, Move::Left};
inline constexpr std::array<int, 4> kMoveDRow{-1, 0, 1, 0};
inline constexpr std::array<int, 4> kMoveDCol{0, 1, 0, -1};

constexpr Coord step(Coord c, Move m) noexcept {
    const auto i = static_cast<std::size_t>(m);
    return {c.row + kMoveDRow[i], c.col + kMoveDCol[i]};
}

enum class Cell : std::uint8_t { Free = 0, Obstacle = 1 };

enum class FamilyId : std::uint8_t { UniformClutter = 0, Rooms, Maze, Corridors, DiagonalWalls };

inline constexpr std::array<FamilyId, 5> kAllFamilies{
    FamilyId::UniformClutter, FamilyId::Rooms, FamilyId::Maze, FamilyId::Corridors,
    FamilyId::DiagonalWalls};

std::string_view family_name(FamilyId id) noexcept;
std::optional<FamilyId> parse_family_name(std::string_view name) noexcept;

/// A scenario family and its parameters.
///
/// Parameter meaning depends on the family:
///   UniformClutter  clutter = obstacle probability, in [0, 0.4]
///   Rooms           spacing = room pitch [6, 30]; gap = door width [1, 3];
///                   clutter = in-room obstacle probability [0, 0.2]
///   Maze            clutter = braid probability (extra wall removal) [0, 0.3]
///   Corridors       spacing = wall pitch [3, 20]; gap = openings per wall [1, 5];
///                   clutter [0, 0.2]
///   DiagonalWalls   spacing = barrier pitch [6, 30]; gap = openings per barrier [1, 5];
///                   clutter [0, 0.2]
/// Unused parameters are ignored.
struct ScenarioFamily {
    FamilyId id = FamilyId::UniformClutter;
    double clutter = 0.2;
    int spacing = 0;
    int gap = 0;

    /// Family with its documented default parameters.
    static ScenarioFamily defaults(FamilyId id);
    static ScenarioFamily uniform_clutter(double p);

    /// Throws ConfigError when a parameter is outside its documented range.
    void validate() const;

    friend bool operator==(const ScenarioFamily&, const ScenarioFamily&) = default;
};

/// Occupancy grid with a start and a goal.
struct GridScene {
    int width = 60;
    int height = 60;
    std::vector<Cell> cells;
    Coord start;
    Coord goal;
    ScenarioFamily family;
    std::uint64_t seed = 0;

    /// Obstacle-free scene; used for hand-built fixtures.
    static GridScene empty(int height, int width, Coord start, Coord goal);

    std::size_t size() const noexcept { return cells.size(); }
    bool in_bounds(Coord c) const noexcept {
        return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width;
    }
    std::size_t index(Coord c) const noexcept {
        return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(c.col);
    }
    Coord coord(std::size_t i) const noexcept {
        return {static_cast<int>(i / static_cast<std::size_t>(width)),
                static_cast<int>(i % static_cast<std::size_t>(width))};
    }
    bool is_free(Coord c) const noexcept {
        return in_bounds(c) && cells[index(c)] == Cell::Free;
    }
    void set(Coord c, Cell v) { cells[index(c)] = v; }
    std::size_t obstacle_count() const noexcept;

    /// Throws std::invalid_argument if start/goal are not distinct free
    /// in-bounds cells or the cell vector has the wrong size.
    void validate() const;
};

/// Same grid, start and goal. Family and seed are provenance only.
bool same_layout(const GridScene& a, const GridScene& b) noexcept;

struct ImageRGB {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

    std::array<std::uint8_t, 3> at(int row, int col) const;
};

inline constexpr std::array<std::uint8_t, 3> kFreeColor{255, 255, 255};
inline constexpr std::array<std::uint8_t, 3> kObstacleColor{0, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kStartColor{255, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kGoalColor{0, 255, 0};

struct PathLabel {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;  // 1 on the path
    std::vector<Coord> path_cells;   // start ... goal

    int cost() const noexcept { return static_cast<int>(path_cells.size()) - 1; }
};

/// Maximum rejection-sampling attempts for generation and perturbation.
inline constexpr int kMaxGenerationAttempts = 1000;

/// Deterministic scene for (family, seed). Throws GenerationExhausted.
GridScene generate_scene(const ScenarioFamily& family, std::uint64_t seed, int height = 60,
                         int width = 60);

ImageRGB render_scene(const GridScene& scene);

/// Inverse of render_scene. Throws std::invalid_argument on pixels outside
/// the four class colors or a missing/duplicated start or goal.
GridScene parse_image(const ImageRGB& image);

/// Canonical BFS shortest path (Up, Right, Down, Left; FIFO). Throws NoPath.
PathLabel compute_label(const GridScene& scene);

/// Toggles exactly k cells other than start/goal, keeping the scene solvable.
/// Throws GenerationExhausted.
GridScene perturb_scene(const GridScene& scene, int k, std::uint64_t seed);

/// 4-connected reachability between start and goal.
bool is_solvable(const GridScene& scene);

}  // namespace ppe
