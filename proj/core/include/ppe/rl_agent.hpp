#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ppe/grid_env.hpp"

namespace ppe {

/// Rewards for the navigation MDP.
///
/// Entering the goal pays `goal`; any other move pays `step`, plus
/// `collision` when the move is blocked. `bias_map`, when non-empty, adds a
/// non-positive per-cell penalty on entering that cell (e.g. discouraging the
/// left lane of a corridor).
struct RewardConfig {
    double goal = 1.0;
    double step = -0.01;
    double collision = -0.1;
    std::vector<double> bias_map;

    /// Throws ConfigError.
    void validate(const GridScene& scene) const;
};

struct NavMDP {
    GridScene scene;
    RewardConfig rewards;
    int max_steps = 0;

    /// max_steps defaults to 4 * width * height.
    static NavMDP from_scene(GridScene scene, RewardConfig rewards = {});

    struct Transition {
        Coord next;
        double reward = 0.0;
        bool done = false;
    };
    /// Deterministic; blocked moves leave the state unchanged.
    Transition step(Coord state, Move action) const;

    /// Free non-goal cells from which the goal is reachable, in index order.
    std::vector<Coord> start_cells() const;
};

struct QHyperParams {
    double alpha = 0.1;
    double gamma = 0.95;
    int episodes = 2000;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double decay_fraction = 0.8;  // epsilon decays linearly over this share of episodes
    bool random_starts = true;

    void validate() const;
    double epsilon(int episode) const;
};

struct QPolicy {
    int width = 0;
    int height = 0;
    std::vector<std::array<double, 4>> q;  // per cell, canonical action order
    QHyperParams hyperparams;
    std::uint64_t train_seed = 0;

    static QPolicy zeros(int height, int width);
    /// First maximal action in Up, Right, Down, Left order.
    Move greedy(Coord c) const;
    const std::array<double, 4>& at(Coord c) const {
        return q[std::size_t(c.row) * std::size_t(width) + std::size_t(c.col)];
    }
};

struct QLearningResult {
    QPolicy policy;
    std::vector<std::uint8_t> wins;  // per training episode
};

/// One-step Q-learning with epsilon-greedy exploration.
QLearningResult q_learning(const NavMDP& mdp, const QHyperParams& hp, std::uint64_t seed);

enum class StartMode : std::uint8_t { Fixed, Randomized };

struct EvalResult {
    double win_rate = 0.0;  // percent
    double mean_steps = 0.0;
    double run_time = 0.0;  // seconds
    int episodes = 0;
};

/// Greedy rollouts. Randomized starts draw uniformly from start_cells().
EvalResult evaluate(const QPolicy& policy, const NavMDP& mdp, int episodes,
                    StartMode mode = StartMode::Fixed, std::uint64_t seed = 0);

struct ShiftRow {
    std::string env_id;
    double win_rate = 0.0;
    double run_time = 0.0;  // evaluation wall time, seconds
    int episodes = 0;
};

struct ShiftReport {
    std::vector<ShiftRow> rows;
    double train_time = 0.0;  // seconds, reported separately from evaluation
};

/// Trains on `env_a` only and evaluates the frozen greedy policy on both
/// environments with the same randomized-start seed.
ShiftReport shift_experiment(const NavMDP& env_a, const NavMDP& env_b, const QHyperParams& hp,
                             std::uint64_t seed, int eval_episodes = 50);

/// Columns: env_id, win_rate_pct, run_time_s, episodes.
std::string shift_report_csv(const ShiftReport& report);

}  // namespace ppe
