#include "ppe/rl_agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <sstream>

#include "ppe/errors.hpp"
#include "ppe/harness/csv.hpp"
#include "ppe/rng.hpp"

namespace ppe {

namespace {

using Clock = std::chrono::steady_clock;

std::size_t action_index(Move m) { return static_cast<std::size_t>(m); }

Move argmax(const std::array<double, 4>& v) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < 4; ++a)
        if (v[a] > v[best]) best = a;
    return static_cast<Move>(best);
}

}  // namespace

void RewardConfig::validate(const GridScene& scene) const {
    if (!(goal > 0.0)) throw ConfigError("rewards.goal must be > 0");
    if (!(step <= 0.0)) throw ConfigError("rewards.step must be <= 0");
    if (!(collision <= 0.0)) throw ConfigError("rewards.collision must be <= 0");
    if (!bias_map.empty()) {
        if (bias_map.size() != scene.size()) throw ConfigError("rewards.bias_map has wrong size");
        for (double b : bias_map)
            if (!(b <= 0.0)) throw ConfigError("rewards.bias_map entries must be <= 0");
    }
}

NavMDP NavMDP::from_scene(GridScene scene, RewardConfig rewards) {
    scene.validate();
    rewards.validate(scene);
    NavMDP mdp;
    mdp.max_steps = 4 * scene.width * scene.height;
    mdp.scene = std::move(scene);
    mdp.rewards = std::move(rewards);
    return mdp;
}

NavMDP::Transition NavMDP::step(Coord state, Move action) const {
    Transition t;
    const Coord target = ppe::step(state, action);
    const bool blocked = !scene.is_free(target);
    t.next = blocked ? state : target;
    if (t.next == scene.goal) {
        t.reward = rewards.goal;
        t.done = true;
    } else {
        t.reward = rewards.step + (blocked ? rewards.collision : 0.0);
    }
    if (!rewards.bias_map.empty()) t.reward += rewards.bias_map[scene.index(t.next)];
    return t;
}

std::vector<Coord> NavMDP::start_cells() const {
    std::vector<bool> reach(scene.size(), false);
    std::deque<Coord> queue{scene.goal};
    reach[scene.index(scene.goal)] = true;
    while (!queue.empty()) {
        const Coord u = queue.front();
        queue.pop_front();
        for (Move m : kMoves) {
            const Coord v = ppe::step(u, m);
            if (!scene.is_free(v) || reach[scene.index(v)]) continue;
            reach[scene.index(v)] = true;
            queue.push_back(v);
        }
    }
    std::vector<Coord> out;
    for (std::size_t i = 0; i < scene.size(); ++i)
        if (reach[i] && scene.coord(i) != scene.goal) out.push_back(scene.coord(i));
    return out;
}

void QHyperParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("rl.alpha must lie in (0, 1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("rl.gamma must lie in [0, 1)");
    if (episodes < 1) throw ConfigError("rl.episodes must be >= 1");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 &&
          epsilon_end <= 1.0))
        throw ConfigError("rl.epsilon values must lie in [0, 1]");
    if (!(decay_fraction > 0.0 && decay_fraction <= 1.0))
        throw ConfigError("rl.decay_fraction must lie in (0, 1]");
}

double QHyperParams::epsilon(int episode) const {
    const double horizon = decay_fraction * episodes;
    if (episode >= horizon) return epsilon_end;
    return epsilon_start + (epsilon_end - epsilon_start) * (episode / horizon);
}

QPolicy QPolicy::zeros(int height, int width) {
    QPolicy p;
    p.width = width;
    p.height = height;
    p.q.assign(std::size_t(width) * std::size_t(height), {0.0, 0.0, 0.0, 0.0});
    return p;
}

Move QPolicy::greedy(Coord c) const { return argmax(at(c)); }

QLearningResult q_learning(const NavMDP& mdp, const QHyperParams& hp, std::uint64_t seed) {
    hp.validate();
    const GridScene& s = mdp.scene;
    QLearningResult out;
    out.policy = QPolicy::zeros(s.height, s.width);
    out.policy.hyperparams = hp;
    out.policy.train_seed = seed;
    out.wins.reserve(std::size_t(hp.episodes));

    const auto starts = mdp.start_cells();
    Rng rng(derive_seed(seed, 0x0C1E));
    auto& q = out.policy.q;
    for (int ep = 0; ep < hp.episodes; ++ep) {
        const double eps = hp.epsilon(ep);
        Coord state = hp.random_starts && !starts.empty() ? starts[uniform_index(rng, starts.size())]
                                                          : s.start;
        bool won = false;
        for (int t = 0; t < mdp.max_steps; ++t) {
            auto& qs = q[s.index(state)];
            Move a;
            if (uniform01(rng) < eps) a = static_cast<Move>(uniform_index(rng, 4));
            else a = argmax(qs);
            const auto tr = mdp.step(state, a);
            double target = tr.reward;
            if (!tr.done) {
                const auto& qn = q[s.index(tr.next)];
                target += hp.gamma * *std::max_element(qn.begin(), qn.end());
            }
            auto& qsa = qs[action_index(a)];
            qsa += hp.alpha * (target - qsa);
            state = tr.next;
            if (tr.done) {
                won = true;
                break;
            }
        }
        out.wins.push_back(won ? 1 : 0);
    }
    return out;
}

EvalResult evaluate(const QPolicy& policy, const NavMDP& mdp, int episodes, StartMode mode,
                    std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be > 0");
    const GridScene& s = mdp.scene;
    if (policy.width != s.width || policy.height != s.height)
        throw ShapeMismatch("policy and environment sizes differ");
    const auto t0 = Clock::now();
    const auto starts = mdp.start_cells();
    Rng rng(derive_seed(seed, 0xE7A1));

    int wins = 0;
    double steps_total = 0.0;
    for (int ep = 0; ep < episodes; ++ep) {
        Coord state = mode == StartMode::Randomized && !starts.empty()
                          ? starts[uniform_index(rng, starts.size())]
                          : s.start;
        int t = 0;
        bool won = false;
        for (; t < mdp.max_steps; ++t) {
            const auto tr = mdp.step(state, policy.greedy(state));
            state = tr.next;
            if (tr.done) {
                won = true;
                ++t;
                break;
            }
        }
        wins += won ? 1 : 0;
        steps_total += t;
    }
    EvalResult r;
    r.episodes = episodes;
    r.win_rate = 100.0 * wins / episodes;
    r.mean_steps = steps_total / episodes;
    r.run_time = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
}

ShiftReport shift_experiment(const NavMDP& env_a, const NavMDP& env_b, const QHyperParams& hp,
                             std::uint64_t seed, int eval_episodes) {
    if (eval_episodes < 1) throw std::invalid_argument("shift_experiment: eval_episodes must be > 0");
    ShiftReport report;
    const auto t0 = Clock::now();
    const auto trained = q_learning(env_a, hp, seed);
    report.train_time = std::chrono::duration<double>(Clock::now() - t0).count();

    const std::uint64_t eval_seed = derive_seed(seed, 0xE7A5);
    const auto a = evaluate(trained.policy, env_a, eval_episodes, StartMode::Randomized, eval_seed);
    const auto b = evaluate(trained.policy, env_b, eval_episodes, StartMode::Randomized, eval_seed);
    report.rows.push_back({"A", a.win_rate, a.run_time, a.episodes});
    report.rows.push_back({"B", b.win_rate, b.run_time, b.episodes});
    return report;
}

std::string shift_report_csv(const ShiftReport& report) {
    CsvWriter csv({"env_id", "win_rate_pct", "run_time_s", "episodes"});
    for (const auto& row : report.rows)
        csv.row({row.env_id, format_double(row.win_rate), format_double(row.run_time),
                 std::to_string(row.episodes)});
    return csv.str();
}

}  // namespace ppe
