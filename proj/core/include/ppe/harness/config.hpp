#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppe/encoder.hpp"
#include "ppe/grid_env.hpp"
#include "ppe/masked_planning.hpp"
#include "ppe/planners.hpp"
#include "ppe/rl_agent.hpp"

namespace ppe {

struct RlExperimentConfig {
    QHyperParams hyperparams{.alpha = 0.5, .gamma = 0.95, .episodes = 3000};
    int grid_size = 10;
    double clutter = 0.15;
    int perturb_k = 12;
    int eval_episodes = 50;
};

struct IncrementalConfig {
    double replay_ratio = 0.5;  // share of replayed old samples in the fine-tune mix
    int base_count = 2000;      // old-family samples used to train the base model
    int new_count = 500;        // new-family samples
    int fine_tune_epochs = 6;
};

/// 8 epochs of Adam, batch 16, lr 3e-3, positive weight 30.
TrainConfig default_train_config();

/// Everything an experiment run needs. Loaded from JSON, where every key is
/// optional but unknown keys are rejected; CLI flags override loaded values.
struct ExperimentConfig {
    std::optional<std::string> dataset;  // dataset root written by `gen`
    std::optional<std::string> model;    // checkpoint path
    std::optional<std::uint64_t> seed;
    std::string architecture = "default";  // "default" | "local"
    int scene_size = 60;
    std::vector<ScenarioFamily> train_families{ScenarioFamily::uniform_clutter(0.2)};
    std::vector<ScenarioFamily> eval_families{ScenarioFamily::defaults(FamilyId::Maze)};
    int train_count = 2000;
    int eval_count = 200;
    std::vector<std::uint64_t> seeds;  // multi-seed experiments; empty = {seed}
    // train.seed is ignored here: experiments derive it from the run seed.
    TrainConfig train = default_train_config();
    MaskConfig mask;
    PlannerKind planner = PlannerKind::Dijkstra;
    RlExperimentConfig rl;
    IncrementalConfig incremental;

    /// Cross-field checks. Throws ConfigError.
    void validate() const;

    Architecture resolved_architecture() const;
    std::vector<std::uint64_t> resolved_seeds() const;
    /// Throws ConfigError naming `field` when seed is absent.
    std::uint64_t require_seed(const char* field = "seed") const;
};

/// Parses and validates a JSON document. Throws ConfigError with the path
/// of the offending key.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

/// Canonical JSON (sorted keys, two-space indent) for report sidecars.
std::string experiment_config_json(const ExperimentConfig& cfg);

/// "all" or a comma-separated list of family names, with default parameters.
std::vector<ScenarioFamily> parse_family_list(const std::string& list);

std::string planner_name(PlannerKind kind);

}  // namespace ppe
