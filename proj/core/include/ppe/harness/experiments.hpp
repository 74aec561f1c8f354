#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ppe/encoder.hpp"
#include "ppe/harness/config.hpp"
#include "ppe/harness/dataset.hpp"
#include "ppe/harness/report.hpp"
#include "ppe/masked_planning.hpp"
#include "ppe/rng.hpp"

namespace ppe {

/// 1 - kProbClamp on label cells, kProbClamp elsewhere.
RegionProbabilities oracle_probabilities(const PathLabel& label);
RegionProbabilities constant_probabilities(int height, int width, double p);

struct TimedPrediction {
    RegionProbabilities probs;
    double encoder_time = 0.0;  // seconds, median of 3 forward passes
};

std::vector<TimedPrediction> predict_all(const EncoderModel& model,
                                         std::span<const LabeledScene> scenes);

std::vector<Sample> make_samples(std::span<const LabeledScene> scenes);

struct MaskQuality {
    double recall = 0.0;     // mean over scenes
    double precision = 0.0;  // mean over scenes
};

MaskQuality mask_quality(std::span<const RegionProbabilities> probs,
                         std::span<const LabeledScene> scenes, const MaskConfig& cfg);
MaskQuality mask_quality(const EncoderModel& model, std::span<const LabeledScene> scenes,
                         const MaskConfig& cfg);

/// Paired full vs masked runs, one per scene, merged in input order.
/// Unsolvable scenes are skipped, logged to stderr and listed in the report.
BenchmarkReport speedup_bench(std::span<const TimedPrediction> predictions,
                              std::span<const LabeledScene> scenes, const MaskConfig& cfg,
                              PlannerKind planner);
BenchmarkReport speedup_bench(const EncoderModel& model, std::span<const LabeledScene> scenes,
                              const MaskConfig& cfg, PlannerKind planner);

/// Fixed-capacity reservoir of past samples. Once full, the i-th offered
/// sample replaces a random slot with probability capacity / i, so the
/// buffer stays a uniform sample of everything offered.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::uint64_t seed);

    void add(const Sample& sample);
    /// min(n, size()) distinct stored samples chosen with `seed`.
    std::vector<Sample> draw(std::size_t n, std::uint64_t seed) const;

    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t offered() const noexcept { return offered_; }

private:
    std::size_t capacity_;
    std::size_t offered_ = 0;
    Rng rng_;
    std::vector<Sample> items_;
};

struct IncrementalResult {
    EncoderModel model;
    std::vector<double> history;
    std::size_t replayed = 0;  // old samples mixed into fine-tuning
    MaskQuality new_before, new_after;
    MaskQuality old_before, old_after;
};

/// Fine-tunes on `new_samples` plus round(rho / (1 - rho) * |new|) replayed
/// samples (capped at the buffer size), so replayed samples make up a
/// share rho of the mix. Throws DivergenceDetected.
IncrementalResult incremental_update(const EncoderModel& model,
                                     std::span<const Sample> new_samples,
                                     const ReplayBuffer& replay, double replay_ratio,
                                     const TrainConfig& train_cfg, const MaskConfig& mask_cfg,
                                     std::span<const LabeledScene> new_eval,
                                     std::span<const LabeledScene> old_eval);

// End-to-end experiments shared by the CLI and the acceptance suite. Each
// returns the CSV text it reports plus a JSON summary for the sidecar.

/// Scenes [first, first + count) of a family: read from cfg.dataset when set,
/// generated from the seed otherwise.
std::vector<LabeledScene> scenes_for(const ExperimentConfig& cfg, const ScenarioFamily& family,
                                     std::size_t count, std::uint64_t seed, std::size_t first = 0);

/// Trains a fresh model on train_count scenes of every train family.
TrainResult train_encoder(const ExperimentConfig& cfg, std::uint64_t seed);

struct SpeedupRun {
    TrainResult trained;
    BenchmarkReport report;  // eval_count held-out scenes of the first train family
};
SpeedupRun run_speedup(const ExperimentConfig& cfg);

/// Oracle-mask benchmark on the same held-out split (upper bound).
BenchmarkReport run_oracle_speedup(const ExperimentConfig& cfg);

struct TableRun {
    std::string csv;
    std::string results_json;
};

/// Per seed: train on the train families, then score masks on held-out
/// train-family scenes and on every eval family.
/// Columns: seed, family, role, recall, precision.
TableRun run_encoder_shift(const ExperimentConfig& cfg);

/// Per seed: env A = generate(UniformClutter(rl.clutter), rl.grid_size),
/// env B = perturb(A, rl.perturb_k).
/// Columns: seed, env_id, win_rate_pct, run_time_s, episodes.
TableRun run_rl_shift(const ExperimentConfig& cfg);

/// Per seed: base model on the first train family, replay-mixed fine-tuning
/// on the first eval family, and a from-scratch model on the same new
/// samples for reference.
TableRun run_incremental(const ExperimentConfig& cfg);

}  // namespace ppe
