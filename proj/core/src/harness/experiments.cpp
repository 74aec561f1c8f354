#include "ppe/harness/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numeric>
#include <optional>

#include <json.hpp>

#include "ppe/errors.hpp"
#include "ppe/harness/csv.hpp"
#include "ppe/harness/parallel.hpp"
#include "ppe/rl_agent.hpp"

namespace ppe {

using nlohmann::json;

RegionProbabilities oracle_probabilities(const PathLabel& label) {
    RegionProbabilities p{label.width, label.height, std::vector<double>(label.mask.size())};
    for (std::size_t i = 0; i < label.mask.size(); ++i)
        p.values[i] = label.mask[i] ? 1.0 - kProbClamp : kProbClamp;
    return p;
}

RegionProbabilities constant_probabilities(int height, int width, double p) {
    const double v = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return {width, height, std::vector<double>(std::size_t(width) * std::size_t(height), v)};
}

std::vector<TimedPrediction> predict_all(const EncoderModel& model,
                                         std::span<const LabeledScene> scenes) {
    std::vector<TimedPrediction> out(scenes.size());
    parallel_for(scenes.size(), [&](std::size_t i) {
        std::array<double, 3> times{};
        for (double& t : times) {
            const auto t0 = std::chrono::steady_clock::now();
            out[i].probs = forward(model, encode_input(render_scene(scenes[i].scene)));
            t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        std::sort(times.begin(), times.end());
        out[i].encoder_time = times[1];
    });
    return out;
}

std::vector<Sample> make_samples(std::span<const LabeledScene> scenes) {
    std::vector<Sample> out(scenes.size());
    parallel_for(scenes.size(), [&](std::size_t i) { out[i] = make_sample(scenes[i].scene, scenes[i].label); });
    return out;
}

MaskQuality mask_quality(std::span<const RegionProbabilities> probs,
                         std::span<const LabeledScene> scenes, const MaskConfig& cfg) {
    if (probs.size() != scenes.size()) throw std::invalid_argument("mask_quality: size mismatch");
    MaskQuality q;
    if (scenes.empty()) return q;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const MaskScore s = score_mask(scenes[i].label, dilate(binarize(probs[i], cfg.threshold), cfg.dilation));
        q.recall += s.recall;
        q.precision += s.precision;
    }
    q.recall /= static_cast<double>(scenes.size());
    q.precision /= static_cast<double>(scenes.size());
    return q;
}

MaskQuality mask_quality(const EncoderModel& model, std::span<const LabeledScene> scenes,
                         const MaskConfig& cfg) {
    std::vector<RegionProbabilities> probs(scenes.size());
    parallel_for(scenes.size(),
                 [&](std::size_t i) { probs[i] = forward(model, encode_input(scenes[i].scene)); });
    return mask_quality(probs, scenes, cfg);
}

BenchmarkReport speedup_bench(std::span<const TimedPrediction> predictions,
                              std::span<const LabeledScene> scenes, const MaskConfig& cfg,
                              PlannerKind planner) {
    cfg.validate();
    if (scenes.empty()) throw ConfigError("speedup_bench: empty split");
    if (predictions.size() != scenes.size())
        throw std::invalid_argument("speedup_bench: one prediction per scene is required");

    std::vector<std::optional<BenchmarkRow>> rows(scenes.size());
    std::mutex log_mutex;
    parallel_for(scenes.size(), [&](std::size_t i) {
        const LabeledScene& s = scenes[i];
        try {
            const MaskedPlanOutcome o = plan_with_mask(s.scene, predictions[i].probs, cfg, planner);
            const MaskScore score = score_mask(s.label, search_region(s.scene, predictions[i].probs, cfg));
            BenchmarkRow r;
            r.scene_id = s.id;
            r.full_expansions = o.full.expansions;
            r.masked_expansions = o.masked_expansions;
            r.mask_size = o.mask_size;
            r.full_cost = o.full.cost;
            r.masked_cost = o.result.cost;
            r.used_fallback = o.used_fallback;
            r.recall = score.recall;
            r.precision = score.precision;
            r.full_time = o.full.wall_time;
            r.masked_time = o.masked_time;
            r.encoder_time = predictions[i].encoder_time;
            rows[i] = std::move(r);
        } catch (const NoPathAnywhere& e) {
            std::lock_guard lock(log_mutex);
            std::cerr << "skipping " << s.id << ": " << e.what() << "\n";
        }
    });

    BenchmarkReport report;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i]) report.rows.push_back(std::move(*rows[i]));
        else report.skipped.push_back(scenes[i].id);
    }
    report.aggregates = aggregate(report.rows);
    return report;
}

BenchmarkReport speedup_bench(const EncoderModel& model, std::span<const LabeledScene> scenes,
                              const MaskConfig& cfg, PlannerKind planner) {
    const auto predictions = predict_all(model, scenes);
    return speedup_bench(predictions, scenes, cfg, planner);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
    items_.reserve(capacity);
}

void ReplayBuffer::add(const Sample& sample) {
    ++offered_;
    if (items_.size() < capacity_) {
        items_.push_back(sample);
        return;
    }
    const std::size_t j = uniform_index(rng_, offered_);
    if (j < capacity_) items_[j] = sample;
}

std::vector<Sample> ReplayBuffer::draw(std::size_t n, std::uint64_t seed) const {
    std::vector<std::size_t> idx(items_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n, idx.size()));
    std::vector<Sample> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(items_[i]);
    return out;
}

IncrementalResult incremental_update(const EncoderModel& model,
                                     std::span<const Sample> new_samples,
                                     const ReplayBuffer& replay, double replay_ratio,
                                     const TrainConfig& train_cfg, const MaskConfig& mask_cfg,
                                     std::span<const LabeledScene> new_eval,
                                     std::span<const LabeledScene> old_eval) {
    if (!(replay_ratio >= 0.0 && replay_ratio < 1.0))
        throw ConfigError("replay_ratio must lie in [0, 1)");
    if (new_samples.empty()) throw ConfigError("incremental_update: no new samples");

    IncrementalResult r;
    r.new_before = mask_quality(model, new_eval, mask_cfg);
    r.old_before = mask_quality(model, old_eval, mask_cfg);

    const auto n_old = static_cast<std::size_t>(
        std::llround(replay_ratio / (1.0 - replay_ratio) * static_cast<double>(new_samples.size())));
    std::vector<Sample> mix(new_samples.begin(), new_samples.end());
    for (auto& s : replay.draw(n_old, derive_seed(train_cfg.seed, 0x5E1))) mix.push_back(std::move(s));
    r.replayed = mix.size() - new_samples.size();

    TrainResult tr = train(model, mix, train_cfg);
    r.model = std::move(tr.model);
    r.history = std::move(tr.history);
    r.new_after = mask_quality(r.model, new_eval, mask_cfg);
    r.old_after = mask_quality(r.model, old_eval, mask_cfg);
    return r;
}

std::vector<LabeledScene> scenes_for(const ExperimentConfig& cfg, const ScenarioFamily& family,
                                     std::size_t count, std::uint64_t seed, std::size_t first) {
    if (!cfg.dataset) return generate_split(family, count, seed, cfg.scene_size, first);
    auto all = load_dataset(*cfg.dataset, family.id);
    if (all.size() < first + count)
        throw ConfigError("dataset '" + *cfg.dataset + "' holds " + std::to_string(all.size()) + " " +
                          std::string(family_name(family.id)) + " scenes, " +
                          std::to_string(first + count) + " needed");
    return {std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(first)),
            std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(first + count))};
}

namespace {

TrainConfig seeded(TrainConfig t, std::uint64_t seed, std::uint64_t tag) {
    t.seed = derive_seed(seed, tag);
    return t;
}

std::vector<Sample> training_samples(const ExperimentConfig& cfg, std::uint64_t seed) {
    std::vector<Sample> samples;
    for (const auto& f : cfg.train_families) {
        const auto split = scenes_for(cfg, f, std::size_t(cfg.train_count), seed);
        auto s = make_samples(split);
        std::move(s.begin(), s.end(), std::back_inserter(samples));
    }
    return samples;
}

std::vector<LabeledScene> held_out(const ExperimentConfig& cfg, const ScenarioFamily& f,
                                   std::uint64_t seed) {
    const bool trained_on =
        std::find(cfg.train_families.begin(), cfg.train_families.end(), f) != cfg.train_families.end();
    return scenes_for(cfg, f, std::size_t(cfg.eval_count), seed,
                      trained_on ? std::size_t(cfg.train_count) : 0);
}

}  // namespace

TrainResult train_encoder(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const auto samples = training_samples(cfg, seed);
    EncoderModel model = init_model(cfg.resolved_architecture(), derive_seed(seed, 0x1417));
    return train(std::move(model), samples, seeded(cfg.train, seed, 0x7EA1));
}

SpeedupRun run_speedup(const ExperimentConfig& cfg) {
    const std::uint64_t seed = cfg.require_seed();
    SpeedupRun run;
    run.trained = train_encoder(cfg, seed);
    const auto eval = held_out(cfg, cfg.train_families.front(), seed);
    run.report = speedup_bench(run.trained.model, eval, cfg.mask, cfg.planner);
    return run;
}

BenchmarkReport run_oracle_speedup(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::uint64_t seed = cfg.require_seed();
    const auto eval = held_out(cfg, cfg.train_families.front(), seed);
    std::vector<TimedPrediction> preds(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) preds[i].probs = oracle_probabilities(eval[i].label);
    return speedup_bench(preds, eval, cfg.mask, cfg.planner);
}

TableRun run_encoder_shift(const ExperimentConfig& cfg) {
    cfg.validate();
    CsvWriter csv({"seed", "family", "role", "recall", "precision"});
    json per_seed = json::array();
    double gap_sum = 0.0;
    const auto seeds = cfg.resolved_seeds();
    for (std::uint64_t seed : seeds) {
        const EncoderModel model = train_encoder(cfg, seed).model;
        const auto& home = cfg.train_families.front();
        const MaskQuality q_home = mask_quality(model, held_out(cfg, home, seed), cfg.mask);
        csv.row({std::to_string(seed), std::string(family_name(home.id)), "train",
                 format_double(q_home.recall), format_double(q_home.precision)});
        std::optional<double> first_gap;
        for (const auto& f : cfg.eval_families) {
            const MaskQuality q = mask_quality(model, held_out(cfg, f, seed), cfg.mask);
            csv.row({std::to_string(seed), std::string(family_name(f.id)), "unseen",
                     format_double(q.recall), format_double(q.precision)});
            if (!first_gap) first_gap = q_home.recall - q.recall;
        }
        gap_sum += *first_gap;
        per_seed.push_back({{"seed", seed}, {"recall_gap", *first_gap}});
    }
    json results{{"per_seed", per_seed}, {"mean_recall_gap", gap_sum / double(seeds.size())}};
    return {csv.str(), results.dump()};
}

TableRun run_rl_shift(const ExperimentConfig& cfg) {
    cfg.validate();
    CsvWriter csv({"seed", "env_id", "win_rate_pct", "run_time_s", "episodes"});
    json per_seed = json::array();
    const int n = cfg.rl.grid_size;
    for (std::uint64_t seed : cfg.resolved_seeds()) {
        const GridScene a = generate_scene(ScenarioFamily::uniform_clutter(cfg.rl.clutter),
                                           derive_seed(seed, 0xA), n, n);
        const GridScene b = perturb_scene(a, cfg.rl.perturb_k, derive_seed(seed, 0xB));
        const ShiftReport report =
            shift_experiment(NavMDP::from_scene(a), NavMDP::from_scene(b), cfg.rl.hyperparams,
                             derive_seed(seed, 0xC), cfg.rl.eval_episodes);
        json rates = json::object();
        for (const auto& row : report.rows) {
            csv.row({std::to_string(seed), row.env_id, format_double(row.win_rate),
                     format_double(row.run_time), std::to_string(row.episodes)});
            rates[row.env_id] = row.win_rate;
        }
        per_seed.push_back({{"seed", seed}, {"win_rate_pct", rates}, {"train_time_s", report.train_time}});
    }
    return {csv.str(), json{{"per_seed", per_seed}}.dump()};
}

TableRun run_incremental(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto& inc = cfg.incremental;
    const ScenarioFamily old_family = cfg.train_families.front();
    const ScenarioFamily new_family = cfg.eval_families.front();
    const Architecture arch = cfg.resolved_architecture();

    CsvWriter csv({"seed", "replay_ratio", "replayed", "new_recall_before", "new_recall_after",
                   "old_recall_before", "old_recall_after", "scratch_new_recall"});
    json per_seed = json::array();
    for (std::uint64_t seed : cfg.resolved_seeds()) {
        const auto old_train = scenes_for(cfg, old_family, std::size_t(inc.base_count), seed);
        const auto old_samples = make_samples(old_train);
        const EncoderModel base =
            train(init_model(arch, derive_seed(seed, 0x1417)), old_samples,
                  seeded(cfg.train, seed, 0x7EA1))
                .model;

        ReplayBuffer replay(old_samples.size(), derive_seed(seed, 0x2E9));
        for (const auto& s : old_samples) replay.add(s);

        const auto new_train = scenes_for(cfg, new_family, std::size_t(inc.new_count), seed);
        const auto new_samples = make_samples(new_train);
        const auto old_eval = scenes_for(cfg, old_family, std::size_t(cfg.eval_count), seed,
                                         std::size_t(inc.base_count));
        const auto new_eval = scenes_for(cfg, new_family, std::size_t(cfg.eval_count), seed,
                                         std::size_t(inc.new_count));

        TrainConfig fine = seeded(cfg.train, seed, 0xF17E);
        fine.epochs = inc.fine_tune_epochs;
        const IncrementalResult r = incremental_update(base, new_samples, replay, inc.replay_ratio,
                                                       fine, cfg.mask, new_eval, old_eval);

        const EncoderModel scratch = train(init_model(arch, derive_seed(seed, 0x5C2A)), new_samples,
                                           seeded(cfg.train, seed, 0x5C2B))
                                         .model;
        const MaskQuality q_scratch = mask_quality(scratch, new_eval, cfg.mask);

        csv.row({std::to_string(seed), format_double(inc.replay_ratio), std::to_string(r.replayed),
                 format_double(r.new_before.recall), format_double(r.new_after.recall),
                 format_double(r.old_before.recall), format_double(r.old_after.recall),
                 format_double(q_scratch.recall)});
        const double recovery = q_scratch.recall > 0.0 ? r.new_after.recall / q_scratch.recall : 0.0;
        per_seed.push_back({{"seed", seed},
                            {"recovery_vs_scratch", recovery},
                            {"old_recall_drop_pp", 100.0 * (r.old_before.recall - r.old_after.recall)}});
    }
    return {csv.str(), json{{"per_seed", per_seed}}.dump()};
}

}  // namespace ppe
