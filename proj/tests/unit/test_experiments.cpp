#include <doctest.h>

#include <filesystem>
#include <set>

#include <json.hpp>

#include "ppe/errors.hpp"
#include "ppe/harness/csv.hpp"
#include "ppe/harness/experiments.hpp"

using namespace ppe;

namespace {

std::vector<TimedPrediction> constant_predictions(std::span<const LabeledScene> scenes, double p) {
    std::vector<TimedPrediction> out;
    for (const auto& s : scenes) out.push_back({constant_probabilities(s.scene.height, s.scene.width, p), 0.0});
    return out;
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.seed = 5;
    c.scene_size = 16;
    c.train_count = 12;
    c.eval_count = 6;
    c.train.epochs = 2;
    c.train.batch_size = 4;
    c.incremental.base_count = 12;
    c.incremental.new_count = 6;
    c.incremental.fine_tune_epochs = 1;
    c.rl.hyperparams.episodes = 200;
    c.rl.grid_size = 6;
    c.rl.perturb_k = 3;
    c.rl.eval_episodes = 10;
    return c;
}

}  // namespace

TEST_CASE("full-grid predictions give zero reduction and no fallback") {
    const auto scenes = generate_split(ScenarioFamily::uniform_clutter(0.2), 10, 3, 20);
    const auto preds = constant_predictions(scenes, 1.0);
    const BenchmarkReport r = speedup_bench(preds, scenes, {}, PlannerKind::Dijkstra);
    CHECK(r.rows.size() == 10);
    CHECK(r.skipped.empty());
    CHECK(r.aggregates.reduction_expansions == 0.0);
    CHECK(r.aggregates.fallback_rate == 0.0);
    CHECK(r.aggregates.recall == 1.0);
    for (const auto& row : r.rows) {
        CHECK(row.masked_cost == row.full_cost);
        CHECK(row.mask_size == 400);
    }
}

TEST_CASE("oracle predictions keep optimal costs and cut expansions") {
    const auto scenes = generate_split(ScenarioFamily::uniform_clutter(0.2), 10, 4, 30);
    std::vector<TimedPrediction> preds;
    for (const auto& s : scenes) preds.push_back({oracle_probabilities(s.label), 0.0});
    MaskConfig cfg;
    cfg.dilation = 1;
    const BenchmarkReport r = speedup_bench(preds, scenes, cfg, PlannerKind::AStar);
    CHECK(r.aggregates.fallback_rate == 0.0);
    CHECK(r.aggregates.recall == 1.0);
    CHECK(r.aggregates.reduction_expansions > 0.0);
    for (const auto& row : r.rows) CHECK(row.masked_cost == row.full_cost);
}

TEST_CASE("empty predictions fall back on every scene") {
    const auto scenes = generate_split(ScenarioFamily::uniform_clutter(0.2), 5, 6, 20);
    const BenchmarkReport r = speedup_bench(constant_predictions(scenes, 0.0), scenes, {}, PlannerKind::Dijkstra);
    CHECK(r.aggregates.fallback_rate == 100.0);
    for (const auto& row : r.rows) CHECK(row.masked_cost == row.full_cost);
}

TEST_CASE("unsolvable scenes are skipped and listed") {
    auto scenes = generate_split(ScenarioFamily::uniform_clutter(0.2), 3, 6, 12);
    GridScene& s = scenes[1].scene;
    for (int r = 0; r < s.height; ++r)
        for (int c = 0; c < s.width; ++c)
            if (Coord{r, c} != s.start && Coord{r, c} != s.goal) s.set({r, c}, Cell::Obstacle);
    const BenchmarkReport r = speedup_bench(constant_predictions(scenes, 0.9), scenes, {}, PlannerKind::Dijkstra);
    CHECK(r.rows.size() + r.skipped.size() == 3);
    if (!r.skipped.empty()) CHECK(r.skipped[0] == scenes[1].id);
}

TEST_CASE("speedup_bench argument checks") {
    const auto scenes = generate_split(ScenarioFamily::uniform_clutter(0.2), 2, 6, 12);
    const std::span<const LabeledScene> one(scenes.data(), 1);
    CHECK_THROWS_AS(speedup_bench(constant_predictions(scenes, 0.9), one, {}, PlannerKind::Dijkstra),
                    std::invalid_argument);
    const std::vector<TimedPrediction> none;
    CHECK_THROWS_AS(speedup_bench(none, {}, {}, PlannerKind::Dijkstra), ConfigError);
}

TEST_CASE("mask quality against oracle and empty predictions") {
    const auto scenes = generate_split(ScenarioFamily::defaults(FamilyId::Rooms), 6, 8, 20);
    std::vector<RegionProbabilities> oracle, empty;
    for (const auto& s : scenes) {
        oracle.push_back(oracle_probabilities(s.label));
        empty.push_back(constant_probabilities(20, 20, 0.0));
    }
    MaskConfig cfg;
    cfg.dilation = 0;
    const MaskQuality q = mask_quality(oracle, scenes, cfg);
    CHECK(q.recall == 1.0);
    CHECK(q.precision == 1.0);
    CHECK(mask_quality(empty, scenes, cfg).recall == 0.0);
}

TEST_CASE("replay buffer fills, then samples uniformly") {
    const auto scenes = generate_split(ScenarioFamily::uniform_clutter(0.1), 20, 2, 8);
    const auto samples = make_samples(scenes);
    ReplayBuffer buf(5, 1);
    for (std::size_t i = 0; i < 3; ++i) buf.add(samples[i]);
    CHECK(buf.size() == 3);
    CHECK(buf.draw(10, 4).size() == 3);
    for (std::size_t i = 3; i < samples.size(); ++i) buf.add(samples[i]);
    CHECK(buf.size() == 5);
    CHECK(buf.capacity() == 5);
    CHECK(buf.offered() == 20);

    const auto a = buf.draw(4, 7);
    const auto b = buf.draw(4, 7);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].label.mask == b[i].label.mask);
    std::set<std::vector<std::uint8_t>> distinct;
    for (const auto& s : a) distinct.insert(s.label.mask);
    CHECK(distinct.size() == 4);
    CHECK_THROWS_AS(ReplayBuffer(0, 1), std::invalid_argument);
}

TEST_CASE("reservoir keeps late samples with the expected frequency") {
    // Each of N offered items stays with probability capacity / N.
    const auto scenes = generate_split(ScenarioFamily::uniform_clutter(0.1), 10, 2, 6);
    const auto samples = make_samples(scenes);
    int kept_last = 0;
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
        ReplayBuffer buf(3, std::uint64_t(t));
        for (const auto& s : samples) buf.add(s);
        for (const auto& s : buf.draw(3, 0))
            if (s.label.mask == samples.back().label.mask) ++kept_last;
    }
    CHECK(double(kept_last) / trials == doctest::Approx(0.3).epsilon(0.25));
}

TEST_CASE("zero fine-tune epochs leave the model unchanged") {
    const auto old_scenes = generate_split(ScenarioFamily::uniform_clutter(0.2), 6, 3, 12);
    const auto new_scenes = generate_split(ScenarioFamily::defaults(FamilyId::Maze), 6, 3, 12);
    const EncoderModel model = init_model(local_architecture(), 3);
    ReplayBuffer replay(6, 1);
    for (const auto& s : make_samples(old_scenes)) replay.add(s);
    TrainConfig t = default_train_config();
    t.epochs = 0;
    const auto new_samples = make_samples(new_scenes);
    const IncrementalResult r =
        incremental_update(model, new_samples, replay, 0.5, t, {}, new_scenes, old_scenes);
    CHECK(r.model.params == model.params);
    CHECK(r.replayed == 6);
    CHECK(r.new_before.recall == r.new_after.recall);
    CHECK(r.old_before.recall == r.old_after.recall);
}

TEST_CASE("replay share follows the ratio") {
    const auto old_scenes = generate_split(ScenarioFamily::uniform_clutter(0.2), 10, 3, 10);
    const auto new_scenes = generate_split(ScenarioFamily::defaults(FamilyId::Maze), 4, 3, 10);
    const EncoderModel model = init_model(local_architecture(), 3);
    ReplayBuffer replay(10, 1);
    for (const auto& s : make_samples(old_scenes)) replay.add(s);
    TrainConfig t = default_train_config();
    t.epochs = 0;
    const auto new_samples = make_samples(new_scenes);
    CHECK(incremental_update(model, new_samples, replay, 0.0, t, {}, new_scenes, old_scenes).replayed == 0);
    CHECK(incremental_update(model, new_samples, replay, 0.2, t, {}, new_scenes, old_scenes).replayed == 1);
    CHECK(incremental_update(model, new_samples, replay, 0.75, t, {}, new_scenes, old_scenes).replayed == 10);
    CHECK_THROWS_AS(incremental_update(model, new_samples, replay, 1.0, t, {}, new_scenes, old_scenes),
                    ConfigError);
    CHECK_THROWS_AS(incremental_update(model, {}, replay, 0.5, t, {}, new_scenes, old_scenes), ConfigError);
}

TEST_CASE("scenes_for reads a dataset or generates the same scenes") {
    const auto dir = std::filesystem::temp_directory_path() / "ppe_experiments_ds";
    std::filesystem::remove_all(dir);
    const std::vector<ScenarioFamily> fams{ScenarioFamily::defaults(FamilyId::Rooms)};
    gen_dataset(fams, 8, 21, dir, 16);
    ExperimentConfig c = small_config();
    const auto generated = scenes_for(c, fams[0], 3, 21, 4);
    c.dataset = dir.string();
    const auto loaded = scenes_for(c, fams[0], 3, 21, 4);
    REQUIRE(loaded.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(loaded[i].id == generated[i].id);
        CHECK(same_layout(loaded[i].scene, generated[i].scene));
    }
    CHECK_THROWS_AS(scenes_for(c, fams[0], 6, 21, 4), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("train_encoder is deterministic per seed") {
    const ExperimentConfig c = small_config();
    const TrainResult a = train_encoder(c, 5);
    const TrainResult b = train_encoder(c, 5);
    CHECK(a.model.params == b.model.params);
    CHECK(a.history == b.history);
    CHECK(a.history.size() == 2);
}

TEST_CASE("experiment tables have one block per seed") {
    ExperimentConfig c = small_config();
    c.seeds = {1, 2};

    const TableRun enc = run_encoder_shift(c);
    const CsvTable t = parse_csv(enc.csv);
    CHECK(t.header == std::vector<std::string>{"seed", "family", "role", "recall", "precision"});
    CHECK(t.rows.size() == 4);
    const auto j = nlohmann::json::parse(enc.results_json);
    CHECK(j["per_seed"].size() == 2);
    CHECK(j.contains("mean_recall_gap"));

    const TableRun rl = run_rl_shift(c);
    const CsvTable tr = parse_csv(rl.csv);
    CHECK(tr.rows.size() == 4);
    CHECK(tr.rows[0][1] == "A");
    CHECK(tr.rows[1][1] == "B");
    CHECK(strip_columns(rl.csv, is_time_column) == strip_columns(run_rl_shift(c).csv, is_time_column));

    const TableRun inc = run_incremental(c);
    const CsvTable ti = parse_csv(inc.csv);
    CHECK(ti.rows.size() == 2);
    CHECK(ti.rows[0][ti.column("replayed")] == "6");
    CHECK(inc.csv == run_incremental(c).csv);
}

TEST_CASE("speedup and oracle runs share the held-out split") {
    const ExperimentConfig c = small_config();
    const SpeedupRun run = run_speedup(c);
    const BenchmarkReport oracle = run_oracle_speedup(c);
    REQUIRE(run.report.rows.size() + run.report.skipped.size() == 6);
    REQUIRE(oracle.rows.size() == run.report.rows.size());
    for (std::size_t i = 0; i < oracle.rows.size(); ++i) {
        CHECK(oracle.rows[i].scene_id == run.report.rows[i].scene_id);
        CHECK(oracle.rows[i].full_expansions == run.report.rows[i].full_expansions);
    }
    CHECK(oracle.rows[0].scene_id == "uniform_clutter/12");
    ExperimentConfig no_seed = c;
    no_seed.seed.reset();
    CHECK_THROWS_AS(run_oracle_speedup(no_seed), ConfigError);
}

TEST_CASE("replay reduces forgetting on paired runs") {
    const auto old_family = ScenarioFamily::uniform_clutter(0.2);
    const auto new_family = ScenarioFamily::defaults(FamilyId::Maze);
    MaskConfig mask;
    mask.dilation = 1;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto old_train = generate_split(old_family, 40, seed, 16);
        const auto old_eval = generate_split(old_family, 20, seed, 16, 40);
        const auto new_train = generate_split(new_family, 40, seed, 16);
        const auto new_eval = generate_split(new_family, 20, seed, 16, 40);
        const auto old_samples = make_samples(old_train);
        TrainConfig t = default_train_config();
        t.epochs = 30;
        t.seed = seed;
        const EncoderModel base = train(init_model(default_architecture(), seed), old_samples, t).model;
        ReplayBuffer replay(old_samples.size(), seed);
        for (const auto& s : old_samples) replay.add(s);
        const auto new_samples = make_samples(new_train);
        t.epochs = 15;
        const auto none = incremental_update(base, new_samples, replay, 0.0, t, mask, new_eval, old_eval);
        const auto half = incremental_update(base, new_samples, replay, 0.5, t, mask, new_eval, old_eval);
        CAPTURE(seed);
        CHECK(none.old_before.recall == half.old_before.recall);
        CHECK(none.old_before.recall - none.old_after.recall >= half.old_before.recall - half.old_after.recall);
        CHECK(half.new_after.recall >= half.new_before.recall);
    }
}
