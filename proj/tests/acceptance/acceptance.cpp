// Acceptance suite: one pass/fail line per criterion.
//
//   ppe_acceptance --criterion N [--artifacts DIR]
//
// Criteria 4-7 write their CSV reports (with JSON sidecars) to DIR;
// criterion 8 reruns them into DIR/rerun and compares the reports with
// wall-time columns removed.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "oracles.hpp"
#include "ppe/encoder.hpp"
#include "ppe/grid_env.hpp"
#include "ppe/harness/config.hpp"
#include "ppe/harness/csv.hpp"
#include "ppe/harness/dataset.hpp"
#include "ppe/harness/experiments.hpp"
#include "ppe/harness/report.hpp"
#include "ppe/planners.hpp"
#include "ppe/rng.hpp"

using namespace ppe;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

// 1. Planner equivalence on 1000 random solvable 10x10 scenes.
Outcome planners_agree() {
    Stopwatch sw;
    int mismatches = 0;
    int scenes = 0;
    for (std::uint64_t seed = 0; scenes < 1000; ++seed) {
        const FamilyId family = kAllFamilies[seed % kAllFamilies.size()];
        const GridScene s = generate_scene(ScenarioFamily::defaults(family), derive_seed(0xACC1, seed), 10, 10);
        const int expected = oracle::optimal_cost(s);
        if (expected < 0) continue;
        ++scenes;
        const PlanResult b = bfs_shortest(s);
        const PlanResult d = dijkstra(s);
        const PlanResult a = astar(s, {}, Heuristic::Manhattan);
        const PlanResult z = astar(s, {}, Heuristic::Zero);
        const bool ok = b.cost == expected && d.cost == expected && a.cost == expected &&
                        same_outcome(z, d) && oracle::valid_path(s, d.path) && oracle::valid_path(s, a.path);
        if (!ok) ++mismatches;
    }
    const double t = sw.seconds();
    return {mismatches == 0 && t < 10.0,
            std::to_string(scenes) + " scenes, " + std::to_string(mismatches) + " mismatches, " + fmt(t, 3) + " s"};
}

EncoderModel random_small_model(std::uint64_t seed) {
    const Architecture arch{LayerSpec::conv(3, 4, 3, Activation::ReLU),
                            LayerSpec::conv(4, 1, 3, Activation::Logistic)};
    return init_model(arch, seed);
}

// 2. Gradient check on 20 random small models at 8x8.
Outcome gradients_check() {
    Stopwatch sw;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const EncoderModel m = random_small_model(seed);
        const Sample s = make_sample(generate_scene(ScenarioFamily::uniform_clutter(0.2), seed, 8, 8));
        worst = std::max(worst, grad_check(m, s, 1e-5, LossWeighting::uniform(), 1.0,
                                           m.params.size(), seed));
    }
    const double t = sw.seconds();
    return {worst < 1e-4 && t < 30.0, "max relative error " + fmt(worst, 3) + ", " + fmt(t, 3) + " s"};
}

// 3. Default encoder overfits a fixed 10-sample batch.
Outcome overfit() {
    Stopwatch sw;
    std::vector<Sample> batch;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        batch.push_back(make_sample(generate_scene(ScenarioFamily::uniform_clutter(0.2), seed, 16, 16)));
    TrainConfig cfg;
    cfg.epochs = 500;
    cfg.batch_size = 10;
    cfg.learning_rate = 1e-2;
    cfg.seed = 3;
    const TrainResult r = train(init_model(default_architecture(), 3), batch, cfg);
    int reached = -1;
    for (std::size_t e = 0; e < r.history.size(); ++e)
        if (r.history[e] < 0.05) {
            reached = int(e) + 1;
            break;
        }
    double final_loss = 0.0;
    for (const Sample& s : batch)
        final_loss += loss(forward(r.model, s.input), s.label, LossWeighting::uniform());
    final_loss /= double(batch.size());
    const double t = sw.seconds();
    return {reached > 0 && final_loss < 0.05 && t < 60.0,
            "BCE < 0.05 " + (reached > 0 ? "at epoch " + std::to_string(reached) : std::string("never")) +
                ", final " + fmt(final_loss, 3) + ", " + fmt(t, 3) + " s"};
}

ExperimentConfig base_config() {
    ExperimentConfig c;
    c.seed = 1;
    return c;
}

// 4. Speedup with the trained encoder, plus the oracle-mask bound.
Outcome speedup(const fs::path& dir) {
    Stopwatch sw;
    const ExperimentConfig cfg = base_config();
    const SpeedupRun run = run_speedup(cfg);
    const double t = sw.seconds();
    save_benchmark(run.report, dir / "criterion4_speedup.csv", experiment_config_json(cfg));

    ExperimentConfig oracle_cfg = cfg;
    oracle_cfg.mask.dilation = 1;
    const BenchmarkReport oracle = run_oracle_speedup(oracle_cfg);
    save_benchmark(oracle, dir / "criterion4_oracle.csv", experiment_config_json(oracle_cfg));

    const auto& a = run.report.aggregates;
    const bool pass = a.reduction_expansions >= 40.0 && a.fallback_rate <= 10.0 && t <= 600.0 &&
                      oracle.aggregates.reduction_expansions >= 50.0;
    return {pass, "expansion reduction " + fmt(a.reduction_expansions) + " %, fallback " +
                      fmt(a.fallback_rate) + " %, recall " + fmt(a.recall) + ", oracle reduction " +
                      fmt(oracle.aggregates.reduction_expansions) + " %, " + fmt(t, 4) + " s"};
}

ExperimentConfig multi_seed_config() {
    ExperimentConfig c;
    c.seeds = {1, 2, 3};
    return c;
}

// 5. Encoder recall gap between the training family and an unseen one.
Outcome encoder_shift(const fs::path& dir) {
    Stopwatch sw;
    const ExperimentConfig cfg = multi_seed_config();
    const TableRun run = run_encoder_shift(cfg);
    const double t = sw.seconds();
    save_table(run.csv, dir / "criterion5_encoder_shift.csv", experiment_config_json(cfg), run.results_json);
    const double gap = json::parse(run.results_json).at("mean_recall_gap").get<double>();
    return {gap >= 0.30 && t <= 900.0, "mean recall gap " + fmt(gap) + ", " + fmt(t, 4) + " s"};
}

// 6. Tabular agent win rate on A and on the perturbed B, every seed.
Outcome rl_shift(const fs::path& dir) {
    Stopwatch sw;
    const ExperimentConfig cfg = multi_seed_config();
    const TableRun run = run_rl_shift(cfg);
    const double t = sw.seconds();
    save_table(run.csv, dir / "criterion6_rl_shift.csv", experiment_config_json(cfg), run.results_json);
    const CsvTable table = parse_csv(run.csv);
    const std::size_t env = table.column("env_id");
    const std::size_t rate = table.column("win_rate_pct");
    bool pass = t <= 120.0;
    std::string detail;
    for (const auto& row : table.rows) {
        const double w = parse_double(row[rate]);
        pass = pass && (row[env] == "A" ? w >= 90.0 : w <= 50.0);
        detail += row[table.column("seed")] + row[env] + "=" + fmt(w) + " ";
    }
    return {pass, detail + "(win %), " + fmt(t, 4) + " s"};
}

// 7. Replay fine-tuning recovers new-family recall without losing the old.
Outcome incremental(const fs::path& dir) {
    Stopwatch sw;
    const ExperimentConfig cfg = base_config();
    const TableRun run = run_incremental(cfg);
    const double t = sw.seconds();
    save_table(run.csv, dir / "criterion7_incremental.csv", experiment_config_json(cfg), run.results_json);
    const json seed = json::parse(run.results_json).at("per_seed").at(0);
    const double recovery = seed.at("recovery_vs_scratch").get<double>();
    const double drop = seed.at("old_recall_drop_pp").get<double>();
    return {recovery >= 0.8 && drop <= 15.0 && t <= 600.0,
            "recovery vs scratch " + fmt(recovery) + ", old-family drop " + fmt(drop) + " pp, " + fmt(t, 4) + " s"};
}

const std::vector<std::pair<int, std::vector<std::string>>> kReports{
    {4, {"criterion4_speedup.csv", "criterion4_oracle.csv"}},
    {5, {"criterion5_encoder_shift.csv"}},
    {6, {"criterion6_rl_shift.csv"}},
    {7, {"criterion7_incremental.csv"}},
};

Outcome run_experiment(int n, const fs::path& dir) {
    switch (n) {
        case 4: return speedup(dir);
        case 5: return encoder_shift(dir);
        case 6: return rl_shift(dir);
        case 7: return incremental(dir);
        default: throw std::invalid_argument("not an experiment criterion");
    }
}

// 8. Rerun 4-7 and compare reports without wall-time columns.
Outcome reproducible(const fs::path& dir) {
    const fs::path rerun = dir / "rerun";
    fs::create_directories(rerun);
    int identical = 0;
    int total = 0;
    std::string differing;
    for (const auto& [n, files] : kReports) {
        bool have_first = true;
        for (const auto& f : files) have_first = have_first && fs::exists(dir / f);
        if (!have_first) run_experiment(n, dir);
        run_experiment(n, rerun);
        for (const auto& f : files) {
            ++total;
            if (strip_columns(read_file(dir / f), is_time_column) ==
                strip_columns(read_file(rerun / f), is_time_column))
                ++identical;
            else
                differing += " " + f;
        }
    }
    return {identical == total, std::to_string(identical) + "/" + std::to_string(total) +
                                    " reports identical" + (differing.empty() ? "" : ", differing:" + differing)};
}

Outcome run_criterion(int n, const fs::path& dir) {
    switch (n) {
        case 1: return planners_agree();
        case 2: return gradients_check();
        case 3: return overfit();
        case 8: return reproducible(dir);
        default: return run_experiment(n, dir);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::vector<int> criteria;
    std::string artifacts = "acceptance_artifacts";
    app.add_option("--criterion", criteria, "Criterion number(s); all when omitted")->check(CLI::Range(1, 8));
    app.add_option("--artifacts", artifacts, "Directory for experiment reports");
    CLI11_PARSE(app, argc, argv);
    if (criteria.empty()) criteria = {1, 2, 3, 4, 5, 6, 7, 8};

    const fs::path dir(artifacts);
    fs::create_directories(dir);
    bool all_pass = true;
    for (int n : criteria) {
        Outcome o;
        try {
            o = run_criterion(n, dir);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")"
                  << std::endl;
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
