#include "cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ppe/checkpoint.hpp"
#include "ppe/errors.hpp"
#include "ppe/harness/config.hpp"
#include "ppe/harness/csv.hpp"
#include "ppe/harness/dataset.hpp"
#include "ppe/harness/experiments.hpp"
#include "ppe/harness/report.hpp"

namespace ppe {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Flags shared by the config-driven subcommands. Flags given on the command
// line override values loaded from --config.
struct ExperimentFlags {
    std::string config;
    std::uint64_t seed = 0;
    std::string seeds;
    std::string dataset;
    std::string model;
    std::string arch;
    std::string train_families;
    std::string eval_families;
    int train_count = 0;
    int eval_count = 0;
    int epochs = 0;
    double learning_rate = 0.0;
    std::string planner;
    double threshold = 0.0;
    int dilation = 0;
    std::string out;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* seeds_opt = nullptr;
    CLI::Option* dataset_opt = nullptr;
    CLI::Option* model_opt = nullptr;
    CLI::Option* arch_opt = nullptr;
    CLI::Option* train_families_opt = nullptr;
    CLI::Option* eval_families_opt = nullptr;
    CLI::Option* train_count_opt = nullptr;
    CLI::Option* eval_count_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* lr_opt = nullptr;
    CLI::Option* planner_opt = nullptr;
    CLI::Option* threshold_opt = nullptr;
    CLI::Option* dilation_opt = nullptr;

    void attach(CLI::App* app, bool with_out = true) {
        app->add_option("--config", config, "JSON experiment config")->check(CLI::ExistingFile);
        seed_opt = app->add_option("--seed", seed, "Run seed");
        seeds_opt = app->add_option("--seeds", seeds, "Comma-separated seeds for multi-seed runs");
        dataset_opt = app->add_option("--dataset", dataset, "Dataset root written by `gen`");
        model_opt = app->add_option("--model", model, "Model checkpoint");
        arch_opt = app->add_option("--arch", arch, "Encoder architecture: default | local");
        train_families_opt = app->add_option("--train-families", train_families, "Training families");
        eval_families_opt = app->add_option("--eval-families", eval_families, "Evaluation families");
        train_count_opt = app->add_option("--train-count", train_count, "Training scenes per family");
        eval_count_opt = app->add_option("--eval-count", eval_count, "Evaluation scenes per family");
        epochs_opt = app->add_option("--epochs", epochs, "Training epochs");
        lr_opt = app->add_option("--lr", learning_rate, "Learning rate");
        planner_opt = app->add_option("--planner", planner, "dijkstra | astar");
        threshold_opt = app->add_option("--threshold", threshold, "Mask threshold");
        dilation_opt = app->add_option("--dilation", dilation, "Mask dilation radius");
        if (with_out) app->add_option("--out", out, "Output path")->required();
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_experiment_config(config);
        if (seed_opt->count()) c.seed = seed;
        if (seeds_opt->count()) {
            c.seeds.clear();
            std::stringstream ss(seeds);
            std::string item;
            while (std::getline(ss, item, ',')) {
                try {
                    std::size_t pos = 0;
                    c.seeds.push_back(std::stoull(item, &pos));
                    if (pos != item.size()) throw std::invalid_argument(item);
                } catch (const std::logic_error&) {
                    throw ConfigError("--seeds: '" + item + "' is not a seed");
                }
            }
        }
        if (dataset_opt->count()) c.dataset = dataset;
        if (model_opt->count()) c.model = model;
        if (arch_opt->count()) c.architecture = arch;
        if (train_families_opt->count()) c.train_families = parse_family_list(train_families);
        if (eval_families_opt->count()) c.eval_families = parse_family_list(eval_families);
        if (train_count_opt->count()) c.train_count = train_count;
        if (eval_count_opt->count()) c.eval_count = eval_count;
        if (epochs_opt->count()) c.train.epochs = epochs;
        if (lr_opt->count()) c.train.learning_rate = learning_rate;
        if (planner_opt->count()) {
            if (planner == "dijkstra") c.planner = PlannerKind::Dijkstra;
            else if (planner == "astar") c.planner = PlannerKind::AStar;
            else throw ConfigError("--planner: expected 'dijkstra' or 'astar'");
        }
        if (threshold_opt->count()) c.mask.threshold = threshold;
        if (dilation_opt->count()) c.mask.dilation = dilation;
        c.validate();
        return c;
    }
};

void require_seeds(const ExperimentConfig& c) {
    if (!c.seed && c.seeds.empty()) throw ConfigError("missing required field 'seed'");
}

int cmd_gen(const std::string& families, std::size_t count, std::uint64_t seed,
            const std::string& out_dir, int size, std::ostream& out) {
    const auto fams = parse_family_list(families);
    const DatasetManifest m = gen_dataset(fams, count, seed, out_dir, size);
    out << "wrote " << m.entries.size() << " scenes (" << fams.size() << " families) to "
        << out_dir << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& out_path, std::ostream& out) {
    const std::uint64_t seed = cfg.require_seed();
    const TrainResult r = train_encoder(cfg, seed);
    const fs::path path(out_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_model(r.model, path);

    CsvWriter history({"epoch", "loss"});
    for (std::size_t i = 0; i < r.history.size(); ++i)
        history.row({std::to_string(i + 1), format_double(r.history[i])});
    save_table(history.str(), out_path + ".history.csv", experiment_config_json(cfg));

    out << "trained " << r.model.parameter_count() << " parameters for " << r.history.size()
        << " epochs";
    if (!r.history.empty()) out << ", final loss " << r.history.back();
    out << "\nmodel written to " << out_path << "\n";
    return 0;
}

std::vector<LabeledScene> bench_split(const ExperimentConfig& cfg) {
    const ScenarioFamily& family = cfg.train_families.front();
    if (cfg.dataset) return load_dataset(*cfg.dataset, family.id);
    const std::uint64_t seed = cfg.require_seed();
    return generate_split(family, std::size_t(cfg.eval_count), seed, cfg.scene_size,
                          std::size_t(cfg.train_count));
}

int cmd_bench(const ExperimentConfig& cfg, bool oracle, const std::string& out_path,
              std::ostream& out) {
    if (!oracle && !cfg.model) throw ConfigError("missing required field 'model'");
    const auto scenes = bench_split(cfg);
    BenchmarkReport report;
    if (oracle) {
        std::vector<TimedPrediction> preds(scenes.size());
        for (std::size_t i = 0; i < scenes.size(); ++i) preds[i].probs = oracle_probabilities(scenes[i].label);
        report = speedup_bench(preds, scenes, cfg.mask, cfg.planner);
    } else {
        report = speedup_bench(load_model(*cfg.model), scenes, cfg.mask, cfg.planner);
    }
    save_benchmark(report, out_path, experiment_config_json(cfg));
    out << aggregates_summary(report.aggregates);
    if (!report.skipped.empty()) out << "skipped " << report.skipped.size() << " unsolvable scenes\n";
    return 0;
}

int cmd_plan(const std::string& model_path, const std::string& scene_path,
             const std::string& family, std::uint64_t seed, bool have_seed, int size,
             const ExperimentConfig& cfg, const std::string& out_path, std::ostream& out) {
    GridScene scene;
    if (!scene_path.empty()) {
        try {
            scene = parse_image(decode_ppm(read_file(scene_path)));
        } catch (const std::invalid_argument& e) {
            throw IoFailure(std::string("bad scene image: ") + e.what());
        }
    } else {
        if (!have_seed) throw ConfigError("missing required field 'seed' (or pass --scene)");
        const auto fams = parse_family_list(family);
        scene = generate_scene(fams.front(), seed, size, size);
    }
    const EncoderModel model = load_model(model_path);
    const RegionProbabilities probs = forward(model, encode_input(scene));
    const MaskedPlanOutcome o = plan_with_mask(scene, probs, cfg.mask, cfg.planner);

    json j{{"cost", o.result.cost},
           {"used_fallback", o.used_fallback},
           {"mask_size", o.mask_size},
           {"masked_expansions", o.masked_expansions},
           {"full_expansions", o.full.expansions},
           {"masked_time_s", o.masked_time},
           {"full_time_s", o.full.wall_time},
           {"reduction_expansions_pct", o.reduction_expansions},
           {"reduction_time_pct", o.reduction_time}};
    j["path"] = json::array();
    for (Coord c : o.result.path) j["path"].push_back({c.row, c.col});
    if (!out_path.empty()) write_file(out_path, j.dump(2) + "\n");

    out << "path cost " << o.result.cost << (o.used_fallback ? " (fallback)" : "") << "\n"
        << "expansions " << o.masked_expansions << " masked vs " << o.full.expansions << " full ("
        << o.reduction_expansions << " % reduction)\n";
    return 0;
}

int cmd_table(const TableRun& run, const ExperimentConfig& cfg, const std::string& out_path,
              std::ostream& out) {
    save_table(run.csv, out_path, experiment_config_json(cfg), run.results_json);
    out << run.csv;
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Learned search-region planning: datasets, training, benchmarks", "ppe"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "Generate a labelled scene dataset");
    std::string gen_families = "all", gen_out;
    std::size_t gen_count = 0;
    std::uint64_t gen_seed = 0;
    int gen_size = 60;
    gen->add_option("--families", gen_families, "'all' or comma-separated family names");
    gen->add_option("--count", gen_count, "Scenes per family")->required();
    gen->add_option("--seed", gen_seed, "Base seed")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--size", gen_size, "Grid side length");

    auto* train_cmd = app.add_subcommand("train", "Train an encoder and write a checkpoint");
    ExperimentFlags train_flags;
    train_flags.attach(train_cmd);

    auto* plan = app.add_subcommand("plan", "Plan one scene with a learned mask");
    ExperimentFlags plan_flags;
    plan_flags.attach(plan, false);
    std::string plan_scene, plan_family = "uniform_clutter", plan_out;
    int plan_size = 60;
    plan->add_option("--scene", plan_scene, "Scene image (binary PPM)");
    plan->add_option("--family", plan_family, "Family for a generated scene");
    plan->add_option("--size", plan_size, "Side length of a generated scene");
    plan->add_option("--out", plan_out, "Write the outcome as JSON");

    auto* bench = app.add_subcommand("bench", "Paired full vs masked planning benchmark");
    ExperimentFlags bench_flags;
    bench_flags.attach(bench);
    bool bench_oracle = false;
    bench->add_flag("--oracle", bench_oracle, "Use label masks instead of a model");

    auto* shift_enc = app.add_subcommand("shift-encoder", "Encoder mask recall under family shift");
    ExperimentFlags shift_enc_flags;
    shift_enc_flags.attach(shift_enc);

    auto* shift_rl = app.add_subcommand("shift-rl", "Tabular agent win rate under environment shift");
    ExperimentFlags shift_rl_flags;
    shift_rl_flags.attach(shift_rl);

    auto* incr = app.add_subcommand("incr", "Replay-mixed fine-tuning on a new family");
    ExperimentFlags incr_flags;
    incr_flags.attach(incr);

    auto* report = app.add_subcommand("report", "Verify and summarize a benchmark report");
    std::string report_in;
    report->add_option("--in", report_in, "Benchmark CSV")->required();

    std::vector<const char*> argv{"ppe"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*gen) return cmd_gen(gen_families, gen_count, gen_seed, gen_out, gen_size, out);
        if (*train_cmd) return cmd_train(train_flags.resolve(), train_flags.out, out);
        if (*plan) {
            if (plan_flags.model.empty()) throw ConfigError("missing required field 'model'");
            return cmd_plan(plan_flags.model, plan_scene, plan_family, plan_flags.seed,
                            plan_flags.seed_opt->count() > 0, plan_size, plan_flags.resolve(),
                            plan_out, out);
        }
        if (*bench) return cmd_bench(bench_flags.resolve(), bench_oracle, bench_flags.out, out);
        if (*shift_enc) {
            const auto cfg = shift_enc_flags.resolve();
            require_seeds(cfg);
            return cmd_table(run_encoder_shift(cfg), cfg, shift_enc_flags.out, out);
        }
        if (*shift_rl) {
            const auto cfg = shift_rl_flags.resolve();
            require_seeds(cfg);
            return cmd_table(run_rl_shift(cfg), cfg, shift_rl_flags.out, out);
        }
        if (*incr) {
            const auto cfg = incr_flags.resolve();
            require_seeds(cfg);
            return cmd_table(run_incremental(cfg), cfg, incr_flags.out, out);
        }
        if (*report) {
            const BenchmarkReport r = load_benchmark(report_in);
            out << aggregates_summary(r.aggregates);
            return 0;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace ppe
