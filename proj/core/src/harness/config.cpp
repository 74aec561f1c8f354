#include "ppe/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ppe/errors.hpp"

namespace ppe {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, std::set<std::string> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& where, T fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    const std::string path = where + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>)
            if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                throw ConfigError(path + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(path + ": expected a number");
    } else {
        if (!v.is_string()) throw ConfigError(path + ": expected a string");
    }
    return v.get<T>();
}

ScenarioFamily parse_family(const json& v, const std::string& where) {
    if (v.is_string()) {
        const auto id = parse_family_name(v.get<std::string>());
        if (!id) throw ConfigError(where + ": unknown family '" + v.get<std::string>() + "'");
        return ScenarioFamily::defaults(*id);
    }
    reject_unknown(v, where, {"family", "clutter", "spacing", "gap"});
    const auto name = get<std::string>(v, "family", where, "");
    const auto id = parse_family_name(name);
    if (!id) throw ConfigError(where + ".family: unknown family '" + name + "'");
    ScenarioFamily f = ScenarioFamily::defaults(*id);
    f.clutter = get<double>(v, "clutter", where, f.clutter);
    f.spacing = get<int>(v, "spacing", where, f.spacing);
    f.gap = get<int>(v, "gap", where, f.gap);
    try {
        f.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return f;
}

std::vector<ScenarioFamily> parse_families(const json& obj, const std::string& key,
                                           const std::string& where,
                                           std::vector<ScenarioFamily> fallback) {
    if (!obj.contains(key)) return fallback;
    const json& arr = obj.at(key);
    const std::string path = where + "." + key;
    if (arr.is_string()) return parse_family_list(arr.get<std::string>());
    if (!arr.is_array()) throw ConfigError(path + ": expected an array of families");
    std::vector<ScenarioFamily> out;
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back(parse_family(arr[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

void parse_train(const json& v, TrainConfig& t) {
    const std::string w = "train";
    reject_unknown(v, w,
                   {"epochs", "batch_size", "learning_rate", "optimizer", "beta1", "beta2",
                    "epsilon", "weighting", "gaussian_sigma", "positive_weight"});
    t.epochs = get<int>(v, "epochs", w, t.epochs);
    t.batch_size = get<int>(v, "batch_size", w, t.batch_size);
    t.learning_rate = get<double>(v, "learning_rate", w, t.learning_rate);
    const auto opt = get<std::string>(v, "optimizer", w, t.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd");
    if (opt == "adam") t.optimizer.kind = OptimizerKind::Adam;
    else if (opt == "sgd") t.optimizer.kind = OptimizerKind::SGD;
    else throw ConfigError("train.optimizer: expected 'adam' or 'sgd'");
    t.optimizer.beta1 = get<double>(v, "beta1", w, t.optimizer.beta1);
    t.optimizer.beta2 = get<double>(v, "beta2", w, t.optimizer.beta2);
    t.optimizer.epsilon = get<double>(v, "epsilon", w, t.optimizer.epsilon);
    const auto weighting = get<std::string>(
        v, "weighting", w, t.weighting.kind == LossWeighting::Kind::Uniform ? "uniform" : "gaussian");
    if (weighting == "uniform") t.weighting.kind = LossWeighting::Kind::Uniform;
    else if (weighting == "gaussian") t.weighting.kind = LossWeighting::Kind::Gaussian;
    else throw ConfigError("train.weighting: expected 'uniform' or 'gaussian'");
    t.weighting.sigma = get<double>(v, "gaussian_sigma", w, t.weighting.sigma);
    t.positive_weight = get<double>(v, "positive_weight", w, t.positive_weight);
}

void parse_mask(const json& v, MaskConfig& m) {
    const std::string w = "mask";
    reject_unknown(v, w, {"threshold", "dilation", "fallback"});
    m.threshold = get<double>(v, "threshold", w, m.threshold);
    m.dilation = get<int>(v, "dilation", w, m.dilation);
    const auto fb = get<std::string>(v, "fallback", w, m.fallback == Fallback::FullGrid ? "full_grid" : "fail");
    if (fb == "full_grid") m.fallback = Fallback::FullGrid;
    else if (fb == "fail") m.fallback = Fallback::Fail;
    else throw ConfigError("mask.fallback: expected 'full_grid' or 'fail'");
}

void parse_rl(const json& v, RlExperimentConfig& r) {
    const std::string w = "rl";
    reject_unknown(v, w,
                   {"alpha", "gamma", "episodes", "epsilon_start", "epsilon_end", "decay_fraction",
                    "random_starts", "grid_size", "clutter", "perturb_k", "eval_episodes"});
    auto& hp = r.hyperparams;
    hp.alpha = get<double>(v, "alpha", w, hp.alpha);
    hp.gamma = get<double>(v, "gamma", w, hp.gamma);
    hp.episodes = get<int>(v, "episodes", w, hp.episodes);
    hp.epsilon_start = get<double>(v, "epsilon_start", w, hp.epsilon_start);
    hp.epsilon_end = get<double>(v, "epsilon_end", w, hp.epsilon_end);
    hp.decay_fraction = get<double>(v, "decay_fraction", w, hp.decay_fraction);
    hp.random_starts = get<bool>(v, "random_starts", w, hp.random_starts);
    r.grid_size = get<int>(v, "grid_size", w, r.grid_size);
    r.clutter = get<double>(v, "clutter", w, r.clutter);
    r.perturb_k = get<int>(v, "perturb_k", w, r.perturb_k);
    r.eval_episodes = get<int>(v, "eval_episodes", w, r.eval_episodes);
}

void parse_incremental(const json& v, IncrementalConfig& c) {
    const std::string w = "incremental";
    reject_unknown(v, w, {"replay_ratio", "base_count", "new_count", "fine_tune_epochs"});
    c.replay_ratio = get<double>(v, "replay_ratio", w, c.replay_ratio);
    c.base_count = get<int>(v, "base_count", w, c.base_count);
    c.new_count = get<int>(v, "new_count", w, c.new_count);
    c.fine_tune_epochs = get<int>(v, "fine_tune_epochs", w, c.fine_tune_epochs);
}

json family_json(const ScenarioFamily& f) {
    return {{"family", std::string(family_name(f.id))},
            {"clutter", f.clutter},
            {"spacing", f.spacing},
            {"gap", f.gap}};
}

}  // namespace

TrainConfig default_train_config() {
    TrainConfig t;
    t.epochs = 8;
    t.batch_size = 16;
    t.learning_rate = 3e-3;
    t.positive_weight = 30.0;
    return t;
}

std::string planner_name(PlannerKind kind) { return kind == PlannerKind::Dijkstra ? "dijkstra" : "astar"; }

std::vector<ScenarioFamily> parse_family_list(const std::string& list) {
    std::vector<ScenarioFamily> out;
    if (list == "all") {
        for (FamilyId id : kAllFamilies) out.push_back(ScenarioFamily::defaults(id));
        return out;
    }
    std::stringstream ss(list);
    std::string name;
    while (std::getline(ss, name, ',')) {
        const auto id = parse_family_name(name);
        if (!id) throw ConfigError("unknown family '" + name + "'");
        out.push_back(ScenarioFamily::defaults(*id));
    }
    if (out.empty()) throw ConfigError("empty family list");
    return out;
}

void ExperimentConfig::validate() const {
    if (architecture != "default" && architecture != "local")
        throw ConfigError("architecture: expected 'default' or 'local'");
    if (scene_size < 3) throw ConfigError("scene_size must be >= 3");
    if (train_count < 1) throw ConfigError("train_count must be >= 1");
    if (eval_count < 1) throw ConfigError("eval_count must be >= 1");
    if (train_families.empty()) throw ConfigError("train_families must not be empty");
    if (eval_families.empty()) throw ConfigError("eval_families must not be empty");
    for (const auto& f : train_families) f.validate();
    for (const auto& f : eval_families) f.validate();
    train.validate();
    mask.validate();
    rl.hyperparams.validate();
    if (rl.grid_size < 3) throw ConfigError("rl.grid_size must be >= 3");
    if (!(rl.clutter >= 0.0 && rl.clutter <= 0.4)) throw ConfigError("rl.clutter must lie in [0, 0.4]");
    if (rl.perturb_k < 0) throw ConfigError("rl.perturb_k must be >= 0");
    if (rl.eval_episodes < 1) throw ConfigError("rl.eval_episodes must be >= 1");
    if (!(incremental.replay_ratio >= 0.0 && incremental.replay_ratio < 1.0))
        throw ConfigError("incremental.replay_ratio must lie in [0, 1)");
    if (incremental.base_count < 1 || incremental.new_count < 1)
        throw ConfigError("incremental counts must be >= 1");
    if (incremental.fine_tune_epochs < 0)
        throw ConfigError("incremental.fine_tune_epochs must be >= 0");
}

Architecture ExperimentConfig::resolved_architecture() const {
    return architecture == "local" ? local_architecture() : default_architecture();
}

std::vector<std::uint64_t> ExperimentConfig::resolved_seeds() const {
    if (!seeds.empty()) return seeds;
    return {require_seed()};
}

std::uint64_t ExperimentConfig::require_seed(const char* field) const {
    if (!seed) throw ConfigError(std::string("missing required field '") + field + "'");
    return *seed;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    const std::string w = "config";
    reject_unknown(doc, w,
                   {"dataset", "model", "seed", "seeds", "architecture", "scene_size",
                    "train_families", "eval_families", "train_count", "eval_count", "train",
                    "mask", "planner", "rl", "incremental"});
    ExperimentConfig c;
    if (doc.contains("dataset")) c.dataset = get<std::string>(doc, "dataset", w, "");
    if (doc.contains("model")) c.model = get<std::string>(doc, "model", w, "");
    if (doc.contains("seed")) c.seed = get<std::uint64_t>(doc, "seed", w, 0);
    if (doc.contains("seeds")) {
        const json& s = doc.at("seeds");
        if (!s.is_array()) throw ConfigError("config.seeds: expected an array");
        for (const auto& v : s) {
            if (!v.is_number_unsigned()) throw ConfigError("config.seeds: expected non-negative integers");
            c.seeds.push_back(v.get<std::uint64_t>());
        }
    }
    c.architecture = get<std::string>(doc, "architecture", w, c.architecture);
    c.scene_size = get<int>(doc, "scene_size", w, c.scene_size);
    c.train_families = parse_families(doc, "train_families", w, c.train_families);
    c.eval_families = parse_families(doc, "eval_families", w, c.eval_families);
    c.train_count = get<int>(doc, "train_count", w, c.train_count);
    c.eval_count = get<int>(doc, "eval_count", w, c.eval_count);
    if (doc.contains("train")) parse_train(doc.at("train"), c.train);
    if (doc.contains("mask")) parse_mask(doc.at("mask"), c.mask);
    if (doc.contains("planner")) {
        const auto p = get<std::string>(doc, "planner", w, "");
        if (p == "dijkstra") c.planner = PlannerKind::Dijkstra;
        else if (p == "astar") c.planner = PlannerKind::AStar;
        else throw ConfigError("config.planner: expected 'dijkstra' or 'astar'");
    }
    if (doc.contains("rl")) parse_rl(doc.at("rl"), c.rl);
    if (doc.contains("incremental")) parse_incremental(doc.at("incremental"), c.incremental);
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

std::string experiment_config_json(const ExperimentConfig& c) {
    json j;
    if (c.dataset) j["dataset"] = *c.dataset;
    if (c.model) j["model"] = *c.model;
    if (c.seed) j["seed"] = *c.seed;
    if (!c.seeds.empty()) j["seeds"] = c.seeds;
    j["architecture"] = c.architecture;
    j["scene_size"] = c.scene_size;
    j["train_families"] = json::array();
    for (const auto& f : c.train_families) j["train_families"].push_back(family_json(f));
    j["eval_families"] = json::array();
    for (const auto& f : c.eval_families) j["eval_families"].push_back(family_json(f));
    j["train_count"] = c.train_count;
    j["eval_count"] = c.eval_count;
    j["train"] = {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"learning_rate", c.train.learning_rate},
                  {"optimizer", c.train.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd"},
                  {"beta1", c.train.optimizer.beta1},
                  {"beta2", c.train.optimizer.beta2},
                  {"epsilon", c.train.optimizer.epsilon},
                  {"weighting", c.train.weighting.kind == LossWeighting::Kind::Uniform ? "uniform" : "gaussian"},
                  {"gaussian_sigma", c.train.weighting.sigma},
                  {"positive_weight", c.train.positive_weight}};
    j["mask"] = {{"threshold", c.mask.threshold},
                 {"dilation", c.mask.dilation},
                 {"fallback", c.mask.fallback == Fallback::FullGrid ? "full_grid" : "fail"}};
    j["planner"] = planner_name(c.planner);
    const auto& hp = c.rl.hyperparams;
    j["rl"] = {{"alpha", hp.alpha},
               {"gamma", hp.gamma},
               {"episodes", hp.episodes},
               {"epsilon_start", hp.epsilon_start},
               {"epsilon_end", hp.epsilon_end},
               {"decay_fraction", hp.decay_fraction},
               {"random_starts", hp.random_starts},
               {"grid_size", c.rl.grid_size},
               {"clutter", c.rl.clutter},
               {"perturb_k", c.rl.perturb_k},
               {"eval_episodes", c.rl.eval_episodes}};
    j["incremental"] = {{"replay_ratio", c.incremental.replay_ratio},
                        {"base_count", c.incremental.base_count},
                        {"new_count", c.incremental.new_count},
                        {"fine_tune_epochs", c.incremental.fine_tune_epochs}};
    return j.dump(2);
}

}  // namespace ppe
