#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace ppe {

/// One paired full-vs-masked run.
struct BenchmarkRow {
    std::string scene_id;
    std::size_t full_expansions = 0;
    std::size_t masked_expansions = 0;
    std::size_t mask_size = 0;
    int full_cost = 0;
    int masked_cost = 0;
    bool used_fallback = false;
    double recall = 0.0;
    double precision = 0.0;
    double full_time = 0.0;     // seconds
    double masked_time = 0.0;   // seconds, planner only
    double encoder_time = 0.0;  // seconds
};

struct BenchmarkAggregates {
    std::size_t scenes = 0;
    double reduction_expansions = 0.0;      // mean percent
    double reduction_time = 0.0;            // mean percent, planner only
    double reduction_time_end_to_end = 0.0; // mean percent, encoder included
    double fallback_rate = 0.0;             // percent
    double recall = 0.0;
    double precision = 0.0;

    friend bool operator==(const BenchmarkAggregates&, const BenchmarkAggregates&) = default;
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;  // scene-id order of the input split
    std::vector<std::string> skipped;  // unsolvable scenes
    BenchmarkAggregates aggregates;
};

/// Means of per-row percentages, each floored at -999.
BenchmarkAggregates aggregate(const std::vector<BenchmarkRow>& rows);

std::string benchmark_csv(const BenchmarkReport& report);
/// Throws IoFailure on a malformed table.
std::vector<BenchmarkRow> parse_benchmark_csv(const std::string& text);

/// Writes `csv_path` and `csv_path` + ".json" holding the aggregates, the
/// skipped scene ids and `config_json` (any JSON value).
void save_benchmark(const BenchmarkReport& report, const std::filesystem::path& csv_path,
                    const std::string& config_json);

/// Reloads a saved report and checks the stored aggregates equal a
/// recomputation from the rows. Throws IoFailure.
BenchmarkReport load_benchmark(const std::filesystem::path& csv_path);

/// Writes a CSV report and its JSON sidecar ({"config": ..., "results": ...}).
void save_table(const std::string& csv, const std::filesystem::path& csv_path,
                const std::string& config_json, const std::string& results_json = "{}");

std::string aggregates_summary(const BenchmarkAggregates& a);

}  // namespace ppe
