#include "ppe/harness/report.hpp"

#include <sstream>

#include <json.hpp>

#include "ppe/errors.hpp"
#include "ppe/harness/csv.hpp"
#include "ppe/harness/dataset.hpp"
#include "ppe/masked_planning.hpp"

namespace ppe {

using nlohmann::json;

namespace {

const std::vector<std::string> kColumns{
    "scene_id",  "full_expansions", "masked_expansions", "mask_size",
    "full_cost", "masked_cost",     "used_fallback",     "recall",
    "precision", "full_time_s",     "masked_time_s",     "encoder_time_s"};

json aggregates_json(const BenchmarkAggregates& a) {
    return {{"scenes", a.scenes},
            {"reduction_expansions_pct", a.reduction_expansions},
            {"reduction_time_pct", a.reduction_time},
            {"reduction_time_end_to_end_pct", a.reduction_time_end_to_end},
            {"fallback_rate_pct", a.fallback_rate},
            {"mask_recall", a.recall},
            {"mask_precision", a.precision}};
}

std::size_t parse_size(const std::string& s) {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad integer '" + s + "'");
    return static_cast<std::size_t>(v);
}

}  // namespace

BenchmarkAggregates aggregate(const std::vector<BenchmarkRow>& rows) {
    BenchmarkAggregates a;
    a.scenes = rows.size();
    if (rows.empty()) return a;
    std::size_t fallbacks = 0;
    for (const auto& r : rows) {
        a.reduction_expansions += reduction_percent(static_cast<double>(r.full_expansions),
                                                    static_cast<double>(r.masked_expansions));
        a.reduction_time += reduction_percent(r.full_time, r.masked_time);
        a.reduction_time_end_to_end += reduction_percent(r.full_time, r.masked_time + r.encoder_time);
        a.recall += r.recall;
        a.precision += r.precision;
        fallbacks += r.used_fallback;
    }
    const double n = static_cast<double>(rows.size());
    a.reduction_expansions /= n;
    a.reduction_time /= n;
    a.reduction_time_end_to_end /= n;
    a.recall /= n;
    a.precision /= n;
    a.fallback_rate = 100.0 * static_cast<double>(fallbacks) / n;
    return a;
}

std::string benchmark_csv(const BenchmarkReport& report) {
    CsvWriter w(kColumns);
    for (const auto& r : report.rows) {
        w.row({r.scene_id, std::to_string(r.full_expansions), std::to_string(r.masked_expansions),
               std::to_string(r.mask_size), std::to_string(r.full_cost),
               std::to_string(r.masked_cost), r.used_fallback ? "1" : "0",
               format_double(r.recall), format_double(r.precision), format_double(r.full_time),
               format_double(r.masked_time), format_double(r.encoder_time)});
    }
    return w.str();
}

std::vector<BenchmarkRow> parse_benchmark_csv(const std::string& text) {
    std::vector<BenchmarkRow> rows;
    try {
        const CsvTable t = parse_csv(text);
        if (t.header != kColumns) throw IoFailure("unexpected benchmark columns");
        for (const auto& f : t.rows) {
            BenchmarkRow r;
            r.scene_id = f[0];
            r.full_expansions = parse_size(f[1]);
            r.masked_expansions = parse_size(f[2]);
            r.mask_size = parse_size(f[3]);
            r.full_cost = static_cast<int>(parse_size(f[4]));
            r.masked_cost = static_cast<int>(parse_size(f[5]));
            if (f[6] != "0" && f[6] != "1") throw IoFailure("bad used_fallback value");
            r.used_fallback = f[6] == "1";
            r.recall = parse_double(f[7]);
            r.precision = parse_double(f[8]);
            r.full_time = parse_double(f[9]);
            r.masked_time = parse_double(f[10]);
            r.encoder_time = parse_double(f[11]);
            rows.push_back(std::move(r));
        }
    } catch (const std::invalid_argument& e) {
        throw IoFailure(std::string("malformed benchmark report: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw IoFailure(std::string("malformed benchmark report: ") + e.what());
    }
    return rows;
}

void save_table(const std::string& csv, const std::filesystem::path& csv_path,
                const std::string& config_json, const std::string& results_json) {
    if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
    write_file(csv_path, csv);
    json side;
    side["config"] = json::parse(config_json);
    side["results"] = json::parse(results_json);
    write_file(csv_path.string() + ".json", side.dump(2) + "\n");
}

void save_benchmark(const BenchmarkReport& report, const std::filesystem::path& csv_path,
                    const std::string& config_json) {
    json results;
    results["aggregates"] = aggregates_json(report.aggregates);
    results["skipped"] = report.skipped;
    save_table(benchmark_csv(report), csv_path, config_json, results.dump());
}

BenchmarkReport load_benchmark(const std::filesystem::path& csv_path) {
    BenchmarkReport report;
    report.rows = parse_benchmark_csv(read_file(csv_path));
    report.aggregates = aggregate(report.rows);
    json stored;
    try {
        const json side = json::parse(read_file(csv_path.string() + ".json"));
        stored = side.at("results").at("aggregates");
        report.skipped = side.at("results").at("skipped").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw IoFailure(std::string("malformed report sidecar: ") + e.what());
    }
    if (stored != aggregates_json(report.aggregates))
        throw IoFailure("stored aggregates differ from the recomputation over rows");
    return report;
}

std::string aggregates_summary(const BenchmarkAggregates& a) {
    std::ostringstream s;
    s << "scenes " << a.scenes << "\n"
      << "mean expansion reduction " << a.reduction_expansions << " %\n"
      << "mean time reduction (planner) " << a.reduction_time << " %\n"
      << "mean time reduction (end to end) " << a.reduction_time_end_to_end << " %\n"
      << "fallback rate " << a.fallback_rate << " %\n"
      << "mask recall " << a.recall << ", precision " << a.precision << "\n";
    return s.str();
}

}  // namespace ppe
