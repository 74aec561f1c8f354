#include "ppe/masked_planning.hpp"

#include <algorithm>
#include <sstream>

#include "ppe/errors.hpp"

namespace ppe {

namespace {

PlanResult timed(PlannerKind kind, const GridScene& scene, const Region& region, int repeats) {
    std::vector<double> times;
    PlanResult result;
    for (int i = 0; i < std::max(1, repeats); ++i) {
        result = run_planner(kind, scene, region);
        times.push_back(result.wall_time);
    }
    std::nth_element(times.begin(), times.begin() + long(times.size() / 2), times.end());
    result.wall_time = times[times.size() / 2];
    return result;
}

}  // namespace

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

Mask binarize(const RegionProbabilities& probs, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("mask threshold must lie in (0, 1)");
    Mask m{probs.width, probs.height, std::vector<std::uint8_t>(probs.values.size(), 0)};
    for (std::size_t i = 0; i < probs.values.size(); ++i)
        m.cells[i] = probs.values[i] >= threshold ? 1 : 0;
    return m;
}

Mask dilate(const Mask& mask, int radius) {
    if (radius < 0) throw ConfigError("dilation radius must be >= 0");
    Mask cur = mask;
    const int h = mask.height;
    const int w = mask.width;
    for (int step = 0; step < radius; ++step) {
        Mask next = cur;
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (!cur.cells[std::size_t(r) * w + c]) continue;
                if (r > 0) next.cells[std::size_t(r - 1) * w + c] = 1;
                if (r + 1 < h) next.cells[std::size_t(r + 1) * w + c] = 1;
                if (c > 0) next.cells[std::size_t(r) * w + c - 1] = 1;
                if (c + 1 < w) next.cells[std::size_t(r) * w + c + 1] = 1;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

void MaskConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("mask.threshold must lie in (0, 1)");
    if (dilation < 0) throw ConfigError("mask.dilation must be >= 0");
}

Mask search_region(const GridScene& scene, const RegionProbabilities& probs,
                   const MaskConfig& cfg) {
    cfg.validate();
    if (probs.width != scene.width || probs.height != scene.height ||
        probs.values.size() != scene.size())
        throw ShapeMismatch("probabilities do not match the scene shape");
    Mask region = dilate(binarize(probs, cfg.threshold), cfg.dilation);
    region.cells[scene.index(scene.start)] = 1;
    region.cells[scene.index(scene.goal)] = 1;
    return region;
}

double reduction_percent(double full, double masked) {
    if (full <= 0.0) return 0.0;
    return std::max(-999.0, 100.0 * (full - masked) / full);
}

MaskedPlanOutcome plan_with_mask(const GridScene& scene, const RegionProbabilities& probs,
                                 const MaskConfig& cfg, PlannerKind planner, int timing_repeats) {
    const Mask region = search_region(scene, probs, cfg);
    MaskedPlanOutcome out;
    out.mask_size = region.count();

    const PlanResult restricted =
        timed(planner, scene, Region::from_mask(region.cells), timing_repeats);
    out.restricted_expansions = restricted.expansions;
    out.masked_expansions = restricted.expansions;
    out.masked_time = restricted.wall_time;

    if (restricted.found()) {
        out.result = restricted;
    } else {
        if (cfg.fallback == Fallback::Fail) {
            if (!is_solvable(scene))
                throw NoPathAnywhere("scene has no path from start to goal");
            throw MaskFailed("restricted search found no path and fallback is disabled");
        }
        out.result = timed(planner, scene, Region::full(), timing_repeats);
        if (!out.result.found()) throw NoPathAnywhere("scene has no path from start to goal");
        out.used_fallback = true;
        out.masked_expansions += out.result.expansions;
        out.masked_time += out.result.wall_time;
    }

    out.full = timed(planner, scene, Region::full(), timing_repeats);
    if (!out.full.found()) throw NoPathAnywhere("scene has no path from start to goal");
    out.reduction_expansions =
        reduction_percent(double(out.full.expansions), double(out.masked_expansions));
    out.reduction_time = reduction_percent(out.full.wall_time, out.masked_time);
    return out;
}

MaskScore score_mask(const PathLabel& label, const Mask& mask) {
    if (mask.cells.size() != label.mask.size())
        throw ShapeMismatch("mask and label shapes differ");
    std::size_t hit = 0;
    std::size_t on_path = 0;
    for (std::size_t i = 0; i < label.mask.size(); ++i) {
        if (!label.mask[i]) continue;
        ++on_path;
        if (mask.cells[i]) ++hit;
    }
    const std::size_t region = mask.count();
    MaskScore s;
    s.recall = on_path ? double(hit) / double(on_path) : 0.0;
    s.precision = region ? double(hit) / double(region) : 0.0;
    return s;
}

}  // namespace ppe
