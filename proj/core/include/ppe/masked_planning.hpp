#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ppe/encoder.hpp"
#include "ppe/grid_env.hpp"
#include "ppe/planners.hpp"

namespace ppe {

struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> cells;

    std::size_t count() const noexcept;
    friend bool operator==(const Mask&, const Mask&) = default;
};

/// mask[c] = 1 iff probs[c] >= threshold. Throws ConfigError unless
/// 0 < threshold < 1.
Mask binarize(const RegionProbabilities& probs, double threshold);

/// `radius` steps of 4-neighbour dilation; radius 0 is the identity.
Mask dilate(const Mask& mask, int radius);

enum class Fallback : std::uint8_t { FullGrid, Fail };

struct MaskConfig {
    double threshold = 0.5;
    int dilation = 2;
    Fallback fallback = Fallback::FullGrid;

    /// Throws ConfigError.
    void validate() const;
};

/// dilate(binarize(probs)) plus the start and goal cells.
Mask search_region(const GridScene& scene, const RegionProbabilities& probs,
                   const MaskConfig& cfg);

struct MaskedPlanOutcome {
    PlanResult result;          // restricted result, or the fallback result
    bool used_fallback = false;
    std::size_t mask_size = 0;  // cells in the search region
    std::size_t restricted_expansions = 0;
    /// Work of the whole masked pipeline: restricted + fallback search.
    std::size_t masked_expansions = 0;
    double masked_time = 0.0;
    PlanResult full;            // paired unrestricted run
    double reduction_expansions = 0.0;  // percent, floored at -999
    double reduction_time = 0.0;        // percent, floored at -999
};

/// Percent reduction 100 * (full - masked) / full, floored at -999.
double reduction_percent(double full, double masked);

/// Restricted search with optional full-grid fallback, paired with a fresh
/// full-grid run on the same thread. Wall times are the median of
/// `timing_repeats` runs. Throws NoPathAnywhere when the scene itself is
/// unsolvable and MaskFailed when fallback is Fail and the region has no path.
MaskedPlanOutcome plan_with_mask(const GridScene& scene, const RegionProbabilities& probs,
                                 const MaskConfig& cfg, PlannerKind planner,
                                 int timing_repeats = 3);

struct MaskScore {
    double recall = 0.0;     // label cells inside the mask / label cells
    double precision = 0.0;  // label cells inside the mask / mask cells (0 if empty)
};

MaskScore score_mask(const PathLabel& label, const Mask& mask);

}  // namespace ppe
