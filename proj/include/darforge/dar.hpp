#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "darforge/attacks.hpp"
#include "darforge/model.hpp"
#include "darforge/tensor.hpp"

namespace darforge {

// One circular region: center pixel and diameter s. Clipped at image
// borders when rasterized.
struct RegionSpec {
    int center_row = 0;
    int center_col = 0;
    int diameter = 0;
};

struct RegionSet {
    std::vector<RegionSpec> regions;
    bool disjoint = true; // pairwise center distance > s for all pairs
};

enum class DarMethod { pgd, uap };
const char* dar_method_name(DarMethod m);
DarMethod dar_method_from_name(const std::string& name);

struct DarConfig {
    int size = 10;                 // region diameter s
    int count = 1;                 // region count n
    DarMethod method = DarMethod::pgd;
    float epsilon = 0.25f;
    float alpha = 0.0625f;         // PGD only
    int steps = 40;                // PGD only
    int smooth_kernel = 3;         // odd, 1 = off
    int smooth_every = 1;          // smoothing cadence in PGD iterations
    std::array<float, 3> color_gains = {1.0f, 1.0f, 1.0f};
    uint64_t seed = 0;
    float pixel_min = 0.0f;
    float pixel_max = 1.0f;

    void validate() const;
    AttackConfig attack_config() const;
};

// Region-value map: per-pixel channel-max |dJ/dX| box-filtered with a
// k = size square kernel (zero padded, normalized by the in-bounds kernel
// area), so each pixel scores a region centered on it. For even k the
// window is biased one pixel up-left, matching a k-diameter disk anchor.
Tensor saliency_map(const Model& model, const Tensor& image, int label, int size);

// Greedy selection of `count` score-maximal centers. After each pick,
// centers within Euclidean distance `size` are disqualified (disjoint
// circles). Ties break lexicographically (row, then col). If the greedy
// pass cannot place all regions, it restarts once with the suppression
// radius halved and flags the set non-disjoint; failing again throws.
RegionSet place_regions(const Tensor& saliency, int size, int count);

// Binary (H, W) mask: 1 where some region has (r-cr)^2 + (c-cc)^2 <= (s/2)^2.
Tensor rasterize_mask(const RegionSet& regions, int height, int width);

// Normalized box filter restricted to the mask: in-mask pixels become the
// mean of in-mask, in-bounds window pixels; off-mask pixels pass through.
Tensor box_filter_masked(const Tensor& image, const Tensor& mask, int k);

// PGD constrained to the mask. The update is masked every step; every
// cfg.smooth_every iterations and after the last one the in-mask pixels are
// box-filter smoothed and re-projected (pixel range, then eps-ball). Color
// gains multiply in-mask pixels once after the final iteration, clipped to
// pixel range but exempt from the eps-ball.
AttackResult masked_pgd(const Model& model, const Tensor& image, int label,
                        const Tensor& mask, const DarConfig& cfg);

// Bounded uniform noise times the mask, then the same smoothing /
// re-projection / color-gain tail as masked_pgd. No model.
AttackResult masked_uap(const Tensor& image, const Tensor& mask, const DarConfig& cfg);

struct DarResult {
    AttackResult attack;
    RegionSet regions;
    Tensor saliency;
    Tensor mask;
    long placement_queries = 0;     // model evaluations spent on placement
    long fill_gradient_queries = 0; // gradient evaluations spent filling regions
};

// Full pipeline: saliency -> placement -> rasterize -> masked fill, with
// original/adversarial confidences recorded on `model`.
DarResult craft_dar(const Model& model, const Tensor& image, int label,
                    const DarConfig& cfg);

} // namespace darforge
