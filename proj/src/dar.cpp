#include "darforge/dar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "darforge/kernels.hpp"
#include "darforge/rng.hpp"

namespace darforge {

const char* dar_method_name(DarMethod m) {
    return m == DarMethod::pgd ? "pgd" : "uap";
}

DarMethod dar_method_from_name(const std::string& name) {
    if (name == "pgd") return DarMethod::pgd;
    if (name == "uap") return DarMethod::uap;
    throw std::invalid_argument("unknown DAR method '" + name + "' (valid: pgd, uap)");
}

void DarConfig::validate() const {
    if (size < 1) throw std::invalid_argument("dar config: size must be >= 1");
    if (count < 1) throw std::invalid_argument("dar config: count must be >= 1");
    if (smooth_kernel < 1 || smooth_kernel % 2 == 0)
        throw std::invalid_argument("dar config: smooth_kernel must be odd and >= 1");
    if (smooth_every < 1) throw std::invalid_argument("dar config: smooth_every must be >= 1");
    for (float g : color_gains)
        if (!(g > 0.0f)) throw std::invalid_argument("dar config: color gains must be positive");
    attack_config().validate();
}

AttackConfig DarConfig::attack_config() const {
    AttackConfig a;
    a.epsilon = epsilon;
    a.alpha = alpha;
    a.steps = steps;
    a.seed = seed;
    a.pixel_min = pixel_min;
    a.pixel_max = pixel_max;
    return a;
}

namespace {

// Box filter with a k x k window, zero padded and normalized by the
// in-bounds window area. For even k the window is biased one pixel up-left:
// offsets in [-(k/2), (k-1)/2].
Tensor box_filter_map(const Tensor& map, int k) {
    const int H = map.dim(0), W = map.dim(1);
    const int lo = -(k / 2), hi = (k - 1) / 2;
    Tensor out({H, W});
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            float sum = 0.0f;
            int area = 0;
            for (int dr = lo; dr <= hi; ++dr) {
                const int rr = r + dr;
                if (rr < 0 || rr >= H) continue;
                for (int dc = lo; dc <= hi; ++dc) {
                    const int cc = c + dc;
                    if (cc < 0 || cc >= W) continue;
                    sum += map.at(rr, cc);
                    ++area;
                }
            }
            out.at(r, c) = sum / static_cast<float>(area);
        }
    return out;
}

} // namespace

Tensor saliency_map(const Model& model, const Tensor& image, int label, int size) {
    if (size < 1) throw std::invalid_argument("saliency_map: size must be >= 1");
    const Tensor g = input_gradient(model, image, label);
    const int C = g.dim(0), H = g.dim(1), W = g.dim(2);
    Tensor score({H, W});
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            float m = 0.0f;
            for (int ch = 0; ch < C; ++ch) m = std::max(m, std::fabs(g.at(ch, r, c)));
            score.at(r, c) = m;
        }
    if (size == 1) return score;
    return box_filter_map(score, size);
}

RegionSet place_regions(const Tensor& saliency, int size, int count) {
    if (saliency.rank() != 2) throw std::invalid_argument("place_regions: (H,W) map required");
    if (count < 1) throw std::invalid_argument("place_regions: count must be >= 1");
    const int H = saliency.dim(0), W = saliency.dim(1);
    if (H < 1 || W < 1)
        throw std::invalid_argument("place_regions: image too small to host a region");

    // suppress_sq = squared minimum center distance scaled by 4 to stay in
    // integers: full pass requires dist > s (4*d2 > 4*s^2), the fallback
    // pass dist > s/2 (4*d2 > s^2).
    auto greedy = [&](long suppress_sq) -> std::vector<RegionSpec> {
        std::vector<RegionSpec> picked;
        std::vector<char> dead(static_cast<size_t>(H) * W, 0);
        for (int k = 0; k < count; ++k) {
            int best_r = -1, best_c = -1;
            float best_v = 0.0f;
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < W; ++c) {
                    if (dead[static_cast<size_t>(r) * W + c]) continue;
                    const float v = saliency.at(r, c);
                    if (best_r < 0 || v > best_v) {
                        best_v = v;
                        best_r = r;
                        best_c = c;
                    }
                }
            if (best_r < 0) return {}; // no feasible center left
            picked.push_back({best_r, best_c, size});
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < W; ++c) {
                    const long dr = r - best_r, dc = c - best_c;
                    if (4 * (dr * dr + dc * dc) <= suppress_sq)
                        dead[static_cast<size_t>(r) * W + c] = 1;
                }
        }
        return picked;
    };

    const long s = size;
    RegionSet out;
    auto regions = greedy(4 * s * s);
    if (static_cast<int>(regions.size()) < count) {
        regions = greedy(s * s); // suppression radius halved once
        if (static_cast<int>(regions.size()) < count)
            throw std::invalid_argument("place_regions: cannot place " + std::to_string(count) +
                                        " regions of diameter " + std::to_string(size) +
                                        " on a " + std::to_string(H) + "x" + std::to_string(W) +
                                        " image");
    }
    out.regions = std::move(regions);

    // Disjointness recorded from the final centers: circles of diameter s
    // share no pixel iff every pairwise center distance exceeds s.
    out.disjoint = true;
    for (size_t i = 0; i < out.regions.size() && out.disjoint; ++i)
        for (size_t j = i + 1; j < out.regions.size(); ++j) {
            const long dr = out.regions[i].center_row - out.regions[j].center_row;
            const long dc = out.regions[i].center_col - out.regions[j].center_col;
            if (dr * dr + dc * dc <= s * s) {
                out.disjoint = false;
                break;
            }
        }
    return out;
}

Tensor rasterize_mask(const RegionSet& regions, int height, int width) {
    Tensor mask({height, width});
    for (const auto& reg : regions.regions) {
        const int s = reg.diameter;
        const int reach = s / 2 + 1;
        const int r0 = std::max(0, reg.center_row - reach);
        const int r1 = std::min(height - 1, reg.center_row + reach);
        const int c0 = std::max(0, reg.center_col - reach);
        const int c1 = std::min(width - 1, reg.center_col + reach);
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) {
                const long dr = r - reg.center_row, dc = c - reg.center_col;
                // dist <= s/2  <=>  4*(dr^2 + dc^2) <= s^2
                if (4 * (dr * dr + dc * dc) <= static_cast<long>(s) * s) mask.at(r, c) = 1.0f;
            }
    }
    return mask;
}

Tensor box_filter_masked(const Tensor& image, const Tensor& mask, int k) {
    if (k < 1 || k % 2 == 0)
        throw std::invalid_argument("box_filter_masked: kernel must be odd and >= 1");
    if (image.rank() != 3 || mask.rank() != 2 || image.dim(1) != mask.dim(0) ||
        image.dim(2) != mask.dim(1))
        throw std::invalid_argument("box_filter_masked: shape mismatch");
    if (k == 1) return image;

    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const int half = k / 2;
    Tensor out = image;
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            if (mask.at(r, c) == 0.0f) continue;
            for (int ch = 0; ch < C; ++ch) {
                float sum = 0.0f;
                int cnt = 0;
                for (int dr = -half; dr <= half; ++dr) {
                    const int rr = r + dr;
                    if (rr < 0 || rr >= H) continue;
                    for (int dc = -half; dc <= half; ++dc) {
                        const int cc = c + dc;
                        if (cc < 0 || cc >= W) continue;
                        if (mask.at(rr, cc) == 0.0f) continue;
                        sum += image.at(ch, rr, cc);
                        ++cnt;
                    }
                }
                out.at(ch, r, c) = sum / static_cast<float>(cnt); // cnt >= 1: (r,c) is in-mask
            }
        }
    return out;
}

namespace {

void check_mask(const Tensor& image, const Tensor& mask) {
    if (image.rank() != 3) throw std::invalid_argument("masked attack: (C,H,W) image required");
    if (mask.rank() != 2 || mask.dim(0) != image.dim(1) || mask.dim(1) != image.dim(2))
        throw std::invalid_argument("masked attack: mask shape mismatch");
    bool any = false;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0.0f && mask[i] != 1.0f)
            throw std::invalid_argument("masked attack: mask must be binary");
        any = any || mask[i] == 1.0f;
    }
    if (!any) throw std::invalid_argument("masked attack: mask selects no pixels");
}

// Pixel-range clip followed by the eps-ball projection, applied in place.
// Off-mask pixels equal the original, so both clamps leave them untouched.
void reproject(Tensor& x, const Tensor& image, const DarConfig& cfg) {
    for (size_t i = 0; i < x.size(); ++i) {
        float t = std::min(std::max(x[i], cfg.pixel_min), cfg.pixel_max);
        x[i] = std::min(std::max(t, image[i] - cfg.epsilon), image[i] + cfg.epsilon);
    }
}

// In-mask per-channel gains, clipped to pixel range; exempt from the
// eps-ball.
void apply_color_gains(Tensor& x, const Tensor& mask, const DarConfig& cfg) {
    if (cfg.color_gains[0] == 1.0f && cfg.color_gains[1] == 1.0f && cfg.color_gains[2] == 1.0f)
        return;
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    for (int ch = 0; ch < C; ++ch) {
        const float gain = cfg.color_gains[static_cast<size_t>(ch) % 3];
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                if (mask.at(r, c) == 0.0f) continue;
                x.at(ch, r, c) =
                    std::min(std::max(x.at(ch, r, c) * gain, cfg.pixel_min), cfg.pixel_max);
            }
    }
}

} // namespace

AttackResult masked_pgd(const Model& model, const Tensor& image, int label, const Tensor& mask,
                        const DarConfig& cfg) {
    cfg.validate();
    check_mask(image, mask);

    const int C = image.dim(0);
    const size_t plane = mask.size();
    AttackResult r;
    Tensor x = image;
    for (int t = 1; t <= cfg.steps; ++t) {
        const Tensor g = input_gradient(model, x, label);
        ++r.queries;
        for (int ch = 0; ch < C; ++ch)
            kernels::pgd_step(x.data() + ch * plane, g.data() + ch * plane, mask.data(),
                              image.data() + ch * plane, cfg.alpha, cfg.epsilon, cfg.pixel_min,
                              cfg.pixel_max, plane);
        if (cfg.smooth_kernel > 1 && (t % cfg.smooth_every == 0 || t == cfg.steps)) {
            x = box_filter_masked(x, mask, cfg.smooth_kernel);
            reproject(x, image, cfg);
        }
    }
    apply_color_gains(x, mask, cfg);
    r.adversarial = std::move(x);
    r.perturbation = subtract(r.adversarial, image);
    annotate_confidences(model, image, label, r);
    return r;
}

AttackResult masked_uap(const Tensor& image, const Tensor& mask, const DarConfig& cfg) {
    cfg.validate();
    check_mask(image, mask);

    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    Xoshiro256 rng(cfg.seed);
    AttackResult r;
    Tensor x(image.shape());
    for (int ch = 0; ch < C; ++ch)
        for (int row = 0; row < H; ++row)
            for (int col = 0; col < W; ++col) {
                const float eta = rng.symmetric(cfg.epsilon); // drawn for every component
                const float v = image.at(ch, row, col) + eta * mask.at(row, col);
                x.at(ch, row, col) = std::min(std::max(v, cfg.pixel_min), cfg.pixel_max);
            }
    if (cfg.smooth_kernel > 1) {
        x = box_filter_masked(x, mask, cfg.smooth_kernel);
        reproject(x, image, cfg);
    }
    apply_color_gains(x, mask, cfg);
    r.adversarial = std::move(x);
    r.perturbation = subtract(r.adversarial, image);
    return r;
}

DarResult craft_dar(const Model& model, const Tensor& image, int label, const DarConfig& cfg) {
    cfg.validate();
    DarResult out;
    out.saliency = saliency_map(model, image, label, cfg.size);
    out.placement_queries = 1; // one gradient evaluation
    out.regions = place_regions(out.saliency, cfg.size, cfg.count);
    out.mask = rasterize_mask(out.regions, image.dim(1), image.dim(2));

    if (cfg.method == DarMethod::pgd) {
        out.attack = masked_pgd(model, image, label, out.mask, cfg);
        out.fill_gradient_queries = cfg.steps;
    } else {
        out.attack = masked_uap(image, out.mask, cfg);
        out.fill_gradient_queries = 0;
        annotate_confidences(model, image, label, out.attack);
    }
    out.attack.queries += out.placement_queries;
    return out;
}

} // namespace darforge
