#include "darforge/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "darforge/kernels.hpp"
#include "darforge/rng.hpp"

namespace darforge {

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0f && epsilon <= 1.0f))
        throw std::invalid_argument("attack config: epsilon must be in [0, 1]");
    if (!(alpha >= 0.0f)) throw std::invalid_argument("attack config: alpha must be >= 0");
    if (alpha > epsilon)
        throw std::invalid_argument("attack config: alpha must not exceed epsilon");
    if (steps < 1) throw std::invalid_argument("attack config: steps must be >= 1");
    if (!(pixel_min < pixel_max))
        throw std::invalid_argument("attack config: pixel_min must be below pixel_max");
}

void annotate_confidences(const Model& model, const Tensor& original, int label,
                          AttackResult& r) {
    r.original_confidence = confidence(model, original, label);
    r.adversarial_confidence = confidence(model, r.adversarial, label);
    r.queries += 2;
}

Tensor project_linf(const Tensor& x, const Tensor& center, float epsilon) {
    if (!x.same_shape(center)) throw std::invalid_argument("project_linf: shape mismatch");
    if (epsilon < 0.0f) throw std::invalid_argument("project_linf: negative epsilon");
    Tensor out(x.shape());
    for (size_t i = 0; i < x.size(); ++i)
        out[i] = std::min(std::max(x[i], center[i] - epsilon), center[i] + epsilon);
    return out;
}

AttackResult fgsm(const Model& model, const Tensor& image, int label, const AttackConfig& cfg) {
    cfg.validate();
    AttackResult r;
    const Tensor g = input_gradient(model, image, label);
    r.queries = 1;

    r.adversarial = Tensor(image.shape());
    for (size_t i = 0; i < image.size(); ++i) {
        const float gi = g[i];
        const float s = gi > 0.0f ? 1.0f : (gi < 0.0f ? -1.0f : 0.0f);
        const float v = image[i] + cfg.epsilon * s;
        r.adversarial[i] = std::min(std::max(v, cfg.pixel_min), cfg.pixel_max);
    }
    r.perturbation = subtract(r.adversarial, image);
    annotate_confidences(model, image, label, r);
    return r;
}

AttackResult pgd(const Model& model, const Tensor& image, int label, const AttackConfig& cfg) {
    cfg.validate();
    AttackResult r;
    Tensor x = image; // x0 = image, no random start
    for (int t = 0; t < cfg.steps; ++t) {
        const Tensor g = input_gradient(model, x, label);
        ++r.queries;
        kernels::pgd_step(x.data(), g.data(), nullptr, image.data(), cfg.alpha, cfg.epsilon,
                          cfg.pixel_min, cfg.pixel_max, x.size());
    }
    r.adversarial = std::move(x);
    r.perturbation = subtract(r.adversarial, image);
    annotate_confidences(model, image, label, r);
    return r;
}

AttackResult uap_noise(const Tensor& image, const AttackConfig& cfg) {
    cfg.validate();
    Xoshiro256 rng(cfg.seed);
    AttackResult r;
    r.adversarial = Tensor(image.shape());
    for (size_t i = 0; i < image.size(); ++i) {
        const float eta = rng.symmetric(cfg.epsilon);
        r.adversarial[i] = std::min(std::max(image[i] + eta, cfg.pixel_min), cfg.pixel_max);
    }
    r.perturbation = subtract(r.adversarial, image);
    return r;
}

std::vector<std::vector<float>> opa_default_palette(int channels) {
    std::vector<std::vector<float>> palette;
    for (int i = 0; i < 8; ++i)
        palette.emplace_back(channels, static_cast<float>(i) / 7.0f);
    return palette;
}

OpaResult one_pixel_attack(const Model& model, const Tensor& image, int label,
                           const std::vector<std::vector<float>>& palette,
                           const OpaSearch& search) {
    if (palette.empty()) throw std::invalid_argument("one_pixel_attack: empty palette");
    if (image.rank() != 3) throw std::invalid_argument("one_pixel_attack: (C,H,W) image required");
    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    for (const auto& color : palette)
        if (static_cast<int>(color.size()) != C)
            throw std::invalid_argument("one_pixel_attack: palette color channel mismatch");

    OpaResult best;
    best.attack.original_confidence = confidence(model, image, label);
    best.attack.queries = 0; // counts candidate evaluations only
    float best_conf = std::numeric_limits<float>::infinity();
    Tensor candidate = image;

    auto try_candidate = [&](int row, int col, int pi) {
        for (int c = 0; c < C; ++c) candidate.at(c, row, col) = palette[pi][c];
        const float conf = confidence(model, candidate, label);
        ++best.attack.queries;
        if (conf < best_conf) {
            best_conf = conf;
            best.row = row;
            best.col = col;
            best.palette_index = pi;
            best.attack.adversarial = candidate;
        }
        for (int c = 0; c < C; ++c) candidate.at(c, row, col) = image.at(c, row, col);
    };

    if (search.mode == OpaSearch::Mode::exhaustive) {
        for (int row = 0; row < H; ++row)
            for (int col = 0; col < W; ++col)
                for (int pi = 0; pi < static_cast<int>(palette.size()); ++pi)
                    try_candidate(row, col, pi);
    } else {
        if (search.samples < 1)
            throw std::invalid_argument("one_pixel_attack: random mode needs samples >= 1");
        Xoshiro256 rng(search.seed);
        for (int k = 0; k < search.samples; ++k) {
            const int row = static_cast<int>(rng.below(static_cast<uint64_t>(H)));
            const int col = static_cast<int>(rng.below(static_cast<uint64_t>(W)));
            const int pi = static_cast<int>(rng.below(palette.size()));
            try_candidate(row, col, pi);
        }
    }

    best.color = palette[best.palette_index];
    best.attack.adversarial_confidence = best_conf;
    best.attack.perturbation = subtract(best.attack.adversarial, image);
    return best;
}

} // namespace darforge
