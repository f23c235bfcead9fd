#pragma once

#include <cstdint>
#include <vector>

#include "darforge/model.hpp"
#include "darforge/tensor.hpp"

namespace darforge {

// Scalar hyperparameters shared by the norm-bounded attacks.
struct AttackConfig {
    float epsilon = 0.1f;     // L-inf budget; 0 is the degenerate identity
    float alpha = 0.025f;     // PGD step size, alpha <= epsilon
    int steps = 40;           // PGD iteration count T >= 1
    uint64_t seed = 0;        // noise / sampling streams
    float pixel_min = 0.0f;
    float pixel_max = 1.0f;

    void validate() const; // throws std::invalid_argument
};

struct AttackResult {
    Tensor adversarial;
    Tensor perturbation;               // adversarial - original
    float original_confidence = -1.0f; // -1 = unset (attack had no model)
    float adversarial_confidence = -1.0f;
    long queries = 0;                  // model evaluations consumed
};

// Fills the confidence fields for attacks that ran without a model handle.
void annotate_confidences(const Model& model, const Tensor& original,
                          int label, AttackResult& r);

// Componentwise clamp of x into [center - epsilon, center + epsilon].
Tensor project_linf(const Tensor& x, const Tensor& center, float epsilon);

// adversarial = clip(image + epsilon * sign(dJ/dX), pixel bounds); sign(0) = 0.
AttackResult fgsm(const Model& model, const Tensor& image, int label,
                  const AttackConfig& cfg);

// T iterations of x <- project(clip(x + alpha * sign(dJ/dX at x))),
// starting from the image itself (no random start).
AttackResult pgd(const Model& model, const Tensor& image, int label,
                 const AttackConfig& cfg);

// Bounded uniform noise: eta ~ U[-eps, eps) i.i.d. per component from
// xoshiro256** seeded with cfg.seed; adversarial = clip(image + eta).
// No model: confidences stay unset.
AttackResult uap_noise(const Tensor& image, const AttackConfig& cfg);

struct OpaSearch {
    enum class Mode { exhaustive, random } mode = Mode::exhaustive;
    int samples = 0;       // random mode: number of seeded draws
    uint64_t seed = 0;
};

struct OpaResult {
    AttackResult attack;
    int row = 0, col = 0;
    int palette_index = 0;
    std::vector<float> color; // per-channel values written at (row, col)
};

// Exhaustive mode scans (row, col, palette index) lexicographically and
// returns the strict argmin of true-class confidence (first best wins, which
// is the lexicographic tie-break). Random mode draws `samples` candidates
// (row, col, palette index — three draws in that order per candidate) and
// returns the best seen.
OpaResult one_pixel_attack(const Model& model, const Tensor& image, int label,
                           const std::vector<std::vector<float>>& palette,
                           const OpaSearch& search);

// Default palette: 8 colors with all channels equal to i/7, i = 0..7.
std::vector<std::vector<float>> opa_default_palette(int channels);

} // namespace darforge
