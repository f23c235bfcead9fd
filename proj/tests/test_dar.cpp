#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "darforge/attacks.hpp"
#include "darforge/dar.hpp"
#include "test_helpers.hpp"

using namespace darforge;
using dftest::make_model;
using dftest::random_tensor;

namespace {

Model rgb_model(uint64_t seed, int hw = 16) {
    return make_model({3, hw, hw}, 4,
                      {Layer::conv2d(3, 4, 3, 1, 1), Layer::relu(), Layer::maxpool2d(2, 2),
                       Layer::flatten(), Layer::dense(4 * (hw / 2) * (hw / 2), 4),
                       Layer::softmax_xent()},
                      seed);
}

// dense model whose input gradient is nonzero at exactly one pixel
Model pick_pixel_model(int h, int w, int r, int c) {
    Model m;
    m.name = "pick";
    m.input_shape = {1, h, w};
    m.num_classes = 2;
    m.layers = {Layer::flatten(), Layer::dense(h * w, 2), Layer::softmax_xent()};
    m.layers[1].weight = Tensor::zeros({2, h * w});
    m.layers[1].weight[r * w + c] = 1.0f; // logit 0 reads that pixel
    m.validate();
    return m;
}

Tensor full_mask(int h, int w) { return Tensor::full({h, w}, 1.0f); }

} // namespace

TEST_CASE("saliency map of a zero-gradient model is all zeros") {
    Model m = rgb_model(1, 8);
    for (auto& l : m.layers) {
        for (size_t i = 0; i < l.weight.size(); ++i) l.weight[i] = 0.0f;
        for (size_t i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.0f;
    }
    const Tensor map = saliency_map(m, random_tensor({3, 8, 8}, 2), 0, 3);
    for (size_t i = 0; i < map.size(); ++i) CHECK(map[i] == 0.0f);
}

TEST_CASE("saliency spreads a single gradient spike over the kernel window") {
    const Model m = pick_pixel_model(5, 5, 2, 2);
    const Tensor img = random_tensor({1, 5, 5}, 3);
    const Tensor g = input_gradient(m, img, 0);
    const float v = std::fabs(g[2 * 5 + 2]);
    REQUIRE(v > 0.0f);

    const Tensor map = saliency_map(m, img, 0, 3);
    REQUIRE(map.shape() == std::vector<int>{5, 5});
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) {
            if (std::abs(r - 2) <= 1 && std::abs(c - 2) <= 1)
                CHECK(map.at(r, c) == doctest::Approx(v / 9.0f).epsilon(1e-5));
            else
                CHECK(map.at(r, c) == 0.0f);
        }
}

TEST_CASE("saliency renormalizes at the image edge") {
    const Model m = pick_pixel_model(5, 5, 0, 0);
    const Tensor img = random_tensor({1, 5, 5}, 4);
    const Tensor g = input_gradient(m, img, 0);
    const float v = std::fabs(g[0]);
    const Tensor map = saliency_map(m, img, 0, 3);
    // corner window holds 4 in-bounds cells
    CHECK(map.at(0, 0) == doctest::Approx(v / 4.0f).epsilon(1e-5));
    CHECK(map.at(0, 1) == doctest::Approx(v / 6.0f).epsilon(1e-5));
    CHECK(map.at(1, 1) == doctest::Approx(v / 9.0f).epsilon(1e-5));
}

TEST_CASE("place_regions: uniform saliency breaks ties lexicographically") {
    const Tensor flat = Tensor::full({9, 9}, 0.25f);
    const RegionSet set = place_regions(flat, 3, 1);
    REQUIRE(set.regions.size() == 1);
    CHECK(set.regions[0].center_row == 0);
    CHECK(set.regions[0].center_col == 0);
    CHECK(set.disjoint);
}

TEST_CASE("place_regions picks two separated peaks") {
    Tensor map({10, 10});
    map.at(2, 2) = 1.0f;
    map.at(8, 7) = 0.9f;
    const RegionSet set = place_regions(map, 4, 2);
    REQUIRE(set.regions.size() == 2);
    CHECK(set.regions[0].center_row == 2);
    CHECK(set.regions[0].center_col == 2);
    CHECK(set.regions[1].center_row == 8);
    CHECK(set.regions[1].center_col == 7);
    CHECK(set.disjoint);
}

TEST_CASE("place_regions suppression pushes the second pick outside the disk") {
    Tensor map({12, 12});
    map.at(5, 5) = 1.0f;
    map.at(5, 6) = 0.99f;   // suppressed: distance 1 <= s
    map.at(5, 11) = 0.5f;   // best feasible runner-up at distance 6 on the row
    const RegionSet set = place_regions(map, 5, 2);
    REQUIRE(set.regions.size() == 2);
    CHECK(set.regions[0].center_row == 5);
    CHECK(set.regions[0].center_col == 5);
    CHECK(set.regions[1].center_row == 5);
    CHECK(set.regions[1].center_col == 11);
    CHECK(set.disjoint);
}

TEST_CASE("place_regions falls back to the halved radius and flags it") {
    // 5x5 map cannot host two disjoint s=6 regions (max center distance
    // sqrt(32) < 6), but can after halving the suppression radius
    const Tensor flat = Tensor::full({5, 5}, 1.0f);
    const RegionSet set = place_regions(flat, 6, 2);
    REQUIRE(set.regions.size() == 2);
    CHECK_FALSE(set.disjoint);
    // and an impossible request still throws
    CHECK_THROWS_AS(place_regions(Tensor::full({3, 3}, 1.0f), 6, 4), std::invalid_argument);
}

TEST_CASE("rasterize_mask draws the five-pixel plus for s=2") {
    RegionSet set;
    set.regions.push_back({5, 5, 2});
    const Tensor mask = rasterize_mask(set, 11, 11);
    int on = 0;
    for (size_t i = 0; i < mask.size(); ++i) on += mask[i] == 1.0f ? 1 : 0;
    CHECK(on == 5);
    CHECK(mask.at(5, 5) == 1.0f);
    CHECK(mask.at(4, 5) == 1.0f);
    CHECK(mask.at(6, 5) == 1.0f);
    CHECK(mask.at(5, 4) == 1.0f);
    CHECK(mask.at(5, 6) == 1.0f);
    CHECK(mask.at(4, 4) == 0.0f);
}

TEST_CASE("rasterize_mask: s=1 is a single pixel; corner disks clip") {
    RegionSet one;
    one.regions.push_back({3, 3, 1});
    const Tensor m1 = rasterize_mask(one, 8, 8);
    int on = 0;
    for (size_t i = 0; i < m1.size(); ++i) on += m1[i] == 1.0f ? 1 : 0;
    CHECK(on == 1);
    CHECK(m1.at(3, 3) == 1.0f);

    RegionSet corner;
    corner.regions.push_back({0, 0, 6});
    const Tensor mc = rasterize_mask(corner, 8, 8);
    // quarter disk: pixels with r,c >= 0 and r^2+c^2 <= 9
    int expect = 0;
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            if (4 * (r * r + c * c) <= 36) ++expect;
    int got = 0;
    for (size_t i = 0; i < mc.size(); ++i) got += mc[i] == 1.0f ? 1 : 0;
    CHECK(got == expect);
}

TEST_CASE("box_filter_masked: identity at k=1, constants unchanged, window mean") {
    const Tensor img = random_tensor({1, 7, 7}, 10);
    const Tensor mask = full_mask(7, 7);
    CHECK(dftest::bits_equal(box_filter_masked(img, mask, 1), img));

    const Tensor constant = Tensor::full({2, 5, 5}, 0.37f);
    const Tensor smoothed = box_filter_masked(constant, full_mask(5, 5), 3);
    for (size_t i = 0; i < smoothed.size(); ++i)
        CHECK(smoothed[i] == doctest::Approx(0.37f).epsilon(1e-6));

    // 3x3 fully masked patch holding 0/8..8/8: center becomes 0.5
    Tensor patch({1, 3, 3});
    for (int i = 0; i < 9; ++i) patch[i] = static_cast<float>(i) / 8.0f;
    const Tensor out = box_filter_masked(patch, full_mask(3, 3), 3);
    CHECK(out.at(0, 1, 1) == doctest::Approx(0.5f).epsilon(1e-6));
    CHECK_THROWS_AS(box_filter_masked(patch, full_mask(3, 3), 2), std::invalid_argument);
}

TEST_CASE("box_filter_masked leaves off-mask pixels untouched and mixes only in-mask") {
    Tensor img = random_tensor({1, 6, 6}, 11);
    Tensor mask({6, 6});
    mask.at(2, 2) = mask.at(2, 3) = mask.at(3, 2) = mask.at(3, 3) = 1.0f;
    const Tensor out = box_filter_masked(img, mask, 3);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c)
            if (mask.at(r, c) == 0.0f) CHECK(out.at(0, r, c) == img.at(0, r, c));
    // every window sees exactly the four in-mask cells: the block becomes its mean
    const float mean =
        (img.at(0, 2, 2) + img.at(0, 2, 3) + img.at(0, 3, 2) + img.at(0, 3, 3)) / 4.0f;
    CHECK(out.at(0, 2, 2) == doctest::Approx(mean).epsilon(1e-6));
    CHECK(out.at(0, 3, 3) == doctest::Approx(mean).epsilon(1e-6));
    // equal window counts make the filter doubly stochastic: in-mask mean is conserved
    const float mean_after = (out.at(0, 2, 2) + out.at(0, 2, 3) + out.at(0, 3, 2) +
                              out.at(0, 3, 3)) / 4.0f;
    CHECK(std::fabs(mean_after - mean) <= 1e-5f);
}

TEST_CASE("masked_pgd with a full mask, k=1 and unit gains equals full-image pgd") {
    for (uint64_t seed = 0; seed < 6; ++seed) {
        const Model m = rgb_model(seed + 30, 8);
        const Tensor img = random_tensor({3, 8, 8}, seed + 40);
        DarConfig dc;
        dc.epsilon = 0.15f;
        dc.alpha = 0.04f;
        dc.steps = 6;
        dc.smooth_kernel = 1;
        dc.color_gains = {1.0f, 1.0f, 1.0f};
        const AttackResult a = masked_pgd(m, img, 1, full_mask(8, 8), dc);
        const AttackResult b = pgd(m, img, 1, dc.attack_config());
        CHECK(dftest::bits_equal(a.adversarial, b.adversarial));
    }
}

TEST_CASE("masked attacks leave off-mask pixels bit-identical") {
    const Model m = rgb_model(50, 16);
    const Tensor img = random_tensor({3, 16, 16}, 51);
    RegionSet set;
    set.regions.push_back({4, 4, 6});
    set.regions.push_back({12, 11, 6});
    const Tensor mask = rasterize_mask(set, 16, 16);

    DarConfig dc;
    dc.epsilon = 0.3f;
    dc.alpha = 0.075f;
    dc.steps = 10;
    dc.smooth_kernel = 3;
    dc.seed = 5;

    const AttackResult p = masked_pgd(m, img, 2, mask, dc);
    const AttackResult u = masked_uap(img, mask, dc);
    for (int ch = 0; ch < 3; ++ch)
        for (int r = 0; r < 16; ++r)
            for (int c = 0; c < 16; ++c)
                if (mask.at(r, c) == 0.0f) {
                    CHECK(p.adversarial.at(ch, r, c) == img.at(ch, r, c));
                    CHECK(u.adversarial.at(ch, r, c) == img.at(ch, r, c));
                    CHECK(p.perturbation.at(ch, r, c) == 0.0f);
                    CHECK(u.perturbation.at(ch, r, c) == 0.0f);
                }
    CHECK(linf_distance(p.adversarial, img) <= dc.epsilon + 1e-6f);
    CHECK(linf_distance(u.adversarial, img) <= dc.epsilon + 1e-6f);
}

TEST_CASE("masked attacks validate their masks") {
    const Model m = rgb_model(60, 8);
    const Tensor img = random_tensor({3, 8, 8}, 61);
    DarConfig dc;
    CHECK_THROWS_AS(masked_pgd(m, img, 0, Tensor({8, 8}), dc), std::invalid_argument);
    CHECK_THROWS_AS(masked_uap(img, Tensor({8, 8}), dc), std::invalid_argument);
    CHECK_THROWS_AS(masked_pgd(m, img, 0, Tensor({4, 4}), dc), std::invalid_argument);
    Tensor soft({8, 8});
    soft.at(1, 1) = 0.5f;
    CHECK_THROWS_AS(masked_pgd(m, img, 0, soft, dc), std::invalid_argument);
}

TEST_CASE("masked_uap: zero budget is the identity, seeds are reproducible") {
    const Tensor img = random_tensor({3, 8, 8}, 70);
    Tensor mask({8, 8});
    for (int r = 2; r < 6; ++r)
        for (int c = 2; c < 6; ++c) mask.at(r, c) = 1.0f;
    DarConfig dc;
    dc.epsilon = 0.0f;
    dc.alpha = 0.0f;
    dc.smooth_kernel = 1;
    CHECK(dftest::bits_equal(masked_uap(img, mask, dc).adversarial, img));

    dc.epsilon = 0.25f;
    dc.alpha = 0.0625f;
    dc.seed = 123;
    const AttackResult a = masked_uap(img, mask, dc);
    const AttackResult b = masked_uap(img, mask, dc);
    CHECK(dftest::bits_equal(a.adversarial, b.adversarial));
}

TEST_CASE("color gains tint in-mask pixels only, clipped to range") {
    const Tensor img = Tensor::full({3, 6, 6}, 0.5f);
    Tensor mask({6, 6});
    mask.at(2, 2) = 1.0f;
    DarConfig dc;
    dc.epsilon = 0.0f;
    dc.alpha = 0.0f;
    dc.smooth_kernel = 1;
    dc.color_gains = {1.5f, 1.0f, 4.0f};
    const AttackResult r = masked_uap(img, mask, dc);
    CHECK(r.adversarial.at(0, 2, 2) == doctest::Approx(0.75f));
    CHECK(r.adversarial.at(1, 2, 2) == 0.5f);
    CHECK(r.adversarial.at(2, 2, 2) == 1.0f); // 2.0 clipped
    CHECK(r.adversarial.at(0, 0, 0) == 0.5f); // off-mask untouched
}

TEST_CASE("craft_dar composes the pipeline deterministically") {
    const Model m = rgb_model(80, 16);
    const Tensor img = random_tensor({3, 16, 16}, 81);
    DarConfig dc;
    dc.size = 6;
    dc.count = 2;
    dc.method = DarMethod::pgd;
    dc.epsilon = 0.25f;
    dc.alpha = 0.0625f;
    dc.steps = 8;
    dc.seed = 3;

    const DarResult a = craft_dar(m, img, 1, dc);
    const DarResult b = craft_dar(m, img, 1, dc);
    CHECK(dftest::bits_equal(a.attack.adversarial, b.attack.adversarial));
    CHECK(a.regions.regions.size() == 2);
    REQUIRE(a.regions.regions.size() == b.regions.regions.size());
    for (size_t i = 0; i < a.regions.regions.size(); ++i) {
        CHECK(a.regions.regions[i].center_row == b.regions.regions[i].center_row);
        CHECK(a.regions.regions[i].center_col == b.regions.regions[i].center_col);
    }
    CHECK(a.fill_gradient_queries == dc.steps);
    CHECK(a.attack.queries == dc.steps + 2 + 1);

    dc.method = DarMethod::uap;
    const DarResult u = craft_dar(m, img, 1, dc);
    CHECK(u.fill_gradient_queries == 0); // placement is the only gradient use
    CHECK(u.placement_queries == 1);
    CHECK(u.attack.queries == 3);
    CHECK(u.attack.original_confidence >= 0.0f);
}

TEST_CASE("disjoint region sets never share a rasterized pixel") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const Tensor map = random_tensor({20, 20}, seed + 200);
        const RegionSet set = place_regions(map, 6, 3);
        if (!set.disjoint) continue;
        Tensor acc({20, 20});
        for (const auto& reg : set.regions) {
            RegionSet single;
            single.regions.push_back(reg);
            const Tensor m = rasterize_mask(single, 20, 20);
            for (size_t i = 0; i < m.size(); ++i) {
                CHECK(acc[i] + m[i] <= 1.0f);
                acc[i] += m[i];
            }
        }
    }
}
