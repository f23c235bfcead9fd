#include <doctest.h>

#include <stdexcept>

#include "darforge/tensor.hpp"
#include "test_helpers.hpp"

using namespace darforge;

TEST_CASE("tensor shape/data consistency") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.all_finite());
    CHECK_THROWS_AS(Tensor({2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f}), std::invalid_argument);
    CHECK(Tensor({3}, {1, 2, 3}).shape_str() == "(3)");
}

TEST_CASE("tensor indexing is row-major") {
    Tensor t({2, 2, 3});
    t.at(1, 0, 2) = 5.0f;
    CHECK(t[1 * 2 * 3 + 0 * 3 + 2] == 5.0f);
    Tensor m({2, 4});
    m.at(1, 3) = 2.0f;
    CHECK(m[7] == 2.0f);
}

TEST_CASE("linf distance and subtract") {
    const Tensor a({3}, {0.0f, 0.5f, 1.0f});
    const Tensor b({3}, {0.1f, 0.5f, 0.7f});
    CHECK(linf_distance(a, b) == doctest::Approx(0.3f));
    const Tensor d = subtract(a, b);
    CHECK(d[2] == doctest::Approx(0.3f));
    CHECK_THROWS_AS(linf_distance(a, Tensor({2})), std::invalid_argument);
}

TEST_CASE("non-finite detection") {
    Tensor t({2}, {1.0f, 2.0f});
    CHECK(t.all_finite());
    t[1] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(t.all_finite());
}
