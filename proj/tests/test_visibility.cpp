#include <string>

#include "ccdc/rng.hpp"
#include "ccdc/visibility.hpp"
#include "doctest.h"

using namespace ccdc;

namespace {

TensorF rand_tensor(Rng& rng, std::vector<int> shape) {
    TensorF t(std::move(shape));
    for (float& v : t.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    return t;
}

}  // namespace

TEST_CASE("image visibility is the signed difference") {
    SUBCASE("identical inputs give exact zeros") {
        Rng rng(61);
        TensorF a = rand_tensor(rng, {1, 9, 13});
        TensorF v = image_visibility(a, a);
        for (float x : v.data) CHECK(x == 0.0f);
    }
    SUBCASE("warped brighter by 1 gives +1 everywhere") {
        TensorF target = TensorF::zeros({1, 4, 4});
        TensorF warped({1, 4, 4});
        for (float& x : warped.data) x = 1.0f;
        TensorF v = image_visibility(warped, target);
        for (float x : v.data) CHECK(x == 1.0f);
    }
    SUBCASE("antisymmetry under swapping the operands") {
        Rng rng(62);
        TensorF a = rand_tensor(rng, {1, 6, 5});
        TensorF b = rand_tensor(rng, {1, 6, 5});
        TensorF ab = image_visibility(a, b);
        TensorF ba = image_visibility(b, a);
        for (std::size_t i = 0; i < ab.data.size(); ++i) CHECK(ab.data[i] == -ba.data[i]);
    }
    SUBCASE("matches elementwise subtraction exactly, sign and magnitude unclamped") {
        Rng rng(63);
        TensorF a = rand_tensor(rng, {1, 7, 3});
        TensorF b = rand_tensor(rng, {1, 7, 3});
        TensorF v = image_visibility(a, b);
        for (std::size_t i = 0; i < v.data.size(); ++i) CHECK(v.data[i] == a.data[i] - b.data[i]);
    }
    SUBCASE("shape validation") {
        CHECK_THROWS_AS(image_visibility(TensorF({3, 4, 4}), TensorF({3, 4, 4})), ShapeError);
        CHECK_THROWS_AS(image_visibility(TensorF({1, 4, 4}), TensorF({1, 4, 5})), ShapeError);
    }
}

TEST_CASE("feature visibility subtracts level by level") {
    Rng rng(64);
    std::vector<TensorF> warped{rand_tensor(rng, {8, 6, 6}), rand_tensor(rng, {16, 3, 3})};
    std::vector<TensorF> target{rand_tensor(rng, {8, 6, 6}), rand_tensor(rng, {16, 3, 3})};

    SUBCASE("identical pyramids give zero maps") {
        auto v = feature_visibility(warped, warped);
        REQUIRE(v.size() == 2);
        for (const auto& level : v) {
            for (float x : level.data) CHECK(x == 0.0f);
        }
    }
    SUBCASE("matches per-level subtraction exactly") {
        auto v = feature_visibility(warped, target);
        for (std::size_t l = 0; l < 2; ++l) {
            CHECK(v[l].shape == warped[l].shape);
            for (std::size_t i = 0; i < v[l].data.size(); ++i) {
                CHECK(v[l].data[i] == warped[l].data[i] - target[l].data[i]);
            }
        }
    }
    SUBCASE("level-count and per-level shape errors name the level") {
        std::vector<TensorF> short_pyr{warped[0]};
        CHECK_THROWS_AS(feature_visibility(warped, short_pyr), ShapeError);
        std::vector<TensorF> bad = target;
        bad[1] = TensorF({16, 3, 4});
        try {
            feature_visibility(warped, bad);
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            CHECK(std::string(e.what()).find("level 2") != std::string::npos);
        }
    }
}

TEST_CASE("render_visibility maps sign to red/green with clipped magnitude") {
    TensorF v0({1, 1, 5});
    v0.data = {0.5f, -0.25f, 0.0f, 2.0f, -3.0f};
    TensorF img = render_visibility(v0);
    REQUIRE(img.shape == std::vector<int>{3, 1, 5});

    // Positive -> red channel, magnitude as-is below 1.
    CHECK(img.at3(0, 0, 0) == 0.5f);
    CHECK(img.at3(1, 0, 0) == 0.0f);
    // Negative -> green channel.
    CHECK(img.at3(0, 0, 1) == 0.0f);
    CHECK(img.at3(1, 0, 1) == 0.25f);
    // Zero stays black.
    CHECK(img.at3(0, 0, 2) == 0.0f);
    CHECK(img.at3(1, 0, 2) == 0.0f);
    // |v| clips at 1 in both directions.
    CHECK(img.at3(0, 0, 3) == 1.0f);
    CHECK(img.at3(1, 0, 4) == 1.0f);
    // Blue channel is never used.
    for (int x = 0; x < 5; ++x) CHECK(img.at3(2, 0, x) == 0.0f);

    CHECK_THROWS_AS(render_visibility(TensorF({3, 2, 2})), ShapeError);
}
