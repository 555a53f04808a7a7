#include <cmath>

#include "ccdc/flow_estimator.hpp"
#include "ccdc/rng.hpp"
#include "doctest.h"

using namespace ccdc;

namespace {

TensorF rand_image(Rng& rng, int c, int h, int w) {
    TensorF t({c, h, w});
    for (float& v : t.data) v = static_cast<float>(rng.uniform());
    return t;
}

FlowNetParams<float> make_params(unsigned seed, double mult = 0.125) {
    Rng rng(seed);
    return FlowNetParams<float>(mult, rng);
}

}  // namespace

TEST_CASE("flow pyramid shapes at 256x256") {
    Rng rng(51);
    auto params = make_params(51);
    FlowPyramid flows = estimate_flow(rand_image(rng, 1, 256, 256), rand_image(rng, 3, 256, 256), params);
    REQUIRE(flows.size() == 5);
    CHECK(flows[0].shape == std::vector<int>{2, 256, 256});
    CHECK(flows[1].shape == std::vector<int>{2, 128, 128});
    CHECK(flows[2].shape == std::vector<int>{2, 64, 64});
    CHECK(flows[3].shape == std::vector<int>{2, 32, 32});
    CHECK(flows[4].shape == std::vector<int>{2, 16, 16});
}

TEST_CASE("flow pyramid shapes at 64x64 (padded to one 64-multiple tile)") {
    Rng rng(52);
    auto params = make_params(52);
    FlowPyramid flows = estimate_flow(rand_image(rng, 1, 64, 64), rand_image(rng, 3, 64, 64), params);
    CHECK(flows[0].shape == std::vector<int>{2, 64, 64});
    CHECK(flows[1].shape == std::vector<int>{2, 32, 32});
    CHECK(flows[2].shape == std::vector<int>{2, 16, 16});
    CHECK(flows[3].shape == std::vector<int>{2, 8, 8});
    CHECK(flows[4].shape == std::vector<int>{2, 4, 4});
}

TEST_CASE("upsampled levels are anchored doublings of the native scale-2 flow") {
    Rng rng(53);
    auto params = make_params(53);
    FlowPyramid flows = estimate_flow(rand_image(rng, 1, 64, 64), rand_image(rng, 3, 64, 64), params);
    const TensorF& f2 = flows[2];
    const TensorF& f1 = flows[1];
    const TensorF& f0 = flows[0];
    for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < f2.height(); ++y) {
            for (int x = 0; x < f2.width(); ++x) {
                CHECK(f1.at3(c, 2 * y, 2 * x) == 2.0f * f2.at3(c, y, x));
                CHECK(f0.at3(c, 4 * y, 4 * x) == 4.0f * f2.at3(c, y, x));
            }
        }
    }
}

TEST_CASE("flow forward is deterministic") {
    Rng rng(54);
    auto params = make_params(54);
    TensorF t = rand_image(rng, 1, 64, 64);
    TensorF r = rand_image(rng, 3, 64, 64);
    FlowPyramid a = estimate_flow(t, r, params);
    FlowPyramid b = estimate_flow(t, r, params);
    for (std::size_t i = 0; i < 5; ++i) CHECK(a[i].data == b[i].data);
}

TEST_CASE("flow_magnitude_stats") {
    SUBCASE("zero flow gives zero stats") {
        FlowPyramid flows{TensorF({2, 8, 8})};
        auto stats = flow_magnitude_stats(flows);
        CHECK(stats[0].first == 0.0);
        CHECK(stats[0].second == 0.0);
    }
    SUBCASE("constant (3,4) flow has magnitude 5 everywhere") {
        TensorF f({2, 4, 4});
        for (int i = 0; i < 16; ++i) f.data[static_cast<std::size_t>(i)] = 3.0f;
        for (int i = 16; i < 32; ++i) f.data[static_cast<std::size_t>(i)] = 4.0f;
        auto stats = flow_magnitude_stats(FlowPyramid{f});
        CHECK(stats[0].first == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(stats[0].second == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("random flow matches a scalar-loop oracle") {
        Rng rng(55);
        TensorF f({2, 5, 7});
        for (float& v : f.data) v = static_cast<float>(rng.uniform(-3.0, 3.0));
        auto stats = flow_magnitude_stats(FlowPyramid{f});
        double sum = 0.0, mx = 0.0;
        for (int y = 0; y < 5; ++y) {
            for (int x = 0; x < 7; ++x) {
                const double mag = std::hypot(static_cast<double>(f.at3(0, y, x)), static_cast<double>(f.at3(1, y, x)));
                sum += mag;
                mx = std::max(mx, mag);
            }
        }
        CHECK(stats[0].first == doctest::Approx(sum / 35.0).epsilon(1e-12));
        CHECK(stats[0].second == doctest::Approx(mx).epsilon(1e-12));
    }
}

TEST_CASE("gradients reach both estimator inputs") {
    Rng rng(56);
    auto params = make_params(56);
    ag::Tape<float> tape;
    auto t = tape.leaf(rand_image(rng, 1, 64, 64), true);
    auto r = tape.leaf(rand_image(rng, 3, 64, 64), true);
    auto flows = estimate_flow(tape, params, t, r);
    auto loss = ag::mean_all(ag::square(flows[0]));
    tape.backward(loss);
    auto nonzero = [](const TensorF& g) {
        for (float v : g.data) {
            if (v != 0.0f) return true;
        }
        return false;
    };
    CHECK(nonzero(tape.grad(t)));
    CHECK(nonzero(tape.grad(r)));
}

TEST_CASE("estimator input validation") {
    Rng rng(57);
    auto params = make_params(57);
    CHECK_THROWS_AS(estimate_flow(rand_image(rng, 3, 64, 64), rand_image(rng, 3, 64, 64), params), ShapeError);
    CHECK_THROWS_AS(estimate_flow(rand_image(rng, 1, 64, 64), rand_image(rng, 1, 64, 64), params), ShapeError);
    CHECK_THROWS_AS(estimate_flow(rand_image(rng, 1, 64, 64), rand_image(rng, 3, 64, 32), params), ShapeError);
}
