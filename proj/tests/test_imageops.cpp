#include <cmath>

#include "ccdc/image.hpp"
#include "ccdc/imageops.hpp"
#include "ccdc/rng.hpp"
#include "doctest.h"

using namespace ccdc;

namespace {

ColorImage solid(float r, float g, float b, int h = 8, int w = 8) {
    ColorImage img({3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            img.at3(0, y, x) = r;
            img.at3(1, y, x) = g;
            img.at3(2, y, x) = b;
        }
    }
    return img;
}

ColorImage random_image(Rng& rng, int h, int w, int c = 3) {
    TensorF img({c, h, w});
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

// Independent Catmull-Rom sampler: direct kernel evaluation, edge clamp,
// half-pixel centers.
double catmull_rom_weight(double t) {
    t = std::abs(t);
    if (t < 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
    if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
    return 0.0;
}

double oracle_sample(const TensorF& img, int c, double sy, double sx) {
    const int h = img.height(), w = img.width();
    const int iy = static_cast<int>(std::floor(sy));
    const int ix = static_cast<int>(std::floor(sx));
    double acc = 0.0;
    for (int dy = -1; dy <= 2; ++dy) {
        for (int dx = -1; dx <= 2; ++dx) {
            const int py = std::min(std::max(iy + dy, 0), h - 1);
            const int px = std::min(std::max(ix + dx, 0), w - 1);
            acc += catmull_rom_weight(sy - (iy + dy)) * catmull_rom_weight(sx - (ix + dx)) *
                   img.at3(c, py, px);
        }
    }
    return acc;
}

TensorF oracle_resize(const TensorF& img, int out_h, int out_w) {
    TensorF out({img.channels(), out_h, out_w});
    const double sy = static_cast<double>(img.height()) / out_h;
    const double sx = static_cast<double>(img.width()) / out_w;
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < out_h; ++y) {
            for (int x = 0; x < out_w; ++x) {
                out.at3(c, y, x) = static_cast<float>(
                    oracle_sample(img, c, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5));
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("rgb_to_yuv basis colors") {
    auto white = rgb_to_yuv(solid(1, 1, 1));
    CHECK(white.at3(0, 3, 3) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(white.at3(1, 3, 3) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(white.at3(2, 3, 3) == doctest::Approx(0.0).epsilon(1e-6));

    auto black = rgb_to_yuv(solid(0, 0, 0));
    for (float v : black.data) CHECK(v == 0.0f);

    auto red = rgb_to_yuv(solid(1, 0, 0));
    CHECK(red.at3(0, 0, 0) == doctest::Approx(0.299).epsilon(1e-6));

    auto green = rgb_to_yuv(solid(0, 1, 0));
    CHECK(green.at3(0, 0, 0) == doctest::Approx(0.587).epsilon(1e-6));
}

TEST_CASE("yuv round trip") {
    Rng rng(11);
    ColorImage img = random_image(rng, 9, 13);
    TensorF back = yuv_to_rgb(rgb_to_yuv(img));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        CHECK(std::abs(back.data[i] - img.data[i]) < 1e-6);
    }
}

TEST_CASE("luminance equals the Y plane") {
    Rng rng(12);
    ColorImage img = random_image(rng, 8, 8);
    TensorF yuv = rgb_to_yuv(img);
    GrayImage lum = luminance(img);
    CHECK(lum.channels() == 1);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) CHECK(lum.at3(0, y, x) == yuv.at3(0, y, x));
    }

    // Gray ramp: r = g = b = t maps to t.
    ColorImage ramp({3, 1, 16});
    for (int x = 0; x < 16; ++x) {
        for (int c = 0; c < 3; ++c) ramp.at3(c, 0, x) = x / 15.0f;
    }
    GrayImage rl = luminance(ramp);
    for (int x = 0; x < 16; ++x) CHECK(rl.at3(0, 0, x) == doctest::Approx(x / 15.0).epsilon(1e-6));
}

TEST_CASE("luminance of pure-Y yuv round trips") {
    for (double yv : {0.0, 0.25, 0.8, 1.0}) {
        TensorF yuv({3, 4, 4});
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 4; ++x) yuv.at3(0, y, x) = static_cast<float>(yv);
        }
        GrayImage lum = luminance(yuv_to_rgb(yuv));
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 4; ++x) CHECK(lum.at3(0, y, x) == doctest::Approx(yv).epsilon(1e-6));
        }
    }
}

TEST_CASE("color-space shape errors") {
    TensorF gray({1, 4, 4});
    CHECK_THROWS_AS(rgb_to_yuv(gray), ShapeError);
    CHECK_THROWS_AS(luminance(gray), ShapeError);
    CHECK_THROWS_AS(yuv_to_rgb(gray), ShapeError);
}

TEST_CASE("bicubic scale 1 is bit-identical") {
    Rng rng(13);
    ColorImage img = random_image(rng, 7, 9);
    TensorF out = bicubic_resize(img, 1.0);
    CHECK(out.shape == img.shape);
    CHECK(out.data == img.data);
}

TEST_CASE("bicubic constant image stays constant") {
    for (double s : {0.25, 0.5, 2.0, 3.0}) {
        TensorF img = TensorF::full({3, 12, 12}, 0.6f);
        TensorF out = bicubic_resize(img, s);
        for (float v : out.data) CHECK(v == doctest::Approx(0.6).epsilon(1e-6));
    }
}

TEST_CASE("bicubic delta upsample matches the direct kernel oracle") {
    TensorF img({1, 8, 8});
    img.at3(0, 3, 4) = 1.0f;
    TensorF got = bicubic_resize(img, 4.0);
    TensorF want = oracle_resize(img, 32, 32);
    CHECK(got.shape == want.shape);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < got.data.size(); ++i) {
        max_diff = std::max(max_diff, std::abs(static_cast<double>(got.data[i]) - want.data[i]));
    }
    CHECK(max_diff < 1e-6);
}

TEST_CASE("bicubic random resizes match the oracle") {
    Rng rng(14);
    ColorImage img = random_image(rng, 10, 6);
    for (auto [oh, ow] : {std::pair{5, 3}, std::pair{20, 12}, std::pair{7, 11}}) {
        TensorF got = bicubic_resize_to(img, oh, ow);
        TensorF want = oracle_resize(img, oh, ow);
        for (std::size_t i = 0; i < got.data.size(); ++i) {
            CHECK(std::abs(static_cast<double>(got.data[i]) - want.data[i]) < 1e-6);
        }
    }
}

TEST_CASE("bicubic scale wrapper arithmetic and errors") {
    TensorF img({3, 16, 24});
    TensorF up = bicubic_resize(img, 4.0);
    CHECK(up.height() == 64);
    CHECK(up.width() == 96);
    TensorF down = bicubic_resize(img, 0.25);
    CHECK(down.height() == 4);
    CHECK(down.width() == 6);

    CHECK_THROWS_AS(bicubic_resize(img, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(bicubic_resize(img, -2.0), std::invalid_argument);
}

TEST_CASE("gaussian_pyramid_shapes ladders") {
    CHECK(gaussian_pyramid_shapes(256, 448, 5) ==
          std::vector<std::pair<int, int>>{{256, 448}, {128, 224}, {64, 112}, {32, 56}, {16, 28}});
    CHECK(gaussian_pyramid_shapes(64, 64, 1) == std::vector<std::pair<int, int>>{{64, 64}});
    CHECK(gaussian_pyramid_shapes(100, 100, 3) ==
          std::vector<std::pair<int, int>>{{100, 100}, {50, 50}, {25, 25}});
}

TEST_CASE("gaussian_pyramid_shapes preconditions") {
    CHECK_THROWS_AS(gaussian_pyramid_shapes(64, 64, 0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_pyramid_shapes(8, 64, 5), std::invalid_argument);   // 8 < 2^4
    CHECK_THROWS_AS(gaussian_pyramid_shapes(64, 15, 5), std::invalid_argument);  // 15 < 16
    CHECK_NOTHROW(gaussian_pyramid_shapes(16, 16, 5));
}
