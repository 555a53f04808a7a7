#include <cmath>

#include "ccdc/rng.hpp"
#include "ccdc/tensor.hpp"
#include "doctest.h"

using namespace ccdc;

TEST_CASE("tensor construction and accessors") {
    TensorF t({3, 4, 5});
    CHECK(t.rank() == 3);
    CHECK(t.numel() == 60);
    CHECK(t.channels() == 3);
    CHECK(t.height() == 4);
    CHECK(t.width() == 5);
    for (float v : t.data) CHECK(v == 0.0f);

    t.at3(2, 3, 4) = 7.0f;
    CHECK(t.data[59] == 7.0f);
    t.at3(0, 0, 0) = 1.0f;
    CHECK(t.data[0] == 1.0f);

    TensorF w({2, 3, 4, 4});
    w.at4(1, 2, 3, 3) = 5.0f;
    CHECK(w.data[w.numel() - 1] == 5.0f);

    CHECK(TensorF::scalar(2.5f).numel() == 1);
    CHECK(TensorF::full({2, 2}, 3.0f).data[3] == 3.0f);
    CHECK(t.shape_str() == "(3,4,5)");
}

TEST_CASE("tensor shape errors") {
    CHECK_THROWS_AS(TensorF({0, 4}), ShapeError);
    CHECK_THROWS_AS(TensorF({-1}), ShapeError);
    CHECK_THROWS_AS(TensorF(std::vector<int>{}), ShapeError);

    TensorF a({2, 2}), b({2, 3});
    CHECK_THROWS_AS(a.add_(b), ShapeError);
    CHECK_THROWS_AS(b.channels(), ShapeError);
}

TEST_CASE("tensor add_ and cast") {
    TensorF a = TensorF::full({2, 2}, 1.5f);
    TensorF b = TensorF::full({2, 2}, 2.0f);
    a.add_(b);
    for (float v : a.data) CHECK(v == 3.5f);

    TensorD d = a.cast<double>();
    CHECK(d.shape == a.shape);
    for (double v : d.data) CHECK(v == 3.5);
}

TEST_CASE("rng determinism and ranges") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const int k = r.uniform_int(-3, 3);
        CHECK(k >= -3);
        CHECK(k <= 3);
        const double v = r.uniform(2.0, 5.0);
        CHECK(v >= 2.0);
        CHECK(v <= 5.0);
    }
}

TEST_CASE("rng uniform_int covers endpoints") {
    Rng r(1);
    bool lo = false, hi = false;
    for (int i = 0; i < 500; ++i) {
        const int k = r.uniform_int(0, 3);
        lo = lo || k == 0;
        hi = hi || k == 3;
    }
    CHECK(lo);
    CHECK(hi);
}

TEST_CASE("rng normal moments") {
    Rng r(123);
    const int n = 20000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("rng fork gives independent reproducible streams") {
    Rng a(9), b(9);
    Rng fa = a.fork(3), fb = b.fork(3);
    for (int i = 0; i < 20; ++i) CHECK(fa.next_u64() == fb.next_u64());

    Rng c(9);
    Rng f0 = c.fork(0);
    Rng f1 = c.fork(1);
    bool differs = false;
    for (int i = 0; i < 20; ++i) differs = differs || f0.next_u64() != f1.next_u64();
    CHECK(differs);
}
