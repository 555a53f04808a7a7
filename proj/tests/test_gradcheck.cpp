#include <stdexcept>

#include "ccdc/gradcheck.hpp"
#include "doctest.h"

using namespace ccdc;

TEST_CASE("warp gradients match finite differences") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        GradcheckResult res = gradcheck_warp(seed);
        INFO("seed ", seed, ": ", res.detail);
        CHECK(res.pass);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("loss gradients match finite differences") {
    for (std::uint64_t seed : {1ULL, 2ULL}) {
        GradcheckResult res = gradcheck_losses(seed);
        INFO("seed ", seed, ": ", res.detail);
        CHECK(res.pass);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("encoder gradients match finite differences") {
    GradcheckResult res = gradcheck_encoders(5);
    INFO(res.detail);
    CHECK(res.pass);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("module dispatch") {
    CHECK(gradcheck_module("warp", 1).pass);
    CHECK(gradcheck_module("losses", 1).pass);
    CHECK(gradcheck_module("encoders", 1).pass);
    CHECK_THROWS_AS(gradcheck_module("decoder", 1), std::invalid_argument);
}
