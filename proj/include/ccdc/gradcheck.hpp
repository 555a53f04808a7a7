#pragma once

#include <cstdint>
#include <string>

namespace ccdc {

struct GradcheckResult {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string detail;
};

/// Analytic vs central-finite-difference gradients, double precision, on
/// random 5x5 instances with sample coordinates kept away from the bilinear
/// kinks. Tolerance 1e-4 relative.
GradcheckResult gradcheck_warp(std::uint64_t seed);

/// warping_loss gradient w.r.t. f0 and colorization_loss gradient w.r.t.
/// the prediction, same FD setup. Tolerance 1e-4.
GradcheckResult gradcheck_losses(std::uint64_t seed);

/// Encoder level-4 output gradient w.r.t. probed input pixels and probed
/// first-layer weights. Tolerance 1e-3.
GradcheckResult gradcheck_encoders(std::uint64_t seed);

/// Dispatch by module name ("warp", "losses", "encoders").
GradcheckResult gradcheck_module(const std::string& module, std::uint64_t seed);

}  // namespace ccdc
