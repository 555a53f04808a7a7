#include "ccdc/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "ccdc/encoders.hpp"
#include "ccdc/losses.hpp"
#include "ccdc/rng.hpp"
#include "ccdc/warp.hpp"

namespace ccdc {

namespace {

double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom;
}

/// Central finite difference of f w.r.t. element i of x.
double central_diff(TensorD& x, std::size_t i, const std::function<double()>& f, double h = 1e-5) {
    const double saved = x.data[i];
    x.data[i] = saved + h;
    const double up = f();
    x.data[i] = saved - h;
    const double down = f();
    x.data[i] = saved;
    return (up - down) / (2.0 * h);
}

/// Flow values whose sample coordinates stay > 1e-3 away from integers and
/// strictly inside the image, so neither the bilinear kinks nor the border
/// clamp contribute subgradients.
TensorD safe_flow(Rng& rng, int h, int w) {
    TensorD flow({2, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            const double sx = rng.uniform_int(0, w - 2) + rng.uniform(0.1, 0.9);
            const double sy = rng.uniform_int(0, h - 2) + rng.uniform(0.1, 0.9);
            flow.data[p] = sx - x;
            flow.data[plane + p] = sy - y;
        }
    }
    return flow;
}

GradcheckResult check_tensors(const char* what, const TensorD& analytic, TensorD& x,
                              const std::function<double()>& f, double tol) {
    GradcheckResult res;
    res.pass = true;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double fd = central_diff(x, i, f);
        const double e = rel_err(analytic.data[i], fd);
        if (e > res.max_rel_err) res.max_rel_err = e;
        if (e > tol) {
            res.pass = false;
            res.detail = std::string(what) + ": element " + std::to_string(i) + " analytic " +
                         std::to_string(analytic.data[i]) + " vs fd " + std::to_string(fd);
            return res;
        }
    }
    res.detail = std::string(what) + " ok";
    return res;
}

GradcheckResult merge(GradcheckResult a, const GradcheckResult& b) {
    a.max_rel_err = std::max(a.max_rel_err, b.max_rel_err);
    if (!b.pass) {
        a.pass = false;
        a.detail = b.detail;
    } else if (a.pass) {
        a.detail = a.detail.empty() ? b.detail : a.detail + "; " + b.detail;
    }
    return a;
}

}  // namespace

GradcheckResult gradcheck_warp(std::uint64_t seed) {
    Rng rng(seed);
    const int h = 5, w = 5, c = 2;
    TensorD input({c, h, w});
    for (double& v : input.data) v = rng.uniform();
    TensorD flow = safe_flow(rng, h, w);
    TensorD offset({c, h, w});
    for (double& v : offset.data) v = rng.uniform(0.5, 1.5);

    auto loss_value = [&]() {
        const TensorD warped = bilinear_warp(input, flow);
        double acc = 0.0;
        for (std::size_t i = 0; i < warped.data.size(); ++i) {
            const double s = warped.data[i] + offset.data[i];
            acc += s * s;
        }
        return acc / static_cast<double>(warped.numel());
    };

    ag::Tape<double> tape;
    auto xv = tape.leaf(input, true);
    auto fv = tape.leaf(flow, true);
    auto loss = ag::mean_all(ag::square(ag::add(warp(xv, fv), tape.leaf(offset))));
    tape.backward(loss);

    GradcheckResult res = check_tensors("warp/d_input", tape.grad(xv), input, loss_value, 1e-4);
    res = merge(res, check_tensors("warp/d_flow", tape.grad(fv), flow, loss_value, 1e-4));
    return res;
}

GradcheckResult gradcheck_losses(std::uint64_t seed) {
    Rng rng(seed);
    const int h = 5, w = 5;
    TensorD ref({3, h, w}), gt({3, h, w}), pred({3, h, w});
    for (double& v : ref.data) v = rng.uniform();
    for (double& v : gt.data) v = rng.uniform();
    for (double& v : pred.data) v = rng.uniform();
    TensorD flow = safe_flow(rng, h, w);

    GradcheckResult res;
    res.pass = true;
    {
        ag::Tape<double> tape;
        auto fv = tape.leaf(flow, true);
        auto loss = warping_loss_node(tape.leaf(ref), tape.leaf(gt), fv);
        tape.backward(loss);
        auto f = [&]() { return warping_loss(ref, gt, flow); };
        res = merge(res, check_tensors("warping_loss/d_f0", tape.grad(fv), flow, f, 1e-4));
    }
    {
        ag::Tape<double> tape;
        auto pv = tape.leaf(pred, true);
        auto loss = colorization_loss_node(pv, tape.leaf(gt));
        tape.backward(loss);
        auto f = [&]() { return colorization_loss(pred, gt); };
        res = merge(res, check_tensors("colorization_loss/d_pred", tape.grad(pv), pred, f, 1e-4));
    }
    return res;
}

GradcheckResult gradcheck_encoders(std::uint64_t seed) {
    Rng rng(seed);
    Rng enc_rng = rng.fork(1);
    EncoderParams<double> enc(1, {4, 6, 8, 10}, enc_rng);
    const int h = 16, w = 16;
    TensorD input({1, h, w});
    for (double& v : input.data) v = rng.uniform();

    TensorD offset_full;
    {
        auto pyr = encode_luminance(input, enc);
        offset_full = TensorD(pyr[3].shape);
        for (double& v : offset_full.data) v = rng.uniform(0.5, 1.5);
    }

    auto loss_value = [&]() {
        auto pyr = encode_luminance(input, enc);
        double acc = 0.0;
        for (std::size_t i = 0; i < pyr[3].data.size(); ++i) {
            const double s = pyr[3].data[i] + offset_full.data[i];
            acc += s * s;
        }
        return acc / static_cast<double>(pyr[3].numel());
    };

    ag::Tape<double> tape;
    auto xv = tape.leaf(input, true);
    auto levels = encode(tape, enc, xv);
    auto loss = ag::mean_all(ag::square(ag::add(levels[3], tape.leaf(offset_full))));
    tape.backward(loss);

    GradcheckResult res;
    res.pass = true;
    res.detail = "encoders ok";

    // Probe a scattered set of input pixels.
    const TensorD& gin = tape.grad(xv);
    for (int probe = 0; probe < 8; ++probe) {
        const std::size_t i = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(input.data.size()) - 1));
        const double fd = central_diff(input, i, loss_value);
        const double e = rel_err(gin.data[i], fd);
        res.max_rel_err = std::max(res.max_rel_err, e);
        if (e > 1e-3) {
            res.pass = false;
            res.detail = "encoders/d_input: pixel " + std::to_string(i) + " analytic " +
                         std::to_string(gin.data[i]) + " vs fd " + std::to_string(fd);
            return res;
        }
    }

    // Probe a few first-stage weights (exercises conv weight gradients).
    for (int probe = 0; probe < 4; ++probe) {
        const std::size_t i = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(enc.down[0].w.data.size()) - 1));
        const double fd = central_diff(enc.down[0].w, i, loss_value);
        const double e = rel_err(enc.down[0].gw.data[i], fd);
        res.max_rel_err = std::max(res.max_rel_err, e);
        if (e > 1e-3) {
            res.pass = false;
            res.detail = "encoders/d_weight: element " + std::to_string(i) + " analytic " +
                         std::to_string(enc.down[0].gw.data[i]) + " vs fd " + std::to_string(fd);
            return res;
        }
    }
    return res;
}

GradcheckResult gradcheck_module(const std::string& module, std::uint64_t seed) {
    if (module == "warp") return gradcheck_warp(seed);
    if (module == "losses") return gradcheck_losses(seed);
    if (module == "encoders") return gradcheck_encoders(seed);
    throw std::invalid_argument("gradcheck: unknown module '" + module +
                                "' (expected warp, losses, or encoders)");
}

}  // namespace ccdc
