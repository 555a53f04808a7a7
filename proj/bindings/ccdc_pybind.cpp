#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "ccdc/checkpoint.hpp"
#include "ccdc/config.hpp"
#include "ccdc/data_pipeline.hpp"
#include "ccdc/gradcheck.hpp"
#include "ccdc/image.hpp"
#include "ccdc/imageops.hpp"
#include "ccdc/losses.hpp"
#include "ccdc/metrics.hpp"
#include "ccdc/trainer.hpp"
#include "ccdc/visibility.hpp"
#include "ccdc/warp.hpp"

namespace py = pybind11;
using namespace ccdc;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

/// (H,W) or (H,W,C) numpy array -> CxHxW tensor.
TensorF image_from_numpy(const FloatArray& arr) {
    if (arr.ndim() == 2) {
        TensorF t({1, static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1))});
        std::memcpy(t.data.data(), arr.data(), t.data.size() * sizeof(float));
        return t;
    }
    if (arr.ndim() == 3) {
        const int h = static_cast<int>(arr.shape(0));
        const int w = static_cast<int>(arr.shape(1));
        const int c = static_cast<int>(arr.shape(2));
        if (c != 1 && c != 3) throw py::value_error("image must have 1 or 3 channels");
        TensorF t({c, h, w});
        const float* src = arr.data();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int ch = 0; ch < c; ++ch) t.at3(ch, y, x) = src[(y * w + x) * c + ch];
            }
        }
        return t;
    }
    throw py::value_error("image must be (H,W) or (H,W,C)");
}

/// CxHxW tensor -> (H,W) or (H,W,C) numpy array.
py::array_t<float> image_to_numpy(const TensorF& t) {
    const int c = t.channels(), h = t.height(), w = t.width();
    if (c == 1) {
        py::array_t<float> out({h, w});
        std::memcpy(out.mutable_data(), t.data.data(), t.data.size() * sizeof(float));
        return out;
    }
    py::array_t<float> out({h, w, c});
    float* dst = out.mutable_data();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) dst[(y * w + x) * c + ch] = t.at3(ch, y, x);
        }
    }
    return out;
}

/// (H,W,2) numpy array -> 2xHxW flow tensor.
TensorF flow_from_numpy(const FloatArray& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 2) throw py::value_error("flow must be (H,W,2)");
    const int h = static_cast<int>(arr.shape(0));
    const int w = static_cast<int>(arr.shape(1));
    TensorF f({2, h, w});
    const float* src = arr.data();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            f.at3(0, y, x) = src[(y * w + x) * 2 + 0];
            f.at3(1, y, x) = src[(y * w + x) * 2 + 1];
        }
    }
    return f;
}

py::array_t<float> flow_to_numpy(const TensorF& f) {
    const int h = f.height(), w = f.width();
    py::array_t<float> out({h, w, 2});
    float* dst = out.mutable_data();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            dst[(y * w + x) * 2 + 0] = f.at3(0, y, x);
            dst[(y * w + x) * 2 + 1] = f.at3(1, y, x);
        }
    }
    return out;
}

RunConfig config_from_text(const std::string& text) {
    RunConfig cfg = parse_config_text(text);
    cfg.validate();
    return cfg;
}

py::dict report_to_dict(const LossReport& r) {
    py::dict d;
    d["l_warp"] = r.l_warp;
    d["l_color"] = r.l_color;
    d["total"] = r.total;
    d["lambda_warp"] = r.lambda_warp;
    return d;
}

ImagePair pair_from_numpy(const FloatArray& target, const FloatArray& reference, int scale) {
    ImagePair pair;
    pair.target = image_from_numpy(target);
    if (pair.target.channels() == 3) pair.target = luminance(pair.target);
    pair.reference = image_from_numpy(reference);
    check_color(pair.reference, "reference");
    pair.ground_truth = TensorF({3, pair.target.height(), pair.target.width()});
    const std::size_t plane = pair.target.data.size();
    for (int c = 0; c < 3; ++c) {
        std::copy(pair.target.data.begin(), pair.target.data.end(),
                  pair.ground_truth.data.begin() + c * plane);
    }
    pair.recipe.scale = scale;
    check_pair(pair);
    return pair;
}

/// Thin inference wrapper around the full model.
struct Pipeline {
    Model model;

    explicit Pipeline(Model m) : model(std::move(m)) {}

    static Pipeline from_checkpoint(const std::string& path) {
        CheckpointInfo info = peek_checkpoint(path);
        Model m(info.config);
        load_checkpoint(path, info.config, m.params(), nullptr);
        return Pipeline(std::move(m));
    }

    static Pipeline from_config(const std::string& text) { return Pipeline(Model(config_from_text(text))); }

    py::array_t<float> colorize(const FloatArray& target, const FloatArray& reference) {
        ImagePair pair = pair_from_numpy(target, reference, model.cfg.scale);
        return image_to_numpy(forward(model, pair).output);
    }

    py::dict forward_details(const FloatArray& target, const FloatArray& reference) {
        ImagePair pair = pair_from_numpy(target, reference, model.cfg.scale);
        ForwardOut out = forward(model, pair);
        py::dict d;
        d["output"] = image_to_numpy(out.output);
        py::list flows;
        for (const auto& f : out.flows) flows.append(flow_to_numpy(f));
        d["flows"] = flows;
        if (out.vis.enabled) {
            d["visibility"] = image_to_numpy(out.vis.v0);
        } else {
            d["visibility"] = py::none();
        }
        d["reference_upsampled"] = image_to_numpy(out.ref_up);
        return d;
    }

    int scale() const { return model.cfg.scale; }
    std::string method() const { return model.cfg.method_tag(); }
    std::string config_text() const { return serialize_config(model.cfg); }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cross-camera colorization core operations";

    m.def("rgb_to_yuv", [](const FloatArray& img) { return image_to_numpy(rgb_to_yuv(image_from_numpy(img))); },
          py::arg("image"), "RGB -> BT.601 full-range YUV, (H,W,3)");
    m.def("yuv_to_rgb", [](const FloatArray& img) { return image_to_numpy(yuv_to_rgb(image_from_numpy(img))); },
          py::arg("image"), "BT.601 full-range YUV -> RGB, (H,W,3)");
    m.def("luminance", [](const FloatArray& img) { return image_to_numpy(luminance(image_from_numpy(img))); },
          py::arg("image"), "RGB -> Y, (H,W)");
    m.def(
        "bicubic_resize",
        [](const FloatArray& img, double scale) {
            return image_to_numpy(bicubic_resize(image_from_numpy(img), scale));
        },
        py::arg("image"), py::arg("scale"), "Catmull-Rom bicubic resize by a scale factor");
    m.def(
        "gaussian_pyramid_shapes",
        [](int h, int w, int levels) { return gaussian_pyramid_shapes(h, w, levels); },
        py::arg("height"), py::arg("width"), py::arg("levels") = 5);

    m.def(
        "warp",
        [](const FloatArray& img, const FloatArray& flow) {
            return image_to_numpy(bilinear_warp(image_from_numpy(img), flow_from_numpy(flow)));
        },
        py::arg("image"), py::arg("flow"),
        "Backward bilinear warp; flow is (H,W,2) with (dx,dy) in pixels");
    m.def(
        "visibility",
        [](const FloatArray& warped, const FloatArray& target) {
            return image_to_numpy(
                image_visibility(image_from_numpy(warped), image_from_numpy(target)));
        },
        py::arg("warped_reference"), py::arg("target"), "Signed image-domain visibility map");
    m.def(
        "render_visibility",
        [](const FloatArray& v0) { return image_to_numpy(render_visibility(image_from_numpy(v0))); },
        py::arg("v0"), "Red/green diagnostic rendering of a visibility map");

    m.def("psnr", [](const FloatArray& a, const FloatArray& b) { return psnr(image_from_numpy(a), image_from_numpy(b)); });
    m.def("ssim", [](const FloatArray& a, const FloatArray& b) { return ssim(image_from_numpy(a), image_from_numpy(b)); });
    m.def("nrmse", [](const FloatArray& a, const FloatArray& b) { return nrmse(image_from_numpy(a), image_from_numpy(b)); });

    m.def(
        "warping_loss",
        [](const FloatArray& ref_up, const FloatArray& gt, const FloatArray& flow) {
            return warping_loss(image_from_numpy(ref_up), image_from_numpy(gt), flow_from_numpy(flow));
        },
        py::arg("reference_upsampled"), py::arg("ground_truth"), py::arg("flow"));
    m.def(
        "colorization_loss",
        [](const FloatArray& pred, const FloatArray& gt) {
            return colorization_loss(image_from_numpy(pred), image_from_numpy(gt));
        },
        py::arg("prediction"), py::arg("ground_truth"));

    m.def(
        "toy_dataset",
        [](std::uint64_t seed, int n, int size, int scale, int frame_gap) {
            PairRecipe recipe;
            recipe.scale = scale;
            recipe.frame_gap = frame_gap;
            py::list out;
            for (const auto& pair : toy_dataset(seed, n, size, recipe)) {
                py::dict d;
                d["target"] = image_to_numpy(pair.target);
                d["reference"] = image_to_numpy(pair.reference);
                d["ground_truth"] = image_to_numpy(pair.ground_truth);
                out.append(d);
            }
            return out;
        },
        py::arg("seed"), py::arg("n") = 8, py::arg("size") = 64, py::arg("scale") = 4,
        py::arg("frame_gap") = 1, "Deterministic procedural dataset of moving-shape pairs");

    m.def(
        "gradcheck",
        [](const std::string& module, std::uint64_t seed) {
            GradcheckResult r = gradcheck_module(module, seed);
            py::dict d;
            d["pass"] = r.pass;
            d["max_rel_err"] = r.max_rel_err;
            d["detail"] = r.detail;
            return d;
        },
        py::arg("module"), py::arg("seed") = 1, "Finite-difference gradient suite: warp|losses|encoders");

    m.def(
        "train",
        [](const std::string& config_text, const std::string& resume) {
            TrainResult res = train(config_from_text(config_text), resume);
            py::dict d;
            d["steps_run"] = res.steps_run;
            d["first"] = report_to_dict(res.first);
            d["last"] = report_to_dict(res.last);
            d["checkpoint"] = res.checkpoint_path;
            return d;
        },
        py::arg("config_text"), py::arg("resume") = std::string(),
        "Run the training loop from a key=value config string");

    m.def("default_config_text", []() { return serialize_config(RunConfig{}); });

    m.def("read_png", [](const std::string& path) { return image_to_numpy(read_png(path)); }, py::arg("path"));
    m.def(
        "write_png",
        [](const std::string& path, const FloatArray& img) { write_png(path, image_from_numpy(img)); },
        py::arg("path"), py::arg("image"));
    m.def("save_flow", [](const std::string& path, const FloatArray& flow) { save_flow(path, flow_from_numpy(flow)); },
          py::arg("path"), py::arg("flow"));
    m.def("load_flow", [](const std::string& path) { return flow_to_numpy(load_flow(path)); }, py::arg("path"));

    py::class_<Pipeline>(m, "Pipeline", "Full colorization model (inference)")
        .def_static("from_checkpoint", &Pipeline::from_checkpoint, py::arg("path"))
        .def_static("from_config", &Pipeline::from_config, py::arg("config_text"))
        .def("colorize", &Pipeline::colorize, py::arg("target"), py::arg("reference"),
             "HR grayscale target (H,W) + LR color reference (h,w,3) -> (H,W,3) in [0,1]")
        .def("forward_details", &Pipeline::forward_details, py::arg("target"), py::arg("reference"))
        .def_property_readonly("scale", &Pipeline::scale)
        .def_property_readonly("method", &Pipeline::method)
        .def_property_readonly("config_text", &Pipeline::config_text);

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
}
