#pragma once

#include <string>
#include <vector>

#include "ccdc/checkpoint.hpp"
#include "ccdc/config.hpp"
#include "ccdc/data_pipeline.hpp"
#include "ccdc/encoders.hpp"
#include "ccdc/flow_estimator.hpp"
#include "ccdc/fusion_decoder.hpp"
#include "ccdc/losses.hpp"
#include "ccdc/metrics.hpp"
#include "ccdc/visibility.hpp"

namespace ccdc {

/// The whole network: shared-luminance encoder, color encoder, flow
/// estimator, fusion decoder. Parameter initialization order is fixed so a
/// seed fully determines the starting point.
struct Model {
    RunConfig cfg;
    EncoderParams<float> enc_luminance;
    EncoderParams<float> enc_color;
    FlowNetParams<float> flownet;
    DecoderParams<float> decoder;

    explicit Model(const RunConfig& cfg_);

    std::vector<nn::ParamRef<float>> params();
    void zero_grads();
};

/// Forward intermediates for one pair (plain tensors, inference mode).
struct ForwardOut {
    ColorImage output;          // I_c, 3xHxW in [0,1]
    FlowPyramid flows;          // f_0..f_4
    VisibilityMaps vis;         // sentinel when disabled
    ColorImage ref_up;          // bicubic-upsampled reference
    LossReport loss;
};

ForwardOut forward(Model& model, const ImagePair& pair);

/// In-graph forward for training; returns the scalar total-loss node and
/// fills `report` with the step's loss values.
ag::Var<float> forward_loss(ag::Tape<float>& tape, Model& model, const ImagePair& pair,
                            LossReport& report);

struct TrainResult {
    LossReport first;
    LossReport last;
    std::string checkpoint_path;
    std::uint64_t steps_run = 0;
};

/// Runs the optimization loop described by the config: Adam on total_loss,
/// per-step CSV logging (step,l_warp,l_color,total), periodic checkpoints.
/// Deterministic for a fixed config. `resume_from` continues from a saved
/// checkpoint, extending the step counter.
TrainResult train(const RunConfig& cfg, const std::string& resume_from = "");

/// Loads pairs for a config: manifest stream when configured, otherwise the
/// procedural toy dataset.
std::vector<ImagePair> load_training_pairs(const RunConfig& cfg);

struct EvalRow {
    std::string dataset;
    int frame = 0;
    std::string view;
    int scale = 1;
    std::string method;
    MetricReport metrics;
    bool failed = false;
    std::string error;
};

/// Per-pair forward + metrics; failures are recorded and skipped. The CSV
/// written to `out_csv` has the columns
/// dataset,frame,view,scale,method,nrmse,psnr,ssim,lpips,runtime.
std::vector<EvalRow> evaluate(Model& model, const std::vector<ImagePair>& pairs,
                              const std::vector<std::string>& names, const std::string& out_csv,
                              const LpipsPlugin& lpips = nullptr);

/// Mean PSNR of colorized outputs against ground truth over a pair set.
double mean_psnr(Model& model, const std::vector<ImagePair>& pairs);

}  // namespace ccdc
