#include "ccdc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ccdc/imageops.hpp"
#include "ccdc/warp.hpp"

namespace fs = std::filesystem;

namespace ccdc {

Model::Model(const RunConfig& cfg_) : cfg(cfg_) {
    cfg.validate();
    Rng root(cfg.seed);
    Rng r1 = root.fork(1), r2 = root.fork(2), r3 = root.fork(3), r4 = root.fork(4);
    enc_luminance = EncoderParams<float>(1, cfg.encoder_ladder, r1);
    enc_color = EncoderParams<float>(3, cfg.encoder_ladder, r2);
    flownet = FlowNetParams<float>(cfg.flow_width_mult, r3);
    decoder = DecoderParams<float>(cfg.encoder_ladder, cfg.use_visibility, cfg.use_target_in_head, r4);
}

std::vector<nn::ParamRef<float>> Model::params() {
    std::vector<nn::ParamRef<float>> out;
    enc_luminance.collect("enc_l", out);
    enc_color.collect("enc_c", out);
    flownet.collect("flow", out);
    decoder.collect("dec", out);
    return out;
}

void Model::zero_grads() {
    for (auto& p : params()) p.grad->fill(0.0f);
}

namespace {

struct GraphOut {
    ag::Var<float> output;
    std::vector<ag::Var<float>> flows;
    VisVars<float> vis;
    ag::Var<float> ref_up;
    ag::Var<float> gt;
};

GraphOut build_graph(ag::Tape<float>& tape, Model& model, const ImagePair& pair) {
    check_pair(pair);
    const int th = pair.target.height(), tw = pair.target.width();

    GraphOut g;
    const TensorF ref_up_t = pair.reference.height() == th && pair.reference.width() == tw
                                 ? pair.reference
                                 : bicubic_resize_to(pair.reference, th, tw);
    g.ref_up = tape.leaf(ref_up_t);
    g.gt = tape.leaf(pair.ground_truth);
    ag::Var<float> target = tape.leaf(pair.target);

    g.flows = estimate_flow(tape, model.flownet, target, g.ref_up);

    auto target_feats = encode(tape, model.enc_luminance, target);
    auto color_feats = encode(tape, model.enc_color, g.ref_up);
    std::vector<ag::Var<float>> warped_color;
    for (int i = 0; i < 4; ++i) {
        warped_color.push_back(warp(color_feats[static_cast<std::size_t>(i)],
                                    g.flows[static_cast<std::size_t>(i) + 1]));
    }

    g.vis.enabled = model.cfg.use_visibility;
    if (model.cfg.use_visibility) {
        ag::Var<float> ref_y = tape.leaf(luminance(ref_up_t));
        auto lum_feats = encode(tape, model.enc_luminance, ref_y);
        g.vis.v0 = ag::sub(warp(ref_y, g.flows[0]), target);
        for (int i = 0; i < 4; ++i) {
            g.vis.levels.push_back(ag::sub(warp(lum_feats[static_cast<std::size_t>(i)],
                                                g.flows[static_cast<std::size_t>(i) + 1]),
                                           target_feats[static_cast<std::size_t>(i)]));
        }
    }

    g.output = fuse(tape, model.decoder, target_feats, warped_color, g.vis, target);
    return g;
}

std::string format_loss(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

ForwardOut forward(Model& model, const ImagePair& pair) {
    ag::Tape<float> tape(false);
    GraphOut g = build_graph(tape, model, pair);

    ForwardOut out;
    out.output = tape.value(g.output);
    for (auto& f : g.flows) out.flows.push_back(tape.value(f));
    out.vis.enabled = g.vis.enabled;
    if (g.vis.enabled) {
        out.vis.v0 = tape.value(g.vis.v0);
        for (auto& v : g.vis.levels) out.vis.feature_levels.push_back(tape.value(v));
    }
    out.ref_up = tape.value(g.ref_up);

    const double l_color = colorization_loss(out.output, pair.ground_truth);
    const double l_warp = warping_loss(out.ref_up, pair.ground_truth, out.flows[0]);
    out.loss = total_loss(l_color, l_warp,
                          model.cfg.use_warping_loss ? model.cfg.lambda_warp : 0.0);
    return out;
}

ag::Var<float> forward_loss(ag::Tape<float>& tape, Model& model, const ImagePair& pair,
                            LossReport& report) {
    GraphOut g = build_graph(tape, model, pair);
    ag::Var<float> l_color = colorization_loss_node(g.output, g.gt);

    ag::Var<float> total = l_color;
    double l_warp_value = 0.0;
    if (model.cfg.use_warping_loss && model.cfg.lambda_warp > 0.0) {
        ag::Var<float> l_warp = warping_loss_node(g.ref_up, g.gt, g.flows[0]);
        l_warp_value = static_cast<double>(tape.value(l_warp).data[0]);
        total = ag::add(l_color, ag::scale(l_warp, static_cast<float>(model.cfg.lambda_warp)));
    } else {
        // Still reported for diagnosis, just not part of the objective.
        l_warp_value = warping_loss(tape.value(g.ref_up), pair.ground_truth, tape.value(g.flows[0]));
    }

    report = total_loss(static_cast<double>(tape.value(l_color).data[0]), l_warp_value,
                        model.cfg.use_warping_loss ? model.cfg.lambda_warp : 0.0);
    return total;
}

std::vector<ImagePair> load_training_pairs(const RunConfig& cfg) {
    if (cfg.manifest.empty()) {
        PairRecipe recipe;
        recipe.scale = cfg.scale;
        recipe.frame_gap = cfg.frame_gap;
        return toy_dataset(cfg.seed, cfg.toy_n, cfg.toy_size, recipe);
    }
    DatasetStream stream(cfg.manifest, cfg.seed);
    std::vector<ImagePair> pairs;
    while (!stream.done()) pairs.push_back(stream.next());
    if (pairs.empty()) throw IoError("train: manifest " + cfg.manifest + " yields no pairs");
    return pairs;
}

TrainResult train(const RunConfig& cfg, const std::string& resume_from) {
    cfg.validate();
    Model model(cfg);
    auto params = model.params();
    AdamState adam;
    adam.init(params);

    std::uint64_t start_step = 0;
    if (!resume_from.empty()) {
        CheckpointInfo info = load_checkpoint(resume_from, cfg, params, &adam);
        start_step = info.step;
    }

    std::vector<ImagePair> pairs = load_training_pairs(cfg);

    fs::create_directories(cfg.checkpoint_dir);
    const std::string csv_tmp = cfg.loss_csv + ".tmp";
    std::ofstream csv(csv_tmp, std::ios::trunc);
    if (!csv) throw IoError("train: cannot open " + csv_tmp);
    csv << "step,l_warp,l_color,total\n";

    const float b1 = static_cast<float>(cfg.adam_beta1);
    const float b2 = static_cast<float>(cfg.adam_beta2);
    const float eps = static_cast<float>(cfg.adam_eps);
    const float lr = static_cast<float>(cfg.lr);

    TrainResult result;
    const std::size_t n = pairs.size();
    for (std::uint64_t step = start_step; step < start_step + static_cast<std::uint64_t>(cfg.steps);
         ++step) {
        model.zero_grads();
        double l_warp_acc = 0.0, l_color_acc = 0.0;
        const float inv_b = 1.0f / static_cast<float>(cfg.batch_size);
        for (int j = 0; j < cfg.batch_size; ++j) {
            const std::size_t idx =
                static_cast<std::size_t>((step * static_cast<std::uint64_t>(cfg.batch_size) +
                                          static_cast<std::uint64_t>(j)) %
                                         n);
            ag::Tape<float> tape(true);
            LossReport rep;
            ag::Var<float> loss = forward_loss(tape, model, pairs[idx], rep);
            tape.backward(ag::scale(loss, inv_b));
            l_warp_acc += rep.l_warp;
            l_color_acc += rep.l_color;
        }
        const double batch_inv = 1.0 / cfg.batch_size;
        LossReport rep = total_loss(l_color_acc * batch_inv, l_warp_acc * batch_inv,
                                    cfg.use_warping_loss ? cfg.lambda_warp : 0.0);
        if (!std::isfinite(rep.total)) {
            throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
        }
        csv << step << ',' << format_loss(rep.l_warp) << ',' << format_loss(rep.l_color) << ','
            << format_loss(rep.total) << "\n";
        if (step == start_step) result.first = rep;
        result.last = rep;

        adam.t += 1;
        const float bc1 = 1.0f - std::pow(b1, static_cast<float>(adam.t));
        const float bc2 = 1.0f - std::pow(b2, static_cast<float>(adam.t));
        for (std::size_t p = 0; p < params.size(); ++p) {
            TensorF& w = *params[p].value;
            TensorF& g = *params[p].grad;
            TensorF& m = adam.m[p];
            TensorF& v = adam.v[p];
            for (std::size_t i = 0; i < w.data.size(); ++i) {
                const float gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (1.0f - b1) * gi;
                v.data[i] = b2 * v.data[i] + (1.0f - b2) * gi * gi;
                const float mhat = m.data[i] / bc1;
                const float vhat = v.data[i] / bc2;
                w.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }

        const std::uint64_t done = step + 1;
        if (done % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0) {
            const std::string path =
                (fs::path(cfg.checkpoint_dir) / ("ckpt_step" + std::to_string(done) + ".ckpt")).string();
            save_checkpoint(path, cfg, done, params, &adam);
        }
        result.steps_run = done - start_step;
    }

    csv.close();
    if (std::rename(csv_tmp.c_str(), cfg.loss_csv.c_str()) != 0) {
        throw IoError("train: cannot rename " + csv_tmp + " to " + cfg.loss_csv);
    }

    result.checkpoint_path = (fs::path(cfg.checkpoint_dir) / "ckpt_final.ckpt").string();
    save_checkpoint(result.checkpoint_path, cfg, start_step + result.steps_run, params, &adam);
    return result;
}

std::vector<EvalRow> evaluate(Model& model, const std::vector<ImagePair>& pairs,
                              const std::vector<std::string>& names, const std::string& out_csv,
                              const LpipsPlugin& lpips) {
    std::vector<EvalRow> rows;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        EvalRow row;
        row.dataset = i < names.size() ? names[i] : ("pair" + std::to_string(i));
        row.frame = pairs[i].recipe.frame_gap;
        row.view = pairs[i].recipe.viewpoint
                       ? std::to_string(pairs[i].recipe.viewpoint->first) + "_" +
                             std::to_string(pairs[i].recipe.viewpoint->second)
                       : "-";
        row.scale = pairs[i].recipe.scale;
        row.method = model.cfg.method_tag();
        try {
            const auto t0 = std::chrono::steady_clock::now();
            ForwardOut out = forward(model, pairs[i]);
            const auto t1 = std::chrono::steady_clock::now();
            row.metrics.runtime_seconds = std::chrono::duration<double>(t1 - t0).count();
            row.metrics.nrmse = nrmse(out.output, pairs[i].ground_truth);
            row.metrics.psnr = psnr(out.output, pairs[i].ground_truth);
            row.metrics.ssim = ssim(out.output, pairs[i].ground_truth);
            row.metrics.lpips = lpips_hook(out.output, pairs[i].ground_truth, lpips);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }

    if (!out_csv.empty()) {
        const std::string tmp = out_csv + ".tmp";
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw IoError("evaluate: cannot open " + tmp);
        f << "dataset,frame,view,scale,method,nrmse,psnr,ssim,lpips,runtime\n";
        for (const EvalRow& row : rows) {
            if (row.failed) continue;
            f << row.dataset << ',' << row.frame << ',' << row.view << ',' << row.scale << ','
              << row.method << ',' << format_loss(row.metrics.nrmse) << ','
              << format_loss(row.metrics.psnr) << ',' << format_loss(row.metrics.ssim) << ','
              << (row.metrics.lpips ? format_loss(*row.metrics.lpips) : std::string()) << ','
              << format_loss(row.metrics.runtime_seconds) << "\n";
        }
        for (const EvalRow& row : rows) {
            if (row.failed) f << "# failed: " << row.dataset << ": " << row.error << "\n";
        }
        if (!f) throw IoError("evaluate: write failed for " + tmp);
        f.close();
        if (std::rename(tmp.c_str(), out_csv.c_str()) != 0) {
            throw IoError("evaluate: cannot rename " + tmp + " to " + out_csv);
        }
    }
    return rows;
}

double mean_psnr(Model& model, const std::vector<ImagePair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("mean_psnr: no pairs");
    double acc = 0.0;
    for (const ImagePair& pair : pairs) {
        ForwardOut out = forward(model, pair);
        acc += psnr(out.output, pair.ground_truth);
    }
    return acc / static_cast<double>(pairs.size());
}

}  // namespace ccdc
