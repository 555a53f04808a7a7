#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccdc/checkpoint.hpp"
#include "ccdc/config.hpp"
#include "ccdc/data_pipeline.hpp"
#include "ccdc/gradcheck.hpp"
#include "ccdc/image.hpp"
#include "ccdc/imageops.hpp"
#include "ccdc/trainer.hpp"
#include "ccdc/visibility.hpp"
#include "ccdc/warp.hpp"

namespace fs = std::filesystem;
using namespace ccdc;

namespace {

std::string cache_dir() {
    const char* env = std::getenv("CCDC_CACHE_DIR");
    return (env && *env) ? std::string(env) : std::string(".ccdc_cache");
}

void atomic_write_text(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open for writing: " + tmp);
        os << text;
        if (!os) throw IoError("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

GrayImage load_target_png(const std::string& path) {
    TensorF img = read_png(path);
    return img.channels() == 1 ? img : luminance(img);
}

ColorImage load_reference_png(const std::string& path) {
    TensorF img = read_png(path);
    if (img.channels() == 3) return img;
    TensorF out({3, img.height(), img.width()});
    const std::size_t plane = img.data.size();
    for (int c = 0; c < 3; ++c) {
        std::copy(img.data.begin(), img.data.end(), out.data.begin() + c * plane);
    }
    return out;
}

/// Builds an inference pair from separate target/reference files, validating
/// the size arithmetic against the checkpoint's scale factor. The ground
/// truth slot is filled with the replicated target so loss diagnostics stay
/// well defined; it carries no color information.
ImagePair inference_pair(const GrayImage& target, const ColorImage& reference, int scale) {
    const int th = target.height(), tw = target.width();
    const int eh = std::max(1, static_cast<int>(std::lround(th / double(scale))));
    const int ew = std::max(1, static_cast<int>(std::lround(tw / double(scale))));
    if (reference.height() != eh || reference.width() != ew) {
        throw std::invalid_argument(
            "reference is " + std::to_string(reference.height()) + "x" +
            std::to_string(reference.width()) + " (HxW) but the checkpoint was trained at scale " +
            std::to_string(scale) + ": a " + std::to_string(th) + "x" + std::to_string(tw) +
            " target needs a " + std::to_string(eh) + "x" + std::to_string(ew) +
            " reference (round(" + std::to_string(th) + "/" + std::to_string(scale) + ") x round(" +
            std::to_string(tw) + "/" + std::to_string(scale) + "))");
    }
    ImagePair pair;
    pair.target = target;
    pair.reference = reference;
    pair.ground_truth = TensorF({3, th, tw});
    const std::size_t plane = target.data.size();
    for (int c = 0; c < 3; ++c) {
        std::copy(target.data.begin(), target.data.end(), pair.ground_truth.data.begin() + c * plane);
    }
    pair.recipe.scale = scale;
    return pair;
}

/// Loads a checkpoint into a model built from its stored config snapshot.
/// When the caller supplies a config, it is asserted compatible first.
Model model_from_checkpoint(const std::string& path, const RunConfig* expected) {
    CheckpointInfo info = peek_checkpoint(path);
    Model model(info.config);
    load_checkpoint(path, expected ? *expected : info.config, model.params(), nullptr);
    return model;
}

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration file (key=value lines)")
            ->check(CLI::ExistingFile);
        seed_opt = sub->add_option("--seed", seed, "seed override");
    }

    bool has_seed() const { return seed_opt && seed_opt->count() > 0; }

    RunConfig make_config() const {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (has_seed()) cfg.seed = seed;
        return cfg;
    }
};

int cmd_train(const CommonOpts& common, const std::vector<std::string>& overrides,
              const std::string& resume) {
    RunConfig cfg = common.make_config();
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        }
        apply_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (common.has_seed()) cfg.seed = common.seed;
    cfg.validate();

    TrainResult res = train(cfg, resume);
    std::printf("steps run: %llu\n", static_cast<unsigned long long>(res.steps_run));
    std::printf("first step: l_warp=%.9g l_color=%.9g total=%.9g\n", res.first.l_warp,
                res.first.l_color, res.first.total);
    std::printf("final step: l_warp=%.9g l_color=%.9g total=%.9g (lambda_warp=%g)\n",
                res.last.l_warp, res.last.l_color, res.last.total, res.last.lambda_warp);
    std::printf("loss csv:   %s\n", cfg.loss_csv.c_str());
    std::printf("checkpoint: %s\n", res.checkpoint_path.c_str());
    return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& checkpoint_path,
             const std::string& manifest_path, const std::string& out_csv) {
    RunConfig expected;
    const bool have_expected = !common.config_path.empty();
    if (have_expected) expected = load_config(common.config_path);
    Model model = model_from_checkpoint(checkpoint_path, have_expected ? &expected : nullptr);

    std::vector<ManifestEntry> entries = read_manifest(manifest_path);
    if (common.has_seed() && common.seed != 0) {
        Rng rng(common.seed);
        for (std::size_t i = entries.size(); i > 1; --i) {
            std::swap(entries[i - 1], entries[rng.uniform_int(0, static_cast<int>(i) - 1)]);
        }
    }

    std::vector<ImagePair> pairs;
    std::vector<std::string> names;
    std::vector<std::string> load_failures;
    for (const auto& entry : entries) {
        const std::string name = fs::path(entry.sequence_dir).filename().string();
        try {
            pairs.push_back(load_entry(entry));
            names.push_back(name);
        } catch (const std::exception& e) {
            load_failures.push_back(name + ": " + e.what());
        }
    }

    std::vector<EvalRow> rows = evaluate(model, pairs, names, out_csv);
    double psnr_sum = 0, ssim_sum = 0;
    int ok = 0, failed = static_cast<int>(load_failures.size());
    for (const auto& row : rows) {
        if (row.failed) {
            ++failed;
            continue;
        }
        psnr_sum += row.metrics.psnr;
        ssim_sum += row.metrics.ssim;
        ++ok;
    }
    for (const auto& msg : load_failures) std::fprintf(stderr, "failed to load: %s\n", msg.c_str());
    if (ok > 0) {
        std::printf("evaluated %d pair(s), %d failed: mean psnr=%.4f ssim=%.4f\n", ok, failed,
                    psnr_sum / ok, ssim_sum / ok);
    } else {
        std::printf("evaluated 0 pair(s), %d failed\n", failed);
    }
    std::printf("csv: %s\n", out_csv.c_str());
    return 0;
}

int cmd_colorize(const CommonOpts& common, const std::string& checkpoint_path,
                 const std::string& target_path, const std::string& reference_path,
                 const std::string& out_path) {
    RunConfig expected;
    const bool have_expected = !common.config_path.empty();
    if (have_expected) expected = load_config(common.config_path);
    Model model = model_from_checkpoint(checkpoint_path, have_expected ? &expected : nullptr);

    ImagePair pair = inference_pair(load_target_png(target_path),
                                    load_reference_png(reference_path), model.cfg.scale);
    ForwardOut out = forward(model, pair);
    write_png(out_path, out.output);
    std::printf("wrote %s (%dx%d, scale %d, method %s)\n", out_path.c_str(), out.output.height(),
                out.output.width(), model.cfg.scale, model.cfg.method_tag().c_str());
    return 0;
}

int cmd_make_dataset_toy(std::uint64_t seed, int n, int size, int scale, int frame_gap,
                         const std::string& out_dir) {
    if (n < 1) throw std::invalid_argument("make-dataset: --n must be >= 1");
    if (size < 64 || size % 64 != 0) {
        throw std::invalid_argument("make-dataset: --size must be a positive multiple of 64");
    }
    fs::create_directories(out_dir);

    const int n_frames = std::max(frame_gap + 1, 1);
    std::string manifest;
    Rng root(seed);
    for (int i = 0; i < n; ++i) {
        Rng rng = root.fork(static_cast<std::uint64_t>(i));
        ToySequence seq = render_toy_sequence(rng, size, n_frames);
        char seq_name[16];
        std::snprintf(seq_name, sizeof(seq_name), "seq_%03d", i);
        const fs::path seq_dir = fs::path(out_dir) / seq_name;
        fs::create_directories(seq_dir);
        for (std::size_t f = 0; f < seq.frames.size(); ++f) {
            char frame_name[32];
            std::snprintf(frame_name, sizeof(frame_name), "frame_%03zu.png", f);
            write_png((seq_dir / frame_name).string(), seq.frames[f]);
        }
        manifest += std::string(seq_name) + " " + std::to_string(scale) + " " +
                    std::to_string(frame_gap) + " - -\n";
    }
    atomic_write_text((fs::path(out_dir) / "manifest.txt").string(), manifest);
    std::printf("wrote %d sequence(s) of %d frame(s) to %s\n", n, n_frames, out_dir.c_str());
    return 0;
}

int cmd_make_dataset_frames(const std::string& frames_dir, const std::string& recipe_str,
                            const std::string& out_dir) {
    std::vector<int> parts;
    std::string token;
    std::istringstream is(recipe_str);
    while (std::getline(is, token, ',')) {
        try {
            parts.push_back(std::stoi(token));
        } catch (const std::exception&) {
            throw std::invalid_argument("make-dataset: bad --recipe component '" + token + "'");
        }
    }
    if (parts.size() != 2 && parts.size() != 4) {
        throw std::invalid_argument(
            "make-dataset: --recipe must be scale,frame_gap or scale,frame_gap,row,col");
    }

    std::vector<fs::path> sequences;
    for (const auto& e : fs::directory_iterator(frames_dir)) {
        if (e.is_directory()) sequences.push_back(e.path());
    }
    std::sort(sequences.begin(), sequences.end());
    if (sequences.empty()) sequences.push_back(fs::path(frames_dir));

    fs::create_directories(out_dir);
    const fs::path out = fs::path(out_dir);
    std::string manifest;
    for (const auto& seq : sequences) {
        std::error_code ec;
        fs::path rel = fs::relative(fs::absolute(seq), fs::absolute(out), ec);
        const std::string ref = (ec || rel.empty()) ? fs::absolute(seq).string() : rel.string();
        manifest += ref + " " + std::to_string(parts[0]) + " " + std::to_string(parts[1]);
        if (parts.size() == 4) {
            manifest += " " + std::to_string(parts[2]) + " " + std::to_string(parts[3]);
        } else {
            manifest += " - -";
        }
        manifest += "\n";
    }
    atomic_write_text((out / "manifest.txt").string(), manifest);
    std::printf("wrote manifest for %zu sequence(s) to %s\n", sequences.size(),
                (out / "manifest.txt").string().c_str());
    return 0;
}

int cmd_gradcheck(const std::string& module, std::uint64_t seed) {
    GradcheckResult res = gradcheck_module(module, seed);
    std::printf("gradcheck %s: %s (max relative error %.3g)\n", module.c_str(),
                res.pass ? "PASS" : "FAIL", res.max_rel_err);
    if (!res.pass && !res.detail.empty()) std::fprintf(stderr, "%s\n", res.detail.c_str());
    return res.pass ? 0 : 1;
}

int cmd_vis_dump(const CommonOpts& common, const std::string& checkpoint_path,
                 const std::string& target_path, const std::string& reference_path,
                 const std::string& out_dir) {
    RunConfig expected;
    const bool have_expected = !common.config_path.empty();
    if (have_expected) expected = load_config(common.config_path);
    Model model = model_from_checkpoint(checkpoint_path, have_expected ? &expected : nullptr);

    ImagePair pair = inference_pair(load_target_png(target_path),
                                    load_reference_png(reference_path), model.cfg.scale);
    ForwardOut out = forward(model, pair);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    for (std::size_t i = 0; i < out.flows.size(); ++i) {
        save_flow((dir / ("flow_" + std::to_string(i) + ".ccfl")).string(), out.flows[i]);
    }

    TensorF v0;
    if (out.vis.enabled) {
        v0 = out.vis.v0;
    } else {
        // The checkpoint was trained without visibility; compute the image-
        // domain map directly for diagnostics.
        GrayImage y_up = luminance(out.ref_up);
        v0 = image_visibility(bilinear_warp(y_up, out.flows[0]), pair.target);
    }
    write_png((dir / "visibility.png").string(), render_visibility(v0));

    auto stats = flow_magnitude_stats(out.flows);
    for (std::size_t i = 0; i < stats.size(); ++i) {
        std::printf("flow_%zu: mean |f|=%.4f max |f|=%.4f\n", i, stats[i].first, stats[i].second);
    }
    std::printf("wrote %zu flow dump(s) and visibility.png to %s\n", out.flows.size(),
                out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-camera colorization toolkit"};
    app.require_subcommand(1);
    app.footer("Environment:\n  CCDC_CACHE_DIR  directory for intermediate artifacts (default .ccdc_cache)");

    // train
    CLI::App* train_cmd = app.add_subcommand("train", "optimize a model per the run configuration");
    CommonOpts train_common;
    train_common.attach(train_cmd);
    std::vector<std::string> train_overrides;
    std::string train_resume;
    train_cmd->add_option("--set", train_overrides, "config override key=value (repeatable)");
    train_cmd->add_option("--resume", train_resume, "checkpoint to continue from")
        ->check(CLI::ExistingFile);

    // eval
    CLI::App* eval_cmd = app.add_subcommand("eval", "score a checkpoint over a manifest");
    CommonOpts eval_common;
    eval_common.attach(eval_cmd);
    std::string eval_checkpoint, eval_manifest, eval_out;
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", eval_out, "metrics CSV to write")->required();

    // colorize
    CLI::App* col_cmd = app.add_subcommand("colorize", "colorize one target/reference pair");
    CommonOpts col_common;
    col_common.attach(col_cmd);
    std::string col_checkpoint, col_target, col_reference, col_out;
    col_cmd->add_option("--checkpoint", col_checkpoint, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    col_cmd->add_option("--target", col_target, "grayscale target PNG")
        ->required()
        ->check(CLI::ExistingFile);
    col_cmd->add_option("--reference", col_reference, "color reference PNG")
        ->required()
        ->check(CLI::ExistingFile);
    col_cmd->add_option("--out", col_out, "output PNG")->required();

    // make-dataset
    CLI::App* mk_cmd = app.add_subcommand("make-dataset", "materialize a dataset on disk");
    CommonOpts mk_common;
    mk_common.attach(mk_cmd);
    bool mk_toy = false;
    int mk_n = -1, mk_size = -1, mk_scale = -1, mk_gap = -1;
    std::string mk_out, mk_frames, mk_recipe;
    mk_cmd->add_flag("--toy", mk_toy, "generate the procedural toy dataset");
    mk_cmd->add_option("--n", mk_n, "number of sequences (toy)")->check(CLI::PositiveNumber);
    mk_cmd->add_option("--size", mk_size, "frame size, multiple of 64 (toy)")
        ->check(CLI::PositiveNumber);
    mk_cmd->add_option("--scale", mk_scale, "manifest scale factor")->check(CLI::PositiveNumber);
    mk_cmd->add_option("--frame-gap", mk_gap, "manifest frame gap")
        ->check(CLI::NonNegativeNumber);
    mk_cmd->add_option("--out", mk_out, "output directory")->required();
    mk_cmd->add_option("--from-frames", mk_frames, "directory of pre-extracted frame sequences")
        ->check(CLI::ExistingDirectory);
    mk_cmd->add_option("--recipe", mk_recipe, "scale,frame_gap[,row,col] for --from-frames");

    // gradcheck
    CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suites");
    CommonOpts gc_common;
    gc_common.attach(gc_cmd);
    std::string gc_module;
    gc_cmd->add_option("--module", gc_module, "one of: warp, losses, encoders")
        ->required()
        ->check(CLI::IsMember({"warp", "losses", "encoders"}));

    // vis-dump
    CLI::App* vd_cmd = app.add_subcommand("vis-dump", "dump flow fields and the visibility map");
    CommonOpts vd_common;
    vd_common.attach(vd_cmd);
    std::string vd_checkpoint, vd_target, vd_reference, vd_out;
    vd_cmd->add_option("--checkpoint", vd_checkpoint, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    vd_cmd->add_option("--target", vd_target, "grayscale target PNG")
        ->required()
        ->check(CLI::ExistingFile);
    vd_cmd->add_option("--reference", vd_reference, "color reference PNG")
        ->required()
        ->check(CLI::ExistingFile);
    vd_cmd->add_option("--out-dir", vd_out, "output directory (default: cache dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_common, train_overrides, train_resume);
        if (eval_cmd->parsed()) return cmd_eval(eval_common, eval_checkpoint, eval_manifest, eval_out);
        if (col_cmd->parsed()) {
            return cmd_colorize(col_common, col_checkpoint, col_target, col_reference, col_out);
        }
        if (mk_cmd->parsed()) {
            if (mk_toy == !mk_frames.empty()) {
                throw std::invalid_argument("make-dataset: pass exactly one of --toy, --from-frames");
            }
            RunConfig defaults = mk_common.make_config();
            if (mk_toy) {
                return cmd_make_dataset_toy(mk_common.has_seed() ? mk_common.seed : defaults.seed,
                                            mk_n > 0 ? mk_n : defaults.toy_n,
                                            mk_size > 0 ? mk_size : defaults.toy_size,
                                            mk_scale > 0 ? mk_scale : defaults.scale,
                                            mk_gap >= 0 ? mk_gap : defaults.frame_gap, mk_out);
            }
            if (mk_recipe.empty()) {
                throw std::invalid_argument("make-dataset: --from-frames requires --recipe");
            }
            return cmd_make_dataset_frames(mk_frames, mk_recipe, mk_out);
        }
        if (gc_cmd->parsed()) {
            return cmd_gradcheck(gc_module, gc_common.has_seed() ? gc_common.seed : 1);
        }
        if (vd_cmd->parsed()) {
            const std::string out = vd_out.empty() ? (fs::path(cache_dir()) / "vis").string() : vd_out;
            return cmd_vis_dump(vd_common, vd_checkpoint, vd_target, vd_reference, out);
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
