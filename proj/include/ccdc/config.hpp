#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace ccdc {

/// Flat run configuration. Serialized as `key=value` lines; parsing rejects
/// unknown keys so config files stay in lockstep with this struct.
struct RunConfig {
    std::uint64_t seed = 0;

    int steps = 200;
    int batch_size = 4;
    double lr = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double lambda_warp = 1.0;

    bool use_visibility = true;
    bool use_warping_loss = true;
    bool use_target_in_head = true;

    std::array<int, 4> encoder_ladder = {32, 64, 128, 256};
    double flow_width_mult = 0.25;

    int scale = 4;
    int frame_gap = 1;
    bool resample_frame_gap = true;

    std::string manifest;  // empty -> procedural toy dataset
    int toy_n = 8;
    int toy_size = 64;

    std::string checkpoint_dir = "checkpoints";
    int checkpoint_every = 500;
    std::string loss_csv = "loss.csv";

    /// Short tag describing the ablation state, used as the eval CSV
    /// "method" column: full, no_vis, no_warp, no_vis_no_warp.
    std::string method_tag() const;

    void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);
void save_config(const std::string& path, const RunConfig& cfg);

/// Apply a single `key=value` override (CLI convenience, same key set).
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace ccdc
