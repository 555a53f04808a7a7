#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccdc/config.hpp"
#include "ccdc/nn.hpp"

namespace ccdc {

/// Adam optimizer state: first/second moments per parameter plus the shared
/// step counter, kept in parameter-collection order.
struct AdamState {
    std::vector<TensorF> m, v;
    std::uint64_t t = 0;

    void init(const std::vector<nn::ParamRef<float>>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.push_back(TensorF::zeros(p.value->shape));
            v.push_back(TensorF::zeros(p.value->shape));
        }
        t = 0;
    }
};

/// Versioned checkpoint container ("CCKP"): config snapshot, step counter,
/// named little-endian float tensors (parameters and optimizer moments).
/// Loading refuses a file whose snapshot disagrees with the expected config
/// on any field that changes the parameter layout or the ablation state.
void save_checkpoint(const std::string& path, const RunConfig& cfg, std::uint64_t step,
                     const std::vector<nn::ParamRef<float>>& params, const AdamState* adam);

struct CheckpointInfo {
    RunConfig config;
    std::uint64_t step = 0;
    bool has_adam = false;
};

CheckpointInfo load_checkpoint(const std::string& path, const RunConfig& expected,
                               const std::vector<nn::ParamRef<float>>& params, AdamState* adam);

/// Reads just the config snapshot and step (for colorize/eval, which build
/// the model FROM the stored config instead of validating against one).
CheckpointInfo peek_checkpoint(const std::string& path);

}  // namespace ccdc
