#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ccdc/checkpoint.hpp"
#include "ccdc/trainer.hpp"
#include "doctest.h"

using namespace ccdc;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.encoder_ladder = {8, 16, 32, 64};
    cfg.flow_width_mult = 0.125;
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("ccdc_ckpt_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void perturb(std::vector<nn::ParamRef<float>>& params) {
    for (auto& p : params) {
        for (float& v : p.value->data) v += 0.001f;
    }
}

}  // namespace

TEST_CASE("checkpoint round-trip restores a bit-identical forward pass") {
    TempDir tmp("roundtrip");
    RunConfig cfg = tiny_config();
    cfg.seed = 3;
    cfg.scale = 4;
    cfg.frame_gap = 0;

    Model a(cfg);
    auto pa = a.params();
    const std::string path = (tmp.path / "model.ckpt").string();
    save_checkpoint(path, cfg, 7, pa, nullptr);

    ImagePair pair = toy_dataset(5, 1, 64, [&] {
        PairRecipe r;
        r.scale = cfg.scale;
        r.frame_gap = cfg.frame_gap;
        return r;
    }())[0];
    const TensorF out_a = forward(a, pair).output;

    RunConfig cfg_b = cfg;
    cfg_b.seed = 4;  // different init, must be fully overwritten by the load
    Model b(cfg_b);
    auto pb = b.params();
    CheckpointInfo info = load_checkpoint(path, cfg_b, pb, nullptr);
    CHECK(info.step == 7);
    CHECK_FALSE(info.has_adam);

    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        CHECK(pa[i].value->data == pb[i].value->data);
    }
    const TensorF out_b = forward(b, pair).output;
    CHECK(out_a.data == out_b.data);
}

TEST_CASE("loading refuses ablation and architecture mismatches") {
    TempDir tmp("mismatch");
    RunConfig cfg = tiny_config();
    Model m(cfg);
    auto params = m.params();
    const std::string path = (tmp.path / "model.ckpt").string();
    save_checkpoint(path, cfg, 1, params, nullptr);

    SUBCASE("visibility ablation differs") {
        RunConfig other = cfg;
        other.use_visibility = false;
        Model o(other);
        auto po = o.params();
        CHECK_THROWS_AS(load_checkpoint(path, other, po, nullptr), ConfigError);
    }
    SUBCASE("target-in-head ablation differs") {
        RunConfig other = cfg;
        other.use_target_in_head = false;
        Model o(other);
        auto po = o.params();
        CHECK_THROWS_AS(load_checkpoint(path, other, po, nullptr), ConfigError);
    }
    SUBCASE("encoder ladder differs") {
        RunConfig other = cfg;
        other.encoder_ladder = {16, 32, 64, 128};
        Model o(other);
        auto po = o.params();
        CHECK_THROWS_AS(load_checkpoint(path, other, po, nullptr), ConfigError);
    }
    SUBCASE("flow width differs") {
        RunConfig other = cfg;
        other.flow_width_mult = 0.25;
        Model o(other);
        auto po = o.params();
        CHECK_THROWS_AS(load_checkpoint(path, other, po, nullptr), ConfigError);
    }
    SUBCASE("training hyperparameters may differ freely") {
        RunConfig other = cfg;
        other.lr = 123.0;
        other.steps = 9999;
        other.lambda_warp = 0.5;
        Model o(other);
        auto po = o.params();
        CHECK_NOTHROW(load_checkpoint(path, other, po, nullptr));
    }
}

TEST_CASE("adam state round-trips next to the parameters") {
    TempDir tmp("adam");
    RunConfig cfg = tiny_config();
    Model m(cfg);
    auto params = m.params();

    AdamState adam;
    adam.init(params);
    adam.t = 41;
    Rng rng(17);
    for (auto& t : adam.m) {
        for (float& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    for (auto& t : adam.v) {
        for (float& v : t.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    }

    const std::string path = (tmp.path / "model.ckpt").string();
    save_checkpoint(path, cfg, 41, params, &adam);

    CHECK(peek_checkpoint(path).has_adam);

    Model o(cfg);
    auto po = o.params();
    perturb(po);
    AdamState restored;
    restored.init(po);
    CheckpointInfo info = load_checkpoint(path, cfg, po, &restored);
    CHECK(info.has_adam);
    CHECK(restored.t == 41);
    REQUIRE(restored.m.size() == adam.m.size());
    for (std::size_t i = 0; i < adam.m.size(); ++i) {
        CHECK(restored.m[i].data == adam.m[i].data);
        CHECK(restored.v[i].data == adam.v[i].data);
    }
}

TEST_CASE("peek reads the snapshot without a model") {
    TempDir tmp("peek");
    RunConfig cfg = tiny_config();
    cfg.seed = 12;
    cfg.lambda_warp = 0.25;
    Model m(cfg);
    auto params = m.params();
    const std::string path = (tmp.path / "model.ckpt").string();
    save_checkpoint(path, cfg, 100, params, nullptr);

    CheckpointInfo info = peek_checkpoint(path);
    CHECK(info.step == 100);
    CHECK_FALSE(info.has_adam);
    CHECK(info.config.seed == 12);
    CHECK(info.config.lambda_warp == 0.25);
    CHECK(info.config.encoder_ladder == cfg.encoder_ladder);
    CHECK(serialize_config(info.config) == serialize_config(cfg));
}

TEST_CASE("corrupt checkpoint files raise IoError") {
    TempDir tmp("corrupt");
    RunConfig cfg = tiny_config();
    Model m(cfg);
    auto params = m.params();

    SUBCASE("missing file") {
        CHECK_THROWS_AS(peek_checkpoint((tmp.path / "nope.ckpt").string()), IoError);
        CHECK_THROWS_AS(load_checkpoint((tmp.path / "nope.ckpt").string(), cfg, params, nullptr), IoError);
    }
    SUBCASE("bad magic") {
        const std::string path = (tmp.path / "bad.ckpt").string();
        std::ofstream(path, std::ios::binary) << "NOPE garbage";
        CHECK_THROWS_AS(peek_checkpoint(path), IoError);
    }
    SUBCASE("truncated file") {
        const std::string good = (tmp.path / "good.ckpt").string();
        save_checkpoint(good, cfg, 1, params, nullptr);
        std::ifstream in(good, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        REQUIRE(bytes.size() > 256);
        const std::string cut = (tmp.path / "cut.ckpt").string();
        std::ofstream(cut, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        CHECK_THROWS_AS(load_checkpoint(cut, cfg, params, nullptr), IoError);
    }
    SUBCASE("no temp residue after save") {
        const std::string path = (tmp.path / "clean.ckpt").string();
        save_checkpoint(path, cfg, 1, params, nullptr);
        CHECK(fs::exists(path));
        CHECK_FALSE(fs::exists(path + ".tmp"));
    }
}
