#include <unistd.h>

#include <array>
#include <filesystem>
#include <string>

#include "ccdc/config.hpp"
#include "ccdc/tensor.hpp"
#include "doctest.h"

using namespace ccdc;
namespace fs = std::filesystem;

TEST_CASE("defaults parse from empty text and validate") {
    RunConfig cfg = parse_config_text("");
    CHECK(cfg.seed == 0);
    CHECK(cfg.steps == 200);
    CHECK(cfg.batch_size == 4);
    CHECK(cfg.lr == 1e-4);
    CHECK(cfg.lambda_warp == 1.0);
    CHECK(cfg.use_visibility);
    CHECK(cfg.use_warping_loss);
    CHECK(cfg.use_target_in_head);
    CHECK(cfg.encoder_ladder == std::array<int, 4>{32, 64, 128, 256});
    CHECK(cfg.flow_width_mult == 0.25);
    CHECK(cfg.scale == 4);
    CHECK(cfg.frame_gap == 1);
    CHECK(cfg.manifest.empty());
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("serialize then parse is the identity") {
    RunConfig cfg;
    cfg.seed = 1234567890123ULL;
    cfg.steps = 17;
    cfg.lr = 3.5e-4;
    cfg.lambda_warp = 0.125;
    cfg.use_visibility = false;
    cfg.encoder_ladder = {8, 16, 32, 64};
    cfg.flow_width_mult = 0.0625;
    cfg.scale = 8;
    cfg.manifest = "data/manifest.txt";
    cfg.loss_csv = "runs/loss.csv";

    RunConfig back = parse_config_text(serialize_config(cfg));
    CHECK(back.seed == cfg.seed);
    CHECK(back.steps == cfg.steps);
    CHECK(back.lr == cfg.lr);
    CHECK(back.lambda_warp == cfg.lambda_warp);
    CHECK(back.use_visibility == cfg.use_visibility);
    CHECK(back.encoder_ladder == cfg.encoder_ladder);
    CHECK(back.flow_width_mult == cfg.flow_width_mult);
    CHECK(back.scale == cfg.scale);
    CHECK(back.manifest == cfg.manifest);
    CHECK(back.loss_csv == cfg.loss_csv);
    CHECK(serialize_config(back) == serialize_config(cfg));
}

TEST_CASE("comments, blanks, and whitespace are tolerated") {
    RunConfig cfg = parse_config_text(
        "# run setup\n"
        "\n"
        "  steps = 42  \n"
        "\tlr=1e-3\n"
        "# trailing comment\n");
    CHECK(cfg.steps == 42);
    CHECK(cfg.lr == 1e-3);
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(parse_config_text("unknown_key=1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("steps\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("steps=abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("lr=1e\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("use_visibility=maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("encoder_ladder=32,64\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("encoder_ladder=1,2,3,4,5\n"), ConfigError);
}

TEST_CASE("validate rejects out-of-range settings") {
    auto broken = [](const char* kv) {
        RunConfig cfg = parse_config_text(kv);
        cfg.validate();
    };
    CHECK_THROWS_AS(broken("steps=-1\n"), ConfigError);
    CHECK_THROWS_AS(broken("batch_size=0\n"), ConfigError);
    CHECK_THROWS_AS(broken("lr=0\n"), ConfigError);
    CHECK_THROWS_AS(broken("lambda_warp=-0.5\n"), ConfigError);
    CHECK_THROWS_AS(broken("flow_width_mult=0\n"), ConfigError);
    CHECK_THROWS_AS(broken("encoder_ladder=0,64,128,256\n"), ConfigError);
    CHECK_THROWS_AS(broken("scale=3\n"), ConfigError);
    CHECK_THROWS_AS(broken("frame_gap=-1\n"), ConfigError);
    CHECK_THROWS_AS(broken("toy_n=0\n"), ConfigError);
    CHECK_THROWS_AS(broken("toy_size=60\n"), ConfigError);
    CHECK_THROWS_AS(broken("checkpoint_every=0\n"), ConfigError);
}

TEST_CASE("method tag covers all ablation combinations") {
    RunConfig cfg;
    CHECK(cfg.method_tag() == "full");
    cfg.use_visibility = false;
    CHECK(cfg.method_tag() == "no_vis");
    cfg.use_visibility = true;
    cfg.use_warping_loss = false;
    CHECK(cfg.method_tag() == "no_warp");
    cfg.use_visibility = false;
    CHECK(cfg.method_tag() == "no_vis_no_warp");
}

TEST_CASE("save and load round-trip through a file") {
    const fs::path dir = fs::temp_directory_path() / ("ccdc_cfg_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string path = (dir / "run.cfg").string();

    RunConfig cfg;
    cfg.steps = 5;
    cfg.seed = 99;
    save_config(path, cfg);
    RunConfig back = load_config(path);
    CHECK(back.steps == 5);
    CHECK(back.seed == 99);
    CHECK(serialize_config(back) == serialize_config(cfg));
    CHECK_FALSE(fs::exists(path + ".tmp"));

    CHECK_THROWS_AS(load_config((dir / "missing.cfg").string()), IoError);
    fs::remove_all(dir);
}

TEST_CASE("apply_config_kv mirrors the file syntax") {
    RunConfig cfg;
    apply_config_kv(cfg, "steps", "9");
    apply_config_kv(cfg, "encoder_ladder", "4, 8, 16, 32");
    CHECK(cfg.steps == 9);
    CHECK(cfg.encoder_ladder == std::array<int, 4>{4, 8, 16, 32});
    CHECK_THROWS_AS(apply_config_kv(cfg, "nope", "1"), ConfigError);
}
