#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ccdc/image.hpp"
#include "ccdc/rng.hpp"
#include "ccdc/warp.hpp"
#include "doctest.h"

using namespace ccdc;
namespace fs = std::filesystem;

namespace {

const char* cli_binary() {
    const char* env = std::getenv("CCDC_BIN");
    REQUIRE_MESSAGE(env != nullptr, "CCDC_BIN must point at the ccdc binary");
    REQUIRE(fs::exists(env));
    return env;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("ccdc_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

const fs::path& work_root() {
    static TempDir dir("work");
    return dir.path;
}

fs::path case_dir(const std::string& name) {
    fs::path dir = work_root() / name;
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE_MESSAGE(bool(is), ("cannot open " + path.string()));
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

struct CmdResult {
    int code = -1;
    std::string out;
    std::string err;
};

CmdResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path dir = case_dir("capture");
    const fs::path out_file = dir / ("stdout_" + std::to_string(counter));
    const fs::path err_file = dir / ("stderr_" + std::to_string(counter));
    ++counter;
    const std::string cmd = std::string(cli_binary()) + " " + args + " >" + out_file.string() +
                            " 2>" + err_file.string();
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    CmdResult res;
    res.code = WEXITSTATUS(status);
    res.out = slurp(out_file);
    res.err = slurp(err_file);
    return res;
}

TensorF random_image(int channels, int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    TensorF img({channels, h, w});
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return lines;
}

struct TrainArtifacts {
    fs::path config;
    fs::path checkpoint;
    fs::path loss_csv;
    fs::path target_png;
    fs::path reference_png;
    CmdResult run;
};

/// Trains the shared 2-step tiny checkpoint used by colorize/eval/vis-dump,
/// plus a matching 64x64 target / 16x16 reference PNG pair.
const TrainArtifacts& trained() {
    static const TrainArtifacts art = [] {
        TrainArtifacts a;
        const fs::path dir = case_dir("trained");
        a.config = dir / "run.cfg";
        a.loss_csv = dir / "loss.csv";
        const fs::path ckpt_dir = dir / "ckpt";
        {
            std::ofstream os(a.config);
            os << "seed=3\n"
               << "steps=2\n"
               << "batch_size=1\n"
               << "lr=0.001\n"
               << "encoder_ladder=8,16,32,64\n"
               << "flow_width_mult=0.125\n"
               << "scale=4\n"
               << "frame_gap=1\n"
               << "toy_n=1\n"
               << "toy_size=64\n"
               << "checkpoint_every=100\n"
               << "checkpoint_dir=" << ckpt_dir.string() << "\n"
               << "loss_csv=" << a.loss_csv.string() << "\n";
        }
        a.run = run_cli("train --config " + a.config.string());
        a.checkpoint = ckpt_dir / "ckpt_final.ckpt";
        a.target_png = dir / "target.png";
        a.reference_png = dir / "reference.png";
        write_png(a.target_png.string(), random_image(1, 64, 64, 21));
        write_png(a.reference_png.string(), random_image(3, 16, 16, 22));
        return a;
    }();
    REQUIRE_MESSAGE(art.run.code == 0, ("shared train run failed: " + art.run.err));
    REQUIRE(fs::exists(art.checkpoint));
    return art;
}

}  // namespace

TEST_CASE("cli: help exits 0 and parse errors exit 2") {
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("frobnicate").code == 2);
    CHECK(run_cli("gradcheck").code == 2);
    CHECK(run_cli("gradcheck --module decoder").code == 2);
    CHECK(run_cli("gradcheck --module warp --bogus 1").code == 2);
    CHECK(run_cli("train --config /nonexistent/run.cfg").code == 2);
}

TEST_CASE("cli: gradcheck runs the finite-difference suites") {
    CmdResult warp = run_cli("gradcheck --module warp");
    CHECK(warp.code == 0);
    CHECK(warp.out.find("gradcheck warp: PASS") != std::string::npos);

    CmdResult losses = run_cli("gradcheck --module losses --seed 2");
    CHECK(losses.code == 0);
    CHECK(losses.out.find("gradcheck losses: PASS") != std::string::npos);
}

TEST_CASE("cli: make-dataset --toy writes a deterministic layout") {
    const fs::path dir = case_dir("mk_toy");
    const fs::path a = dir / "a", b = dir / "b", c = dir / "c";
    const std::string common = "make-dataset --toy --n 2 --size 64 --scale 4 --frame-gap 1 --out ";

    CmdResult ra = run_cli(common + a.string() + " --seed 7");
    CHECK(ra.code == 0);
    CHECK(ra.out.find("wrote 2 sequence(s) of 2 frame(s)") != std::string::npos);

    CHECK(slurp(a / "manifest.txt") == "seq_000 4 1 - -\nseq_001 4 1 - -\n");
    for (const char* seq : {"seq_000", "seq_001"}) {
        CHECK(fs::exists(a / seq / "frame_000.png"));
        CHECK(fs::exists(a / seq / "frame_001.png"));
        CHECK_FALSE(fs::exists(a / seq / "frame_002.png"));
    }

    REQUIRE(run_cli(common + b.string() + " --seed 7").code == 0);
    CHECK(slurp(a / "manifest.txt") == slurp(b / "manifest.txt"));
    for (const char* seq : {"seq_000", "seq_001"}) {
        for (const char* frame : {"frame_000.png", "frame_001.png"}) {
            CHECK(slurp(a / seq / frame) == slurp(b / seq / frame));
        }
    }

    REQUIRE(run_cli(common + c.string() + " --seed 8").code == 0);
    CHECK(slurp(a / "seq_000" / "frame_000.png") != slurp(c / "seq_000" / "frame_000.png"));
}

TEST_CASE("cli: make-dataset validates mode and toy parameters") {
    const fs::path dir = case_dir("mk_bad");
    const std::string out = (dir / "out").string();
    CHECK(run_cli("make-dataset --out " + out).code == 2);
    CHECK(run_cli("make-dataset --toy --from-frames " + dir.string() + " --recipe 4,1 --out " +
                  out)
              .code == 2);
    CHECK(run_cli("make-dataset --toy --n 0 --out " + out).code == 2);
    CHECK(run_cli("make-dataset --toy --size 60 --out " + out).code == 2);
    CHECK(run_cli("make-dataset --toy --size 64 --n 1").code == 2);
}

TEST_CASE("cli: make-dataset --from-frames writes a sorted manifest") {
    const fs::path dir = case_dir("mk_frames");
    const fs::path frames = dir / "frames";
    fs::create_directories(frames / "clip_b");
    fs::create_directories(frames / "clip_a");

    const fs::path out = dir / "out";
    CmdResult res = run_cli("make-dataset --from-frames " + frames.string() +
                            " --recipe 4,1 --out " + out.string());
    CHECK(res.code == 0);

    std::vector<std::string> lines = split_lines(slurp(out / "manifest.txt"));
    REQUIRE(lines.size() == 2);
    CHECK(lines[0].find("clip_a") != std::string::npos);
    CHECK(lines[1].find("clip_b") != std::string::npos);
    for (const auto& line : lines) CHECK(line.ends_with(" 4 1 - -"));

    const fs::path out_lf = dir / "out_lf";
    REQUIRE(run_cli("make-dataset --from-frames " + frames.string() + " --recipe 2,0,1,1 --out " +
                    out_lf.string())
                .code == 0);
    for (const auto& line : split_lines(slurp(out_lf / "manifest.txt"))) {
        CHECK(line.ends_with(" 2 0 1 1"));
    }

    CHECK(run_cli("make-dataset --from-frames " + frames.string() + " --out " +
                  (dir / "x").string())
              .code == 2);
    CHECK(run_cli("make-dataset --from-frames " + frames.string() + " --recipe 4 --out " +
                  (dir / "y").string())
              .code == 2);
    CHECK(run_cli("make-dataset --from-frames " + frames.string() + " --recipe 4,a --out " +
                  (dir / "z").string())
              .code == 2);
}

TEST_CASE("cli: train writes the loss csv and final checkpoint") {
    const TrainArtifacts& art = trained();
    CHECK(art.run.out.find("steps run: 2") != std::string::npos);
    CHECK(art.run.out.find("checkpoint:") != std::string::npos);
    CHECK(slurp(art.loss_csv).rfind("step,l_warp,l_color,total\n0,", 0) == 0);
}

TEST_CASE("cli: train --set overrides keys and rejects malformed entries") {
    const TrainArtifacts& art = trained();
    const fs::path dir = case_dir("train_set");
    const fs::path csv = dir / "override.csv";
    CmdResult res = run_cli("train --config " + art.config.string() +
                            " --set steps=1 --set loss_csv=" + csv.string() +
                            " --set checkpoint_dir=" + (dir / "ckpt").string());
    CHECK(res.code == 0);
    CHECK(res.out.find("steps run: 1") != std::string::npos);
    CHECK(fs::exists(dir / "ckpt" / "ckpt_final.ckpt"));
    CHECK(slurp(csv).rfind("step,l_warp,l_color,total\n0,", 0) == 0);

    const std::string base = "train --config " + art.config.string();
    CHECK(run_cli(base + " --set steps").code == 2);
    CHECK(run_cli(base + " --set bogus=1").code == 2);
    CHECK(run_cli(base + " --set steps=-5").code == 2);
}

TEST_CASE("cli: colorize writes a colorized png and checks reference size") {
    const TrainArtifacts& art = trained();
    const fs::path dir = case_dir("colorize");
    const fs::path out = dir / "colorized.png";

    CmdResult ok = run_cli("colorize --checkpoint " + art.checkpoint.string() + " --target " +
                           art.target_png.string() + " --reference " +
                           art.reference_png.string() + " --out " + out.string());
    CHECK(ok.code == 0);
    CHECK(ok.out.find("wrote " + out.string()) != std::string::npos);
    TensorF img = read_png(out.string());
    CHECK(img.channels() == 3);
    CHECK(img.height() == 64);
    CHECK(img.width() == 64);

    const fs::path big_ref = dir / "reference_32.png";
    write_png(big_ref.string(), random_image(3, 32, 32, 23));
    CmdResult bad = run_cli("colorize --checkpoint " + art.checkpoint.string() + " --target " +
                            art.target_png.string() + " --reference " + big_ref.string() +
                            " --out " + (dir / "never.png").string());
    CHECK(bad.code == 2);
    CHECK(bad.err.find("needs a 16x16 reference") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "never.png"));

    CHECK(run_cli("colorize --checkpoint " + art.checkpoint.string() + " --target " +
                  art.target_png.string() + " --out " + out.string())
              .code == 2);
}

TEST_CASE("cli: eval scores a toy manifest into a metrics csv") {
    const TrainArtifacts& art = trained();
    const fs::path dir = case_dir("eval");
    const fs::path data = dir / "data";
    REQUIRE(run_cli("make-dataset --toy --n 2 --size 64 --scale 4 --frame-gap 1 --seed 11 --out " +
                    data.string())
                .code == 0);

    const fs::path csv = dir / "metrics.csv";
    CmdResult res = run_cli("eval --checkpoint " + art.checkpoint.string() + " --manifest " +
                            (data / "manifest.txt").string() + " --out " + csv.string());
    CHECK(res.code == 0);
    CHECK(res.out.find("evaluated 2 pair(s), 0 failed") != std::string::npos);

    std::vector<std::string> lines = split_lines(slurp(csv));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "dataset,frame,view,scale,method,nrmse,psnr,ssim,lpips,runtime");
    CHECK(lines[1].rfind("seq_000,1,-,4,full,", 0) == 0);
    CHECK(lines[2].rfind("seq_001,1,-,4,full,", 0) == 0);
}

TEST_CASE("cli: vis-dump writes flow files and a visibility image") {
    const TrainArtifacts& art = trained();
    const fs::path dir = case_dir("visdump");
    const fs::path out = dir / "vis";
    CmdResult res = run_cli("vis-dump --checkpoint " + art.checkpoint.string() + " --target " +
                            art.target_png.string() + " --reference " +
                            art.reference_png.string() + " --out-dir " + out.string());
    CHECK(res.code == 0);
    CHECK(res.out.find("flow_0: mean |f|=") != std::string::npos);
    CHECK(res.out.find("visibility.png") != std::string::npos);

    const int sizes[5] = {64, 32, 16, 8, 4};
    for (int i = 0; i < 5; ++i) {
        const fs::path f = out / ("flow_" + std::to_string(i) + ".ccfl");
        REQUIRE(fs::exists(f));
        TensorF flow = load_flow(f.string());
        CHECK(flow.channels() == 2);
        CHECK(flow.height() == sizes[i]);
        CHECK(flow.width() == sizes[i]);
    }

    TensorF vis = read_png((out / "visibility.png").string());
    REQUIRE(vis.channels() == 3);
    CHECK(vis.height() == 64);
    CHECK(vis.width() == 64);
    const std::size_t plane = vis.data.size() / 3;
    bool blue_zero = true;
    for (std::size_t i = 2 * plane; i < 3 * plane; ++i) {
        blue_zero = blue_zero && vis.data[i] == 0.0f;
    }
    CHECK(blue_zero);
}
