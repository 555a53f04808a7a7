#include "ccdc/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ccdc/imageops.hpp"

namespace fs = std::filesystem;

namespace ccdc {

void check_pair(const ImagePair& pair) {
    check_gray(pair.target, "ImagePair.target");
    check_color(pair.reference, "ImagePair.reference");
    check_color(pair.ground_truth, "ImagePair.ground_truth");
    if (pair.target.height() != pair.ground_truth.height() ||
        pair.target.width() != pair.ground_truth.width()) {
        throw ShapeError("ImagePair: target " + pair.target.shape_str() + " vs ground truth " +
                         pair.ground_truth.shape_str());
    }
    const int s = pair.recipe.scale;
    if (s < 1) throw std::invalid_argument("ImagePair: scale must be >= 1");
    const int eh = std::max(1, static_cast<int>(std::lround(pair.ground_truth.height() / double(s))));
    const int ew = std::max(1, static_cast<int>(std::lround(pair.ground_truth.width() / double(s))));
    if (pair.reference.height() != eh || pair.reference.width() != ew) {
        throw ShapeError("ImagePair: reference " + pair.reference.shape_str() + " does not match scale " +
                         std::to_string(s));
    }
}

ImagePair make_pair(const std::vector<ColorImage>& frames, const PairRecipe& recipe) {
    if (frames.empty()) throw std::invalid_argument("make_pair: no frames");
    if (recipe.frame_gap < 0 || recipe.frame_gap >= static_cast<int>(frames.size())) {
        throw std::invalid_argument("make_pair: frame_gap " + std::to_string(recipe.frame_gap) +
                                    " out of range for " + std::to_string(frames.size()) + " frames");
    }
    if (recipe.scale < 1) throw std::invalid_argument("make_pair: scale must be >= 1");
    for (const ColorImage& f : frames) {
        check_color(f, "make_pair");
        if (!f.same_shape(frames[0])) throw ShapeError("make_pair: frame sizes differ");
    }
    ImagePair pair;
    pair.recipe = recipe;
    pair.reference = recipe.scale == 1 ? frames[0] : bicubic_resize(frames[0], 1.0 / recipe.scale);
    pair.ground_truth = frames[static_cast<std::size_t>(recipe.frame_gap)];
    pair.target = luminance(pair.ground_truth);
    check_pair(pair);
    return pair;
}

ImagePair make_lightfield_pair(const std::vector<std::vector<std::vector<ColorImage>>>& grid,
                               const PairRecipe& recipe) {
    if (grid.empty() || grid[0].empty()) throw std::invalid_argument("make_lightfield_pair: empty grid");
    if (!recipe.viewpoint) throw std::invalid_argument("make_lightfield_pair: recipe has no viewpoint");
    const auto [r, c] = *recipe.viewpoint;
    if (r < 0 || c < 0 || r >= static_cast<int>(grid.size()) ||
        c >= static_cast<int>(grid[static_cast<std::size_t>(r)].size())) {
        throw std::invalid_argument("make_lightfield_pair: viewpoint (" + std::to_string(r) + "," +
                                    std::to_string(c) + ") outside grid");
    }
    const auto& ref_seq = grid[0][0];
    const auto& tgt_seq = grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    if (ref_seq.empty() || tgt_seq.empty()) {
        throw std::invalid_argument("make_lightfield_pair: empty view sequence");
    }
    if (recipe.frame_gap < 0 || recipe.frame_gap >= static_cast<int>(tgt_seq.size())) {
        throw std::invalid_argument("make_lightfield_pair: frame_gap out of range");
    }
    ImagePair pair;
    pair.recipe = recipe;
    pair.reference = recipe.scale == 1 ? ref_seq[0] : bicubic_resize(ref_seq[0], 1.0 / recipe.scale);
    pair.ground_truth = tgt_seq[static_cast<std::size_t>(recipe.frame_gap)];
    pair.target = luminance(pair.ground_truth);
    check_pair(pair);
    return pair;
}

namespace {

std::array<float, 3> hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    const double i = std::floor(h * 6.0);
    const double f = h * 6.0 - i;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - f * s);
    const double t = v * (1.0 - (1.0 - f) * s);
    double r, g, b;
    switch (static_cast<int>(i) % 6) {
        case 0: r = v, g = t, b = p; break;
        case 1: r = q, g = v, b = p; break;
        case 2: r = p, g = v, b = t; break;
        case 3: r = p, g = q, b = v; break;
        case 4: r = t, g = p, b = v; break;
        default: r = v, g = p, b = q; break;
    }
    return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

bool inside_shape(const ToyShape& sh, int frame, double x, double y) {
    const double cx = sh.cx + sh.vx * frame;
    const double cy = sh.cy + sh.vy * frame;
    const double dx = x - cx, dy = y - cy;
    switch (sh.kind) {
        case ToyShape::kCircle:
            return dx * dx + dy * dy <= sh.hw * sh.hw;
        case ToyShape::kRotRect: {
            const double a = sh.angle0 + sh.omega * frame;
            const double ca = std::cos(a), sa = std::sin(a);
            const double rx = ca * dx + sa * dy;
            const double ry = -sa * dx + ca * dy;
            return std::abs(rx) <= sh.hw && std::abs(ry) <= sh.hh;
        }
        case ToyShape::kRect:
        default:
            return std::abs(dx) <= sh.hw && std::abs(dy) <= sh.hh;
    }
}

}  // namespace

ToySequence render_toy_sequence(Rng& rng, int size, int n_frames) {
    if (size < 8) throw std::invalid_argument("render_toy_sequence: size too small");
    if (n_frames < 1) throw std::invalid_argument("render_toy_sequence: need at least one frame");

    ToySequence seq;
    const double hue0 = rng.uniform();

    // Static background: vertical gradient between two palette colors.
    const auto bg_top = hsv_to_rgb(hue0, 0.35, 0.30);
    const auto bg_bot = hsv_to_rgb(hue0 + 0.45, 0.35, 0.55);

    const int n_shapes = rng.uniform_int(3, 4);
    for (int i = 0; i < n_shapes; ++i) {
        ToyShape sh;
        const bool topmost = i == n_shapes - 1;
        const int kind = topmost ? rng.uniform_int(0, 1) : rng.uniform_int(0, 2);
        sh.kind = static_cast<ToyShape::Kind>(kind);
        sh.hw = rng.uniform(size / 10.0, size / 5.0);
        sh.hh = sh.kind == ToyShape::kCircle ? sh.hw : rng.uniform(size / 10.0, size / 5.0);
        do {
            sh.vx = rng.uniform_int(-2, 2);
            sh.vy = rng.uniform_int(-2, 2);
        } while (sh.vx == 0 && sh.vy == 0);
        if (sh.kind == ToyShape::kRotRect) {
            sh.angle0 = rng.uniform(0.0, 3.14159);
            sh.omega = rng.uniform(-0.15, 0.15);
        }
        // Keep the shape inside the canvas for the whole sequence.
        const double span = std::max(sh.hw, sh.hh) + 2.0;
        const double travel = (n_frames - 1) * 2.0;
        const double lo = span + travel, hi = size - 1 - span - travel;
        sh.cx = std::floor(rng.uniform(lo, std::max(lo + 1, hi)));
        sh.cy = std::floor(rng.uniform(lo, std::max(lo + 1, hi)));
        // Distinct hue and value per shape so luminance identifies color.
        const double hue = hue0 + 0.13 + 0.27 * i + rng.uniform(0.0, 0.08);
        const double val = 0.35 + 0.6 * (i + rng.uniform(0.0, 0.5)) / n_shapes;
        sh.color = hsv_to_rgb(hue, rng.uniform(0.55, 0.9), std::min(val, 0.95));
        seq.shapes.push_back(sh);
    }

    const std::size_t plane = static_cast<std::size_t>(size) * size;
    for (int t = 0; t < n_frames; ++t) {
        ColorImage img({3, size, size});
        for (int y = 0; y < size; ++y) {
            const double w = size > 1 ? double(y) / (size - 1) : 0.0;
            float row[3];
            for (int ch = 0; ch < 3; ++ch) {
                row[ch] = static_cast<float>((1.0 - w) * bg_top[static_cast<std::size_t>(ch)] +
                                             w * bg_bot[static_cast<std::size_t>(ch)]);
            }
            for (int x = 0; x < size; ++x) {
                const float* px = row;
                for (auto it = seq.shapes.rbegin(); it != seq.shapes.rend(); ++it) {
                    if (inside_shape(*it, t, x, y)) {
                        px = it->color.data();
                        break;
                    }
                }
                for (int ch = 0; ch < 3; ++ch) {
                    img.data[static_cast<std::size_t>(ch) * plane + static_cast<std::size_t>(y) * size + x] =
                        px[ch];
                }
            }
        }
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

std::vector<ImagePair> toy_dataset(std::uint64_t seed, int n_pairs, int size, const PairRecipe& recipe) {
    if (n_pairs < 1) throw std::invalid_argument("toy_dataset: n_pairs must be >= 1");
    if (size < 64 || size % 64 != 0) {
        throw std::invalid_argument("toy_dataset: size must be a positive multiple of 64");
    }
    std::vector<ImagePair> pairs;
    pairs.reserve(static_cast<std::size_t>(n_pairs));
    Rng root(seed);
    for (int i = 0; i < n_pairs; ++i) {
        Rng rng = root.fork(static_cast<std::uint64_t>(i));
        const int n_frames = std::max(recipe.frame_gap + 1, 1);
        ToySequence seq = render_toy_sequence(rng, size, n_frames);
        PairRecipe r = recipe;
        r.seed = seed;
        pairs.push_back(ccdc::make_pair(seq.frames, r));
    }
    return pairs;
}

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw IoError("manifest: cannot open " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        std::string dir, vr, vc;
        int scale = 0, gap = 0;
        if (!(ss >> dir >> scale >> gap >> vr >> vc)) {
            throw IoError("manifest: " + manifest_path + ":" + std::to_string(lineno) +
                          ": expected `sequence_dir scale frame_gap viewpoint_r viewpoint_c`");
        }
        ManifestEntry e;
        e.sequence_dir = (base / dir).string();
        e.recipe.scale = scale;
        e.recipe.frame_gap = gap;
        if (vr != "-" || vc != "-") {
            if (vr == "-" || vc == "-") {
                throw IoError("manifest: " + manifest_path + ":" + std::to_string(lineno) +
                              ": viewpoint must be two indices or `- -`");
            }
            try {
                e.recipe.viewpoint = {std::stoi(vr), std::stoi(vc)};
            } catch (const std::exception&) {
                throw IoError("manifest: " + manifest_path + ":" + std::to_string(lineno) +
                              ": bad viewpoint indices");
            }
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

ImagePair load_entry(const ManifestEntry& entry) {
    const fs::path dir(entry.sequence_dir);
    if (!fs::is_directory(dir)) throw IoError("dataset: missing sequence directory " + dir.string());

    if (entry.recipe.viewpoint) {
        const auto [r, c] = *entry.recipe.viewpoint;
        int rows = 0, cols = 0;
        while (fs::exists(dir / ("view_" + std::to_string(rows) + "_0.png"))) ++rows;
        while (fs::exists(dir / ("view_0_" + std::to_string(cols) + ".png"))) ++cols;
        if (rows == 0 || cols == 0) {
            throw IoError("dataset: no view_r_c.png grid in " + dir.string());
        }
        std::vector<std::vector<std::vector<ColorImage>>> grid;
        for (int rr = 0; rr < rows; ++rr) {
            grid.emplace_back();
            for (int cc = 0; cc < cols; ++cc) {
                const fs::path p = dir / ("view_" + std::to_string(rr) + "_" + std::to_string(cc) + ".png");
                if (!fs::exists(p)) throw IoError("dataset: missing view " + p.string());
                TensorF img = read_png(p.string());
                if (img.channels() == 1) {
                    TensorF rgb({3, img.height(), img.width()});
                    for (int ch = 0; ch < 3; ++ch) {
                        std::copy(img.data.begin(), img.data.end(),
                                  rgb.data.begin() + static_cast<std::ptrdiff_t>(ch) * img.numel());
                    }
                    img = std::move(rgb);
                }
                grid.back().push_back({std::move(img)});
            }
        }
        (void)r;
        (void)c;
        PairRecipe recipe = entry.recipe;
        recipe.frame_gap = 0;  // static grids carry no time axis
        return make_lightfield_pair(grid, recipe);
    }

    std::vector<ColorImage> frames;
    for (int i = 0;; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03d.png", i);
        const fs::path p = dir / name;
        if (!fs::exists(p)) break;
        TensorF img = read_png(p.string());
        if (img.channels() == 1) {
            TensorF rgb({3, img.height(), img.width()});
            for (int ch = 0; ch < 3; ++ch) {
                std::copy(img.data.begin(), img.data.end(),
                          rgb.data.begin() + static_cast<std::ptrdiff_t>(ch) * img.numel());
            }
            img = std::move(rgb);
        }
        frames.push_back(std::move(img));
    }
    if (frames.empty()) throw IoError("dataset: no frame_000.png in " + dir.string());
    return ccdc::make_pair(frames, entry.recipe);
}

DatasetStream::DatasetStream(const std::string& manifest_path, std::uint64_t shuffle_seed)
    : entries_(read_manifest(manifest_path)) {
    if (shuffle_seed != 0) {
        Rng rng(shuffle_seed);
        for (std::size_t i = entries_.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(i - 1)));
            std::swap(entries_[i - 1], entries_[j]);
        }
    }
}

ImagePair DatasetStream::next() {
    if (done()) throw std::out_of_range("DatasetStream: exhausted");
    return load_entry(entries_[pos_++]);
}

}  // namespace ccdc
