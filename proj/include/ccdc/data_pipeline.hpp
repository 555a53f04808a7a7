#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ccdc/image.hpp"
#include "ccdc/rng.hpp"
#include "ccdc/tensor.hpp"

namespace ccdc {

struct PairRecipe {
    int scale = 1;      // spatial gap between target and reference cameras
    int frame_gap = 0;  // temporal offset of the target frame
    std::optional<std::pair<int, int>> viewpoint;
    std::uint64_t seed = 0;
};

/// One training/eval sample: HR gray target, LR color reference, HR color
/// ground truth. target == luminance(ground_truth) exactly.
struct ImagePair {
    GrayImage target;
    ColorImage reference;
    ColorImage ground_truth;
    PairRecipe recipe;
};

void check_pair(const ImagePair& pair);

/// Video pair synthesis: reference = bicubic downsample of frames[0] by
/// 1/scale, ground truth = frames[frame_gap], target = its luminance.
ImagePair make_pair(const std::vector<ColorImage>& frames, const PairRecipe& recipe);

/// Light-field pair synthesis. `grid[r][c]` is a view's frame sequence
/// (static grids use single-frame sequences). Reference comes from view
/// (0,0) at time 0; target/ground truth from recipe.viewpoint at
/// recipe.frame_gap.
ImagePair make_lightfield_pair(const std::vector<std::vector<std::vector<ColorImage>>>& grid,
                               const PairRecipe& recipe);

// ---------------------------------------------------------------------------
// Procedural toy data
// ---------------------------------------------------------------------------

struct ToyShape {
    enum Kind { kRect, kCircle, kRotRect };
    Kind kind = kRect;
    double cx = 0, cy = 0;   // center at frame 0
    double hw = 0, hh = 0;   // half extents (hw = radius for circles)
    int vx = 0, vy = 0;      // integer velocity, pixels per frame
    double angle0 = 0, omega = 0;
    std::array<float, 3> color{};
};

/// A rendered sequence plus the scripted motion that produced it. Shapes are
/// listed in draw order; the last one is topmost and translates by exactly
/// (vx, vy) integer pixels per frame with no rotation.
struct ToySequence {
    std::vector<ColorImage> frames;
    std::vector<ToyShape> shapes;
};

ToySequence render_toy_sequence(Rng& rng, int size, int n_frames);

/// Deterministic procedural dataset; pair i uses an rng forked from
/// (seed, i), so datasets with the same seed are bit-identical.
std::vector<ImagePair> toy_dataset(std::uint64_t seed, int n_pairs, int size, const PairRecipe& recipe);

// ---------------------------------------------------------------------------
// Manifest-driven loading
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string sequence_dir;  // resolved against the manifest's directory
    PairRecipe recipe;
};

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path);

/// Lazy pair stream over a manifest. Iteration order is a pure function of
/// (manifest, seed): seed 0 keeps file order, otherwise a deterministic
/// shuffle is applied up front.
class DatasetStream {
public:
    DatasetStream(const std::string& manifest_path, std::uint64_t shuffle_seed = 0);

    std::size_t size() const { return entries_.size(); }
    bool done() const { return pos_ >= entries_.size(); }
    void reset() { pos_ = 0; }

    /// Loads and returns the next pair; throws IoError naming the missing
    /// path on failure.
    ImagePair next();

private:
    std::vector<ManifestEntry> entries_;
    std::size_t pos_ = 0;
};

/// Loads one manifest entry from disk (video or light-field layout).
ImagePair load_entry(const ManifestEntry& entry);

}  // namespace ccdc
