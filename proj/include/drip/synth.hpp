#pragma once

// Synthetic drip-chamber scenes with exact ground truth: single labeled
// frames for training and timed frame sequences with known detach instants.

#include <cstdint>
#include <string>
#include <vector>

#include "drip/common.hpp"
#include "drip/tensor.hpp"

namespace drip {

struct SceneSpec {
    int style = 0;                 // background family, taken mod 5
    float base_luminance = 0.45f;  // [0,1]
    float gain = 1.0f;             // illumination, [0.2,1.5]
    float dripper_x = 208.0f;      // nozzle center, pixels
    float dripper_y = 60.0f;
    float drop_radius = 16.0f;
    float noise_sigma = 0.02f;  // [0,0.1], additive per-pixel Gaussian
    std::uint32_t seed = 1;
    int frame_size = 416;

    void validate() const;  // ParamError on out-of-range fields
};

// Pure function of its arguments; the noise field is hashed from (seed,
// pixel), so equal specs render equal pixels. Illumination is linear: with
// noise_sigma 0, scaling gain scales every unclamped pixel by the same
// factor. s=0 draws a small bulge, s=1 a full ellipsoid with a highlight;
// phase in [0,1] grows the current shape.
Tensor4 render_frame(const SceneSpec& scene, float x, float y, int s, float phase);

// One-hot cell (i,j,k) of the S x S x 2 target, i from x, j from y.
struct GridLabel {
    int S = 0;
    int i = 0, j = 0, k = 0;

    // Flattened (i*S + j)*2 + k layout, matching OutputGrid.
    std::vector<float> dense() const;
};

GridLabel make_label(float x, float y, int s, int W, int S);

struct LabeledSample {
    Tensor4 frame{1, 1, 1, 3};
    float x = 0.0f, y = 0.0f;
    int s = 0;
};

// Bilinear rescale by zoom then crop back to the input size. Offsets are in
// scaled-image pixels; zoom < 1 pads by edge replication (offsets must be 0).
// The label moves by the nominal transform x' = x*zoom - crop_x; a transform
// that pushes the drop center out of frame is rejected.
LabeledSample augment(const LabeledSample& in, float zoom, int crop_x, int crop_y);

struct ManifestEntry {
    std::string file;
    float x = 0.0f, y = 0.0f;
    int s = 0;
    int W = 0, S = 0;
    std::uint32_t seed = 0;
};

struct DatasetSpec {
    int count = 15000;
    int frame_size = 416;  // W
    int grid_size = 26;    // S
    float class_balance = 0.5f;  // fraction labeled s=1
    int styles = 5;
    float zoom_lo = 0.9f, zoom_hi = 1.1f;
    std::uint32_t seed = 1;
};

// Renders frames into out_dir as PPM plus manifest.jsonl. Final drop
// positions are drawn uniformly over the W x W surface first and the
// zoom/crop transform is solved backwards from them, so the position
// histogram is exactly uniform by construction. Deterministic per seed.
std::vector<ManifestEntry> build_dataset(const DatasetSpec& spec, const std::string& out_dir);

std::vector<ManifestEntry> load_manifest(const std::string& dir);
Tensor4 load_frame(const std::string& dir, const ManifestEntry& e);

struct PeriodSegment {
    double t_start = 0.0;  // period applies to cycles starting at or after this
    double period = 2.0;
};

struct DripStreamSpec {
    double duration = 60.0;  // frames cover [0, duration] inclusive
    double fps = 30.0;
    std::vector<PeriodSegment> periods{{0.0, 2.0}};
    double forming_fraction = 0.5;  // leading fraction of each cycle in state 0
    SceneSpec scene;

    void validate() const;
};

struct StreamTruth {
    std::vector<double> t;  // frame timestamps i/fps
    std::vector<int> state;
    std::vector<double> detach_t;  // exact cycle-boundary instants
};

// Ground truth only, no rendering. Each cycle spends forming_fraction of its
// period in state 0 then flips to 1; the boundary into the next cycle is a
// detach. Cycle k reads its period from the last segment starting at or
// before the cycle start.
StreamTruth stream_truth(const DripStreamSpec& spec);

Tensor4 stream_frame(const DripStreamSpec& spec, int frame_index);

// Renders every frame into out_dir (frame_NNNNNN.ppm) and writes truth.jsonl
// plus detach.jsonl. Returns the same truth it wrote.
StreamTruth gen_stream(const DripStreamSpec& spec, const std::string& out_dir);

}  // namespace drip
