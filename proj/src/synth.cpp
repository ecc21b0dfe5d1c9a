#include "drip/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "drip/image.hpp"

namespace drip {

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Hash-based unit Gaussian so noise is a pure function of (seed, pixel).
float pixel_gauss(std::uint32_t seed, int px, int py, int c) {
    const std::uint64_t h1 =
        mix64((std::uint64_t(seed) << 32) ^ (std::uint64_t(std::uint32_t(px)) << 16) ^
              (std::uint64_t(std::uint32_t(py)) << 2) ^ std::uint64_t(c));
    const std::uint64_t h2 = mix64(h1);
    const double u1 = (double((h1 >> 11) + 1)) * 0x1.0p-53;  // (0,1]
    const double u2 = double(h2 >> 11) * 0x1.0p-53;
    return float(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2));
}

float background_lum(const SceneSpec& sc, int px, int py) {
    const float L = sc.base_luminance;
    const int W = sc.frame_size;
    float b = L;
    switch (((sc.style % 5) + 5) % 5) {
        case 0: break;
        case 1: b = L * (0.70f + 0.60f * float(py) / float(W - 1)); break;
        case 2: b = L * (0.70f + 0.60f * float(px) / float(W - 1)); break;
        case 3: {
            const float cx = 0.5f * float(W - 1), cy = 0.5f * float(W - 1);
            const float d = std::hypot(px - cx, py - cy) / (0.5f * float(W));
            b = L * (1.15f - 0.45f * d);
            break;
        }
        case 4: {
            // fixed low-frequency blotches, phases from the scene seed
            const std::uint64_t h = mix64(sc.seed);
            const float phx = float(h & 0xffff) * (6.2832f / 65536.0f);
            const float phy = float((h >> 16) & 0xffff) * (6.2832f / 65536.0f);
            const float ax = 0.02f + 0.03f * float((h >> 32) & 0xff) / 255.0f;
            const float ay = 0.02f + 0.03f * float((h >> 40) & 0xff) / 255.0f;
            b = L * (0.85f + 0.30f * std::sin(ax * px + phx) * std::sin(ay * py + phy));
            break;
        }
    }
    return std::clamp(b, 0.0f, 0.68f);
}

}  // namespace

void SceneSpec::validate() const {
    if (frame_size < 8) throw ParamError("scene: frame_size too small");
    if (!(base_luminance >= 0.0f && base_luminance <= 1.0f))
        throw ParamError("scene: base_luminance outside [0,1]");
    if (!(gain >= 0.2f && gain <= 1.5f)) throw ParamError("scene: gain outside [0.2,1.5]");
    if (!(noise_sigma >= 0.0f && noise_sigma <= 0.1f))
        throw ParamError("scene: noise_sigma outside [0,0.1]");
    if (!(drop_radius > 0.0f)) throw ParamError("scene: drop_radius must be positive");
    const float r = drop_radius;
    if (dripper_x < r || dripper_x > frame_size - 1 - r || dripper_y < r ||
        dripper_y > frame_size - 1 - r)
        throw ParamError("scene: dripper position must sit inside the frame by drop_radius");
}

Tensor4 render_frame(const SceneSpec& scene, float x, float y, int s, float phase) {
    scene.validate();
    const int W = scene.frame_size;
    if (!(x >= 0.0f && x < W && y >= 0.0f && y < W))
        throw ParamError("render_frame: drop position outside the frame");
    if (s != 0 && s != 1) throw ParamError("render_frame: state must be 0 or 1");
    phase = std::clamp(phase, 0.0f, 1.0f);

    // drop semi-axes; the well-formed drop is much larger and taller
    const float r = scene.drop_radius;
    const float a = s == 0 ? r * (0.45f + 0.30f * phase) : r * (0.85f + 0.30f * phase);
    const float b = s == 0 ? 0.70f * a : 1.25f * a;
    const float hx = x - 0.35f * a, hy = y - 0.35f * b, hr = 0.30f * a;

    const float nozzle_w = 0.45f * scene.drop_radius;

    Tensor4 out(1, W, W, 3);
    for (int py = 0; py < W; ++py) {
        for (int px = 0; px < W; ++px) {
            const float lum = background_lum(scene, px, py);
            float rgb[3] = {lum * 0.97f, lum, lum * 1.05f};

            // nozzle stub: darkened band from the top edge down to the tip
            const float covx =
                std::clamp(nozzle_w + 0.5f - std::abs(px - scene.dripper_x), 0.0f, 1.0f);
            const float covy = std::clamp(scene.dripper_y + 0.5f - py, 0.0f, 1.0f);
            const float nz = covx * covy;
            if (nz > 0.0f)
                for (float& v : rgb) v *= 1.0f - 0.62f * nz;

            const float ex = (px - x) / a, ey = (py - y) / b;
            const float e = ex * ex + ey * ey;
            if (e < 1.44f) {
                const float dist = (std::sqrt(e) - 1.0f) * std::min(a, b);
                const float cov = std::clamp(0.5f - dist, 0.0f, 1.0f);
                if (cov > 0.0f) {
                    float v = 0.80f;
                    // dark rim, and a specular highlight only on state 1
                    const float rimt = std::clamp((std::sqrt(e) - 0.72f) / 0.28f, 0.0f, 1.0f);
                    v *= 1.0f - 0.30f * rimt;
                    if (s == 1) {
                        const float dh = ((px - hx) * (px - hx) + (py - hy) * (py - hy)) / (hr * hr);
                        v += 0.18f * std::exp(-dh);
                    }
                    const float drop[3] = {v * 1.02f, v, v * 0.95f};
                    for (int c = 0; c < 3; ++c) rgb[c] += cov * (drop[c] - rgb[c]);
                }
            }

            for (int c = 0; c < 3; ++c) {
                float v = scene.gain * rgb[c];
                if (scene.noise_sigma > 0.0f)
                    v += scene.noise_sigma * pixel_gauss(scene.seed, px, py, c);
                out.at(0, py, px, c) = std::clamp(v, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

std::vector<float> GridLabel::dense() const {
    std::vector<float> v(static_cast<std::size_t>(S) * S * 2, 0.0f);
    v[(static_cast<std::size_t>(i) * S + j) * 2 + k] = 1.0f;
    return v;
}

GridLabel make_label(float x, float y, int s, int W, int S) {
    if (W < 1 || S < 1 || W % S != 0) throw ParamError("make_label: S must divide W");
    if (!(x >= 0.0f && x < W && y >= 0.0f && y < W))
        throw ParamError("make_label: position outside [0,W)");
    if (s != 0 && s != 1) throw ParamError("make_label: state must be 0 or 1");
    GridLabel g;
    g.S = S;
    g.i = int(std::floor(double(x) * S / W));
    g.j = int(std::floor(double(y) * S / W));
    g.k = s;
    return g;
}

LabeledSample augment(const LabeledSample& in, float zoom, int crop_x, int crop_y) {
    if (!(zoom >= 0.9f && zoom <= 1.1f)) throw ParamError("augment: zoom outside [0.9,1.1]");
    const int W = in.frame.w;
    if (in.frame.n != 1 || in.frame.h != W || in.frame.c != 3)
        throw ParamError("augment: frame must be (1,W,W,3)");

    const int Ws = int(std::lround(double(W) * zoom));
    float ox, oy;  // output-frame drop position
    Tensor4 outf(1, W, W, 3);
    if (Ws >= W) {
        if (crop_x < 0 || crop_y < 0 || crop_x > Ws - W || crop_y > Ws - W)
            throw ParamError("augment: crop offset outside the scaled frame");
        const Tensor4 scaled = Ws == W ? in.frame : resize_bilinear(in.frame, Ws, Ws);
        for (int py = 0; py < W; ++py)
            for (int px = 0; px < W; ++px)
                for (int c = 0; c < 3; ++c)
                    outf.at(0, py, px, c) = scaled.at(0, py + crop_y, px + crop_x, c);
        ox = in.x * zoom - float(crop_x);
        oy = in.y * zoom - float(crop_y);
    } else {
        if (crop_x != 0 || crop_y != 0)
            throw ParamError("augment: zoom < 1 admits no crop offset");
        const Tensor4 scaled = resize_bilinear(in.frame, Ws, Ws);
        const int pad = (W - Ws) / 2;
        for (int py = 0; py < W; ++py) {
            const int sy = std::clamp(py - pad, 0, Ws - 1);
            for (int px = 0; px < W; ++px) {
                const int sx = std::clamp(px - pad, 0, Ws - 1);
                for (int c = 0; c < 3; ++c) outf.at(0, py, px, c) = scaled.at(0, sy, sx, c);
            }
        }
        ox = in.x * zoom + float(pad);
        oy = in.y * zoom + float(pad);
    }
    if (!(ox >= 0.0f && ox < W && oy >= 0.0f && oy < W))
        throw ParamError("augment: crop evicts the drop");
    return {std::move(outf), ox, oy, in.s};
}

namespace {

// s=1 share of the first n samples differs from balance by < 1 sample
int class_of(int n, float balance) {
    return int(std::floor((n + 1) * double(balance)) - std::floor(n * double(balance)));
}

std::string frame_name(int n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d.ppm", n);
    return buf;
}

}  // namespace

std::vector<ManifestEntry> build_dataset(const DatasetSpec& spec, const std::string& out_dir) {
    if (spec.count < 2) throw ParamError("build_dataset: count must be at least 2");
    if (spec.frame_size < 8 || spec.grid_size < 1 || spec.frame_size % spec.grid_size != 0)
        throw ParamError("build_dataset: grid must divide the frame size");
    if (!(spec.class_balance >= 0.0f && spec.class_balance <= 1.0f))
        throw ParamError("build_dataset: class_balance outside [0,1]");
    if (!(spec.zoom_lo >= 0.9f && spec.zoom_hi <= 1.1f && spec.zoom_lo <= spec.zoom_hi))
        throw ParamError("build_dataset: zoom range outside [0.9,1.1]");
    if (spec.styles < 1) throw ParamError("build_dataset: styles must be positive");

    const int W = spec.frame_size;
    const float r_lo = 0.04f * W, r_hi = 0.08f * W;
    // canvas large enough that any final position is reachable with the drop
    // fully rendered, even at minimum zoom
    const int R = int(std::ceil(W / spec.zoom_lo + 1.6 * r_hi + 2));

    std::filesystem::create_directories(out_dir);
    std::ofstream mf(out_dir + "/manifest.jsonl");
    if (!mf) throw IoError("cannot write manifest in " + out_dir);

    std::vector<ManifestEntry> entries;
    entries.reserve(spec.count);
    for (int n = 0; n < spec.count; ++n) {
        const auto sample_seed =
            std::uint32_t(mix64((std::uint64_t(spec.seed) << 32) ^ std::uint64_t(n)) >> 16);
        Rng rng(sample_seed);
        const int s = class_of(n, spec.class_balance);
        const int xf = std::uniform_int_distribution<int>(0, W - 1)(rng);
        const int yf = std::uniform_int_distribution<int>(0, W - 1)(rng);
        const float z = std::uniform_real_distribution<float>(spec.zoom_lo, spec.zoom_hi)(rng);

        SceneSpec sc;
        sc.style = std::uniform_int_distribution<int>(0, spec.styles - 1)(rng);
        sc.base_luminance = std::uniform_real_distribution<float>(0.30f, 0.60f)(rng);
        sc.gain = std::uniform_real_distribution<float>(0.50f, 1.30f)(rng);
        sc.noise_sigma = std::uniform_real_distribution<float>(0.0f, 0.05f)(rng);
        sc.drop_radius = std::uniform_real_distribution<float>(r_lo, r_hi)(rng);
        sc.seed = sample_seed;
        sc.frame_size = R;
        const float phase = std::uniform_real_distribution<float>(0.15f, 0.90f)(rng);

        const int Rs = int(std::lround(double(R) * z));
        const double m = 1.6 * sc.drop_radius;
        // crop offsets restricted so the source position keeps the drop
        // inside the canvas; nonempty for any xf by the canvas-size choice
        auto band = [&](int f) {
            const int lo = std::max(0, int(std::ceil(z * m - f)));
            const int hi = std::min(Rs - W, int(std::floor(z * (R - 1 - m) - f)));
            if (lo > hi) throw ParamError("build_dataset: internal crop band empty");
            return std::uniform_int_distribution<int>(lo, hi)(rng);
        };
        const int cx = band(xf);
        const int cy = band(yf);
        // exact inverse of the resize-then-crop pixel mapping
        const double xs = (xf + cx + 0.5) * double(R) / Rs - 0.5;
        const double ys = (yf + cy + 0.5) * double(R) / Rs - 0.5;
        sc.dripper_x = std::clamp(float(xs), sc.drop_radius, R - 1 - sc.drop_radius);
        sc.dripper_y =
            std::clamp(float(ys) - 2.1f * sc.drop_radius, sc.drop_radius, R - 1 - sc.drop_radius);

        const Tensor4 canvas = render_frame(sc, float(xs), float(ys), s, phase);
        const Tensor4 scaled = resize_bilinear(canvas, Rs, Rs);
        Tensor4 frame(1, W, W, 3);
        for (int py = 0; py < W; ++py)
            for (int px = 0; px < W; ++px)
                for (int c = 0; c < 3; ++c)
                    frame.at(0, py, px, c) = scaled.at(0, py + cy, px + cx, c);

        ManifestEntry e{frame_name(n), float(xf), float(yf), s, W, spec.grid_size, sample_seed};
        write_ppm(quantize_frame(frame), out_dir + "/" + e.file);
        nlohmann::json j{{"file", e.file}, {"x", e.x},        {"y", e.y}, {"s", e.s},
                         {"W", e.W},       {"S", e.S},        {"seed", e.seed}};
        mf << j.dump() << "\n";
        entries.push_back(std::move(e));
    }
    if (!mf) throw IoError("short write on manifest in " + out_dir);
    return entries;
}

std::vector<ManifestEntry> load_manifest(const std::string& dir) {
    std::ifstream f(dir + "/manifest.jsonl");
    if (!f) throw IoError("cannot open manifest in " + dir);
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("bad manifest line: ") + e.what());
        }
        entries.push_back({j.at("file").get<std::string>(), j.at("x").get<float>(),
                           j.at("y").get<float>(), j.at("s").get<int>(), j.at("W").get<int>(),
                           j.at("S").get<int>(), j.at("seed").get<std::uint32_t>()});
    }
    return entries;
}

Tensor4 load_frame(const std::string& dir, const ManifestEntry& e) {
    return frame_from_bytes(read_ppm(dir + "/" + e.file));
}

void DripStreamSpec::validate() const {
    scene.validate();
    if (!(fps > 0.0)) throw ParamError("stream: fps must be positive");
    if (!(duration >= 0.0)) throw ParamError("stream: duration must be nonnegative");
    if (periods.empty()) throw ParamError("stream: need at least one period segment");
    if (periods.front().t_start > 0.0)
        throw ParamError("stream: first period segment must start at 0");
    for (std::size_t i = 0; i < periods.size(); ++i) {
        if (!(periods[i].period > 2.0 / fps))
            throw ParamError("stream: period must exceed two frame times");
        if (i > 0 && periods[i].t_start <= periods[i - 1].t_start)
            throw ParamError("stream: period segments must be strictly ordered");
    }
    if (!(forming_fraction > 0.0 && forming_fraction < 1.0))
        throw ParamError("stream: forming_fraction must be inside (0,1)");
}

namespace {

double period_at(const DripStreamSpec& spec, double t) {
    double p = spec.periods.front().period;
    for (const auto& seg : spec.periods)
        if (seg.t_start <= t) p = seg.period;
    return p;
}

struct CyclePos {
    double u;       // fraction of the current cycle, [0,1)
    double period;  // that cycle's period
};

// Cycle boundaries are accumulated from 0, each cycle reading the schedule
// at its own start; a period change takes effect at the next boundary.
CyclePos cycle_at(const DripStreamSpec& spec, double t) {
    double start = 0.0;
    double p = period_at(spec, 0.0);
    while (start + p <= t + 1e-12) {
        start += p;
        p = period_at(spec, start);
    }
    return {std::clamp((t - start) / p, 0.0, 1.0), p};
}

}  // namespace

StreamTruth stream_truth(const DripStreamSpec& spec) {
    spec.validate();
    StreamTruth tr;
    const int frames = int(std::floor(spec.duration * spec.fps)) + 1;
    tr.t.reserve(frames);
    tr.state.reserve(frames);
    for (int i = 0; i < frames; ++i) {
        const double t = i / spec.fps;
        tr.t.push_back(t);
        tr.state.push_back(cycle_at(spec, t).u < spec.forming_fraction ? 0 : 1);
    }
    double boundary = period_at(spec, 0.0);
    while (boundary <= spec.duration + 1e-9) {
        tr.detach_t.push_back(boundary);
        boundary += period_at(spec, boundary);
    }
    return tr;
}

Tensor4 stream_frame(const DripStreamSpec& spec, int frame_index) {
    spec.validate();
    if (frame_index < 0) throw ParamError("stream_frame: negative frame index");
    const double t = frame_index / spec.fps;
    const CyclePos cp = cycle_at(spec, t);
    const double f = spec.forming_fraction;
    const int s = cp.u < f ? 0 : 1;
    const float phase = float(s == 0 ? cp.u / f : (cp.u - f) / (1.0 - f));
    // the drop hangs from the nozzle, sagging a little as it fills
    const float r = spec.scene.drop_radius;
    const float x = spec.scene.dripper_x;
    const float y = s == 0 ? spec.scene.dripper_y + 0.5f * r
                           : spec.scene.dripper_y + r * (0.9f + 0.5f * phase);
    return render_frame(spec.scene, x, y, s, phase);
}

StreamTruth gen_stream(const DripStreamSpec& spec, const std::string& out_dir) {
    const StreamTruth tr = stream_truth(spec);
    std::filesystem::create_directories(out_dir);
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "frame_%06zu.ppm", i);
        write_ppm(quantize_frame(stream_frame(spec, int(i))), out_dir + "/" + buf);
    }
    std::ofstream truth(out_dir + "/truth.jsonl");
    for (std::size_t i = 0; i < tr.t.size(); ++i)
        truth << nlohmann::json{{"frame_index", i}, {"t_seconds", tr.t[i]}, {"state", tr.state[i]}}
                     .dump()
              << "\n";
    std::ofstream det(out_dir + "/detach.jsonl");
    for (double t : tr.detach_t) det << nlohmann::json{{"t_seconds", t}}.dump() << "\n";
    if (!truth || !det) throw IoError("short write of stream ground truth in " + out_dir);
    return tr;
}

}  // namespace drip
