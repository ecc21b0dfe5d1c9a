#include "drip/streamd.hpp"

#include <fcntl.h>
#include <sys/select.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "drip/binio.hpp"

namespace drip {

namespace {

double wall_now() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

Tensor4 preprocess(const ImageU8& raw, int W) {
    if (raw.h < 1 || raw.w < 1) throw ShapeError("preprocess: empty frame");
    if (W < 8) throw ParamError("preprocess: target size too small");
    const ImageU8 square = raw.h == raw.w ? raw : center_crop_square(raw);
    if (square.h == W) return frame_from_bytes(square);
    return frame_from_bytes(resize_bilinear(square, W, W));
}

PpmDirSource::PpmDirSource(std::string id, const std::string& dir, double fps)
    : id_(std::move(id)), fps_(fps) {
    if (!(fps > 0.0)) throw ParamError("stream " + id_ + ": fps must be positive");
    std::error_code ec;
    std::filesystem::directory_iterator it(dir, ec);
    if (ec) throw IoError("stream " + id_ + ": cannot list " + dir + ": " + ec.message());
    for (const auto& e : it)
        if (e.path().extension() == ".ppm") files_.push_back(e.path().string());
    std::sort(files_.begin(), files_.end());
}

std::optional<SourcedFrame> PpmDirSource::next_frame(double) {
    if (!alive()) return std::nullopt;
    SourcedFrame fr;
    fr.img = read_ppm(files_[next_]);
    fr.index = std::int64_t(next_);
    fr.t = double(next_) / fps_;
    ++next_;
    return fr;
}

namespace {
constexpr char kDrpvMagic[4] = {'D', 'R', 'P', 'V'};
constexpr std::uint32_t kDrpvVersion = 1;
constexpr std::streamoff kDrpvCountOffset = 24;
constexpr std::streamoff kDrpvHeaderSize = 32;
}  // namespace

struct DrpvWriter::Impl {
    std::ofstream f;
    std::string path;
    int w = 0, h = 0;
    std::uint64_t count = 0;
    bool done = false;
};

DrpvWriter::DrpvWriter(const std::string& path, int width, int height, int fps_num, int fps_den)
    : impl_(std::make_unique<Impl>()) {
    if (width < 1 || height < 1) throw ParamError("drpv: frame geometry must be positive");
    if (fps_num < 1 || fps_den < 1) throw ParamError("drpv: fps ratio must be positive");
    impl_->path = path;
    impl_->w = width;
    impl_->h = height;
    impl_->f.open(path, std::ios::binary);
    if (!impl_->f) throw IoError("cannot open for write: " + path);
    impl_->f.write(kDrpvMagic, 4);
    binio::put_u32(impl_->f, kDrpvVersion);
    binio::put_u32(impl_->f, std::uint32_t(width));
    binio::put_u32(impl_->f, std::uint32_t(height));
    binio::put_u32(impl_->f, std::uint32_t(fps_num));
    binio::put_u32(impl_->f, std::uint32_t(fps_den));
    binio::put_u64(impl_->f, 0);  // frame count, patched by finish()
}

DrpvWriter::~DrpvWriter() {
    try {
        finish();
    } catch (...) {
    }
}

void DrpvWriter::add(const ImageU8& frame) {
    if (impl_->done) throw ParamError("drpv: add after finish");
    if (frame.w != impl_->w || frame.h != impl_->h)
        throw ShapeError("drpv: frame geometry differs from the header");
    binio::put_bytes(impl_->f, frame.rgb.data(), frame.rgb.size());
    ++impl_->count;
}

void DrpvWriter::finish() {
    if (impl_->done) return;
    impl_->done = true;
    impl_->f.seekp(kDrpvCountOffset);
    binio::put_u64(impl_->f, impl_->count);
    impl_->f.close();
    if (!impl_->f) throw IoError("short write: " + impl_->path);
}

std::vector<ImageU8> read_drpv(const std::string& path, int* fps_num, int* fps_den) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[4] = {};
    binio::get_bytes(f, magic, 4);
    if (std::memcmp(magic, kDrpvMagic, 4) != 0) throw FormatError("bad magic: " + path);
    if (binio::get_u32(f) != kDrpvVersion) throw FormatError("unsupported version: " + path);
    const auto w = int(binio::get_u32(f));
    const auto h = int(binio::get_u32(f));
    const auto num = int(binio::get_u32(f));
    const auto den = int(binio::get_u32(f));
    const std::uint64_t count = binio::get_u64(f);
    if (w < 1 || h < 1 || num < 1 || den < 1) throw FormatError("bad geometry header: " + path);

    f.seekg(0, std::ios::end);
    const auto size = std::uint64_t(f.tellg());
    if (size != kDrpvHeaderSize + count * std::uint64_t(w) * h * 3)
        throw FormatError("declared frame count disagrees with the payload size: " + path);
    f.seekg(kDrpvHeaderSize);

    if (fps_num) *fps_num = num;
    if (fps_den) *fps_den = den;
    std::vector<ImageU8> frames;
    frames.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        ImageU8 img(h, w);
        binio::get_bytes(f, img.rgb.data(), img.rgb.size());
        frames.push_back(std::move(img));
    }
    return frames;
}

struct DrpvFileSource::Impl {
    std::ifstream f;
    std::string path;
    int w = 0, h = 0, num = 1, den = 1;
    std::uint64_t count = 0, next = 0;
};

DrpvFileSource::DrpvFileSource(std::string id, const std::string& path)
    : impl_(std::make_shared<Impl>()), id_(std::move(id)) {
    auto& im = *impl_;
    im.path = path;
    im.f.open(path, std::ios::binary);
    if (!im.f) throw IoError("stream " + id_ + ": cannot open " + path);
    char magic[4] = {};
    binio::get_bytes(im.f, magic, 4);
    if (std::memcmp(magic, kDrpvMagic, 4) != 0)
        throw FormatError("stream " + id_ + ": bad magic in " + path);
    if (binio::get_u32(im.f) != kDrpvVersion)
        throw FormatError("stream " + id_ + ": unsupported version in " + path);
    im.w = int(binio::get_u32(im.f));
    im.h = int(binio::get_u32(im.f));
    im.num = int(binio::get_u32(im.f));
    im.den = int(binio::get_u32(im.f));
    im.count = binio::get_u64(im.f);
    if (im.w < 1 || im.h < 1 || im.num < 1 || im.den < 1)
        throw FormatError("stream " + id_ + ": bad geometry header in " + path);
    im.f.seekg(0, std::ios::end);
    if (std::uint64_t(im.f.tellg()) !=
        kDrpvHeaderSize + im.count * std::uint64_t(im.w) * im.h * 3)
        throw FormatError("stream " + id_ + ": frame count disagrees with payload in " + path);
    im.f.seekg(kDrpvHeaderSize);
    fps_ = double(im.num) / double(im.den);
}

bool DrpvFileSource::alive() const { return alive_ && impl_->next < impl_->count; }

std::optional<SourcedFrame> DrpvFileSource::next_frame(double) {
    if (!alive()) return std::nullopt;
    auto& im = *impl_;
    SourcedFrame fr;
    fr.img = ImageU8(im.h, im.w);
    binio::get_bytes(im.f, fr.img.rgb.data(), fr.img.rgb.size());
    fr.index = std::int64_t(im.next);
    fr.t = double(im.next) * im.den / im.num;
    ++im.next;
    return fr;
}

PipeSource::PipeSource(std::string id, const std::string& path, int width, int height, double fps)
    : id_(std::move(id)), w_(width), h_(height), fps_(fps) {
    if (width < 1 || height < 1) throw ParamError("stream " + id_ + ": bad pipe geometry");
    if (!(fps > 0.0)) throw ParamError("stream " + id_ + ": fps must be positive");
    if (path == "-") {
        fd_ = STDIN_FILENO;
    } else {
        fd_ = ::open(path.c_str(), O_RDONLY | O_NONBLOCK);
        if (fd_ < 0)
            throw IoError("stream " + id_ + ": cannot open " + path + ": " +
                          std::strerror(errno));
        owns_fd_ = true;
    }
}

PipeSource::~PipeSource() {
    if (owns_fd_ && fd_ >= 0) ::close(fd_);
}

std::optional<SourcedFrame> PipeSource::next_frame(double timeout_s) {
    if (!alive_) return std::nullopt;
    const std::size_t need = std::size_t(w_) * h_ * 3;
    const double deadline = wall_now() + std::max(0.0, timeout_s);
    while (pending_.size() < need) {
        const double left = deadline - wall_now();
        if (left <= 0.0) return std::nullopt;  // stall; partial data kept

        fd_set rd;
        FD_ZERO(&rd);
        FD_SET(fd_, &rd);
        timeval tv;
        tv.tv_sec = long(left);
        tv.tv_usec = long((left - double(tv.tv_sec)) * 1e6);
        const int sel = ::select(fd_ + 1, &rd, nullptr, nullptr, &tv);
        if (sel < 0) {
            if (errno == EINTR) continue;
            throw IoError("stream " + id_ + ": select failed: " + std::strerror(errno));
        }
        if (sel == 0) continue;

        std::uint8_t buf[65536];
        const ssize_t n = ::read(fd_, buf, std::min(sizeof buf, need - pending_.size()));
        if (n == 0) {
            alive_ = false;
            if (!pending_.empty())
                throw FormatError("stream " + id_ + ": pipe closed mid-frame");
            return std::nullopt;
        }
        if (n < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
            throw IoError("stream " + id_ + ": read failed: " + std::strerror(errno));
        }
        pending_.insert(pending_.end(), buf, buf + n);
    }

    SourcedFrame fr;
    fr.img = ImageU8(h_, w_);
    std::copy(pending_.begin(), pending_.end(), fr.img.rgb.begin());
    pending_.clear();
    fr.index = next_index_++;
    fr.t = wall_now();
    return fr;
}

StreamBatch collect_batch(std::vector<std::unique_ptr<StreamSource>>& sources, int n_f,
                          double timeout_s, int W) {
    if (n_f < 1) throw ParamError("collect_batch: n_f must be at least 1");
    std::vector<Tensor4> tens;
    StreamBatch batch;
    for (auto& src : sources) {
        if (!src->alive()) continue;
        for (int k = 0; k < n_f; ++k) {
            try {
                auto fr = src->next_frame(timeout_s);
                if (!fr) break;  // stalled or exhausted; partial group stands
                tens.push_back(preprocess(fr->img, W));
                batch.provenance.push_back({src->id(), fr->index, fr->t});
            } catch (const std::exception& e) {
                std::cerr << "warning: stream " << src->id() << " dropped: " << e.what() << "\n";
                src->kill();
                break;
            }
        }
    }
    if (!tens.empty()) {
        batch.frames = Tensor4(int(tens.size()), W, W, 3);
        const std::size_t stride = std::size_t(W) * W * 3;
        for (std::size_t s = 0; s < tens.size(); ++s)
            std::copy(tens[s].v.begin(), tens[s].v.end(), batch.frames.v.begin() + s * stride);
    }
    return batch;
}

void infer_and_route(DropNet& net, const StreamBatch& batch,
                     std::map<std::string, StreamChain>& chains, const CounterConfig& ccfg,
                     std::vector<EventRecord>& events, std::vector<FlowRecord>& flows) {
    if (batch.empty()) return;
    if (batch.frames.n != batch.batch_n())
        throw ShapeError("infer_and_route: tensor rows disagree with provenance");
    for (const auto& pv : batch.provenance)
        if (!chains.count(pv.stream_id))
            throw ParamError("infer_and_route: unknown stream '" + pv.stream_id + "'");

    const std::vector<OutputGrid> grids = net.forward(batch.frames);
    for (int s = 0; s < batch.batch_n(); ++s) {
        const Provenance& pv = batch.provenance[s];
        StreamChain& ch = chains.at(pv.stream_id);
        if (pv.frame_index <= ch.last_index)
            throw ParamError("infer_and_route: frame order violated on stream '" + pv.stream_id +
                             "'");
        ch.last_index = pv.frame_index;
        ++ch.frames;

        const DropObservation obs = extract_observation(grids[s], pv.t, ccfg.tau);
        if (const auto ev = update_counter(ch.counter, obs, ccfg.debounce_m)) {
            events.push_back({pv.stream_id, ev->t, "detach", ev->drop_count, ev->cell_i,
                              ev->cell_j});
            if (const auto q = flow_rate(ch.counter.detach_times, ccfg.window_n)) {
                flows.push_back({pv.stream_id, q->t, q->q_gtt_min, q->window_n});
                ch.last_q = q->q_gtt_min;
            }
        }
        if (obs.detected) {
            const auto alarm = check_framing(obs, grids[s].S, ccfg.margin_cells);
            if (alarm && !ch.in_margin_band) {
                events.push_back({pv.stream_id, obs.t, "alarm", ch.counter.drop_count, obs.cell_i,
                                  obs.cell_j});
                ++ch.alarms;
            }
            ch.in_margin_band = alarm.has_value();
        }
    }
}

namespace {

struct SourceSpec {
    std::string id, transport, path;
    double fps = 30.0;
    int width = 0, height = 0;
};

struct PipelineConfig {
    std::string weights;
    std::optional<nlohmann::json> net_override;
    std::vector<SourceSpec> streams;
    CounterConfig counter;
    int n_f = 1;
    double timeout_s = 0.5;
    std::string out_dir = "out";
};

PipelineConfig parse_pipeline_config(const nlohmann::json& j) {
    PipelineConfig cfg;
    try {
        cfg.weights = j.at("model").at("weights").get<std::string>();
        if (j.at("model").contains("net")) cfg.net_override = j.at("model").at("net");
        for (const auto& s : j.at("streams")) {
            SourceSpec spec;
            spec.id = s.at("id").get<std::string>();
            spec.transport = s.at("transport").get<std::string>();
            spec.path = s.at("path").get<std::string>();
            spec.fps = s.value("fps", 30.0);
            spec.width = s.value("width", 0);
            spec.height = s.value("height", 0);
            cfg.streams.push_back(std::move(spec));
        }
        if (j.contains("counter")) {
            const auto& c = j.at("counter");
            cfg.counter.tau = c.value("tau", cfg.counter.tau);
            cfg.counter.debounce_m = c.value("debounce_m", cfg.counter.debounce_m);
            cfg.counter.window_n = c.value("window_n", cfg.counter.window_n);
            cfg.counter.margin_cells = c.value("margin_cells", cfg.counter.margin_cells);
        }
        if (j.contains("batch")) {
            cfg.n_f = j.at("batch").value("n_f", 1);
            cfg.timeout_s = j.at("batch").value("timeout_s", 0.5);
        }
        if (j.contains("output")) cfg.out_dir = j.at("output").value("dir", cfg.out_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("pipeline config: ") + e.what());
    }
    if (cfg.streams.empty()) throw ConfigError("pipeline config: no streams");
    for (const auto& s : cfg.streams) {
        if (s.transport != "ppm-dir" && s.transport != "drpv" && s.transport != "pipe")
            throw ConfigError("pipeline config: unknown transport '" + s.transport + "'");
        if (s.transport == "pipe" && (s.width < 1 || s.height < 1))
            throw ConfigError("pipeline config: pipe stream '" + s.id + "' needs width/height");
    }
    return cfg;
}

std::unique_ptr<StreamSource> make_source(const SourceSpec& s) {
    if (s.transport == "ppm-dir") return std::make_unique<PpmDirSource>(s.id, s.path, s.fps);
    if (s.transport == "drpv") return std::make_unique<DrpvFileSource>(s.id, s.path);
    return std::make_unique<PipeSource>(s.id, s.path, s.width, s.height, s.fps);
}

}  // namespace

PipelineReport run_pipeline(const std::string& config_path) {
    std::ifstream cf(config_path);
    if (!cf) throw IoError("cannot open config: " + config_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(cf);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("pipeline config: ") + e.what());
    }
    const PipelineConfig cfg = parse_pipeline_config(j);

    DropNet net = load_weights(cfg.weights);
    if (cfg.net_override) {
        NetConfig oc = NetConfig::from_json(*cfg.net_override);
        oc.seed = net.config().seed;
        oc.validate();
        if (!(oc == net.config()))
            throw ConfigError("pipeline config: net override disagrees with the weight file");
    }

    std::vector<std::unique_ptr<StreamSource>> sources;
    std::map<std::string, StreamChain> chains;
    for (const auto& s : cfg.streams) {
        if (chains.count(s.id)) throw ConfigError("pipeline config: duplicate stream id " + s.id);
        sources.push_back(make_source(s));
        chains.emplace(s.id, StreamChain{});
    }

    // config and weights are settled: only now touch the output directory
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream events_f(cfg.out_dir + "/events.jsonl");
    std::ofstream flow_f(cfg.out_dir + "/flow.csv");
    if (!events_f || !flow_f) throw IoError("cannot write outputs in " + cfg.out_dir);
    flow_f << "stream_id,t,q_gtt_min,window_n\n";

    std::vector<EventRecord> events;
    std::vector<FlowRecord> flows;
    std::size_t events_written = 0, flows_written = 0;
    const int W = net.config().input_size;
    long frames = 0;
    const double t0 = wall_now();
    for (;;) {
        const bool any_alive =
            std::any_of(sources.begin(), sources.end(), [](const auto& s) { return s->alive(); });
        if (!any_alive) break;
        const StreamBatch batch = collect_batch(sources, cfg.n_f, cfg.timeout_s, W);
        if (batch.empty()) continue;
        frames += batch.batch_n();
        infer_and_route(net, batch, chains, cfg.counter, events, flows);
        for (; events_written < events.size(); ++events_written) {
            const EventRecord& e = events[events_written];
            events_f << nlohmann::json{{"stream_id", e.stream_id},
                                       {"t", e.t},
                                       {"kind", e.kind},
                                       {"drop_count", e.drop_count},
                                       {"cell", {e.cell_i, e.cell_j}}}
                            .dump()
                     << "\n";
        }
        for (; flows_written < flows.size(); ++flows_written) {
            const FlowRecord& q = flows[flows_written];
            flow_f << q.stream_id << "," << q.t << "," << q.q_gtt_min << "," << q.window_n << "\n";
        }
    }
    const double wall = wall_now() - t0;

    PipelineReport rep;
    rep.frames_processed = frames;
    rep.wall_seconds = wall;
    rep.fps_achieved = wall > 0.0 ? double(frames) / wall : 0.0;
    nlohmann::json js = nlohmann::json::array();
    for (const auto& [id, ch] : chains) {
        rep.streams.push_back({id, ch.frames, ch.counter.drop_count, ch.last_q, ch.alarms});
        js.push_back({{"id", id},
                      {"frames", ch.frames},
                      {"drop_count", ch.counter.drop_count},
                      {"last_q_gtt_min", ch.last_q},
                      {"alarms", ch.alarms}});
    }
    std::ofstream rf(cfg.out_dir + "/report.json");
    rf << nlohmann::json{{"frames_processed", rep.frames_processed},
                         {"wall_seconds", rep.wall_seconds},
                         {"fps_achieved", rep.fps_achieved},
                         {"streams", js}}
              .dump(2)
       << "\n";
    if (!events_f || !flow_f || !rf) throw IoError("short write of outputs in " + cfg.out_dir);
    return rep;
}

int max_streams_for(double fps_achieved, double stream_fps, double margin) {
    if (!(stream_fps > 0.0)) throw ParamError("bench: stream fps must be positive");
    if (!(margin > 0.0)) throw ParamError("bench: margin must be positive");
    return int(std::floor(fps_achieved * margin / stream_fps));
}

ThroughputReport bench(DropNet& net, double stream_fps, double margin, int rounds_per_batch) {
    if (rounds_per_batch < 1) throw ParamError("bench: rounds must be at least 1");
    const int W = net.config().input_size;

    // pre-generated inputs; synthesis cost stays outside the timed region
    std::vector<ImageU8> pool;
    for (int f = 0; f < 8; ++f) {
        ImageU8 img(W, W);
        for (std::size_t p = 0; p < img.rgb.size(); ++p)
            img.rgb[p] = std::uint8_t((p * 131 + f * 17) & 0xff);
        pool.push_back(std::move(img));
    }

    ThroughputReport rep;
    rep.stream_fps = stream_fps;
    rep.margin = margin;
    double sink = 0.0;
    const int batches[4] = {1, 2, 4, 8};
    BenchEntry entries[4];
    // each batch size owns a rotation of staged input tensors; a round packs
    // one slot and infers the slot packed half a rotation earlier, so the
    // inferred batch is as cache-cold at every batch size as frames gathered
    // from live streams would be (a tight pack-then-infer loop would hand the
    // small batches still-warm inputs that no real assembler can provide)
    std::vector<std::vector<Tensor4>> staged(4);
    for (int i = 0; i < 4; ++i) {
        const int q = batches[i];
        entries[i].batch = q;
        const int slots = std::max(4, 32 / q);
        const std::size_t stride = std::size_t(W) * W * 3;
        for (int r = 0; r < slots; ++r) {
            Tensor4 x(q, W, W, 3);
            for (int s = 0; s < q; ++s) {
                const Tensor4 one = preprocess(pool[(r + s) % 8], W);
                std::copy(one.v.begin(), one.v.end(), x.v.begin() + s * stride);
            }
            staged[i].push_back(std::move(x));
        }
        sink += net.forward(staged[i][0])[0].v[0];  // warmup, untimed
    }
    // rounds interleave across batch sizes so a load burst on the host cannot
    // bias one batch size's contiguous measurement window
    for (int r = 0; r < rounds_per_batch; ++r) {
        for (int i = 0; i < 4; ++i) {
            BenchEntry& entry = entries[i];
            const int q = entry.batch;
            const int slots = int(staged[i].size());
            const double a = wall_now();
            Tensor4& x = staged[i][r % slots];
            const std::size_t stride = std::size_t(W) * W * 3;
            for (int s = 0; s < q; ++s) {
                const Tensor4 one = preprocess(pool[(r + s) % 8], W);
                std::copy(one.v.begin(), one.v.end(), x.v.begin() + s * stride);
            }
            const double b = wall_now();
            const std::vector<OutputGrid> grids = net.forward(staged[i][(r + slots / 2) % slots]);
            const double c = wall_now();
            for (const auto& g : grids) sink += extract_observation(g, 0.0, 0.3f).confidence;
            const double d = wall_now();
            entry.stages.preprocess_s += b - a;
            entry.stages.infer_s += c - b;
            entry.stages.decode_s += d - c;
            entry.frames += q;
        }
    }
    for (auto& entry : entries) {
        entry.wall_s = entry.stages.preprocess_s + entry.stages.infer_s + entry.stages.decode_s;
        entry.fps = double(entry.frames) / entry.wall_s;
        rep.entries.push_back(entry);
    }
    if (!std::isfinite(sink))  // also keeps the measured work observable
        throw std::runtime_error("bench: network produced non-finite confidences");
    rep.fps_achieved = 0.0;
    for (const auto& e : rep.entries) rep.fps_achieved = std::max(rep.fps_achieved, e.fps);
    rep.max_streams = max_streams_for(rep.fps_achieved, stream_fps, margin);
    return rep;
}

void write_report_json(const ThroughputReport& r, const std::string& path) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"batch", e.batch},
                           {"frames", e.frames},
                           {"wall_seconds", e.wall_s},
                           {"fps", e.fps},
                           {"stages",
                            {{"preprocess_s", e.stages.preprocess_s},
                             {"infer_s", e.stages.infer_s},
                             {"decode_s", e.stages.decode_s}}}});
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << nlohmann::json{{"entries", entries},
                        {"stream_fps", r.stream_fps},
                        {"margin", r.margin},
                        {"fps_achieved", r.fps_achieved},
                        {"max_streams", r.max_streams}}
             .dump(2)
      << "\n";
    if (!f) throw IoError("short write on " + path);
}

void emit_heatmap(const OutputGrid& grid, const std::string& base_path) {
    const int S = grid.S;
    if (S < 1 || grid.v.size() != std::size_t(S) * S * 2)
        throw ShapeError("emit_heatmap: malformed grid");
    for (int k = 0; k < 2; ++k) {
        std::vector<std::uint8_t> gray(std::size_t(S) * S);
        for (int j = 0; j < S; ++j)
            for (int i = 0; i < S; ++i)
                gray[std::size_t(j) * S + i] =
                    std::uint8_t(std::clamp<long>(std::lround(255.0 * grid.at(i, j, k)), 0, 255));
        write_pgm(gray, S, S, base_path + "_s" + std::to_string(k) + ".pgm");
    }
}

}  // namespace drip
