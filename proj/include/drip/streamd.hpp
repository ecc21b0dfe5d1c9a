#pragma once

// Multi-stream engine: frame sources, batch assembly across streams, routed
// inference into per-stream counters, throughput measurement, and the DRPV
// raw-video container.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drip/common.hpp"
#include "drip/dripcount.hpp"
#include "drip/dropnet.hpp"
#include "drip/image.hpp"

namespace drip {

struct CounterConfig {
    float tau = 0.3f;
    int debounce_m = 2;
    int window_n = 3;
    int margin_cells = 2;
};

struct SourcedFrame {
    ImageU8 img;
    std::int64_t index = 0;
    double t = 0.0;
};

// A frame producer. File-backed sources stamp t = index/fps; the pipe source
// stamps arrival wall-clock time.
class StreamSource {
public:
    virtual ~StreamSource() = default;
    virtual const std::string& id() const = 0;
    virtual double fps() const = 0;
    virtual bool alive() const = 0;
    // nullopt on stall (nothing within the timeout) or exhaustion
    virtual std::optional<SourcedFrame> next_frame(double timeout_s) = 0;
    virtual void kill() = 0;  // drop the stream after a decode error
};

// Lexicographically ordered *.ppm files in a directory.
class PpmDirSource : public StreamSource {
public:
    PpmDirSource(std::string id, const std::string& dir, double fps);
    const std::string& id() const override { return id_; }
    double fps() const override { return fps_; }
    bool alive() const override { return alive_ && next_ < files_.size(); }
    std::optional<SourcedFrame> next_frame(double timeout_s) override;
    void kill() override { alive_ = false; }

private:
    std::string id_;
    std::vector<std::string> files_;
    double fps_;
    std::size_t next_ = 0;
    bool alive_ = true;
};

class DrpvFileSource : public StreamSource {
public:
    DrpvFileSource(std::string id, const std::string& path);
    const std::string& id() const override { return id_; }
    double fps() const override { return fps_; }
    bool alive() const override;
    std::optional<SourcedFrame> next_frame(double timeout_s) override;
    void kill() override { alive_ = false; }

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
    std::string id_;
    double fps_ = 0.0;
    bool alive_ = true;
};

// Raw RGB24 frames of fixed geometry on a file descriptor ("-" = stdin).
// Waits on select() up to the timeout and reassembles partial reads.
class PipeSource : public StreamSource {
public:
    PipeSource(std::string id, const std::string& path, int width, int height, double fps);
    ~PipeSource() override;
    const std::string& id() const override { return id_; }
    double fps() const override { return fps_; }
    bool alive() const override { return alive_; }
    std::optional<SourcedFrame> next_frame(double timeout_s) override;
    void kill() override { alive_ = false; }

private:
    std::string id_;
    int fd_ = -1;
    bool owns_fd_ = false;
    int w_ = 0, h_ = 0;
    double fps_ = 0.0;
    std::int64_t next_index_ = 0;
    std::vector<std::uint8_t> pending_;
    bool alive_ = true;
};

// Center-crop to square, bilinear resize to W x W, bytes to [0,1].
Tensor4 preprocess(const ImageU8& raw, int W);

struct Provenance {
    std::string stream_id;
    std::int64_t frame_index = 0;
    double t = 0.0;
};

struct StreamBatch {
    Tensor4 frames{1, 1, 1, 3};  // meaningful only when batch_n() > 0
    std::vector<Provenance> provenance;

    int batch_n() const { return int(provenance.size()); }
    bool empty() const { return provenance.empty(); }
};

// Up to n_f consecutive frames per live source, preprocessed to W. A source
// yielding nothing within the timeout is skipped for this batch; one that
// throws while decoding is killed with a warning on stderr. All sources
// stalled or dead yields the empty batch.
StreamBatch collect_batch(std::vector<std::unique_ptr<StreamSource>>& sources, int n_f,
                          double timeout_s, int W);

struct EventRecord {
    std::string stream_id;
    double t = 0.0;
    std::string kind;  // "detach" | "alarm"
    int drop_count = 0;
    int cell_i = 0, cell_j = 0;
};

struct FlowRecord {
    std::string stream_id;
    double t = 0.0;
    double q_gtt_min = 0.0;
    int window_n = 0;
};

struct StreamChain {
    CounterState counter;
    bool in_margin_band = false;
    std::int64_t last_index = -1;
    long frames = 0;
    long alarms = 0;
    double last_q = 0.0;
};

// One forward pass for the whole batch, grids routed by provenance to each
// stream's counter in order. Framing alarms are edge-triggered on entry into
// the margin band. Appends to events/flows.
void infer_and_route(DropNet& net, const StreamBatch& batch,
                     std::map<std::string, StreamChain>& chains, const CounterConfig& ccfg,
                     std::vector<EventRecord>& events, std::vector<FlowRecord>& flows);

struct StreamSummary {
    std::string id;
    long frames = 0;
    int drop_count = 0;
    double last_q = 0.0;
    long alarms = 0;
};

struct PipelineReport {
    long frames_processed = 0;
    double wall_seconds = 0.0;
    double fps_achieved = 0.0;
    std::vector<StreamSummary> streams;
};

// Drives sources to exhaustion, writing events.jsonl, flow.csv and
// report.json into the configured output directory. Config and weights are
// loaded before any output file is touched.
PipelineReport run_pipeline(const std::string& config_path);

struct StageLatency {
    double preprocess_s = 0.0, infer_s = 0.0, decode_s = 0.0;
};

struct BenchEntry {
    int batch = 0;
    long frames = 0;
    double wall_s = 0.0;
    double fps = 0.0;
    StageLatency stages;
};

struct ThroughputReport {
    std::vector<BenchEntry> entries;
    double stream_fps = 30.0;
    double margin = 0.875;
    double fps_achieved = 0.0;  // best across batch sizes
    int max_streams = 0;
};

int max_streams_for(double fps_achieved, double stream_fps, double margin);

// Times preprocess/infer/decode over pre-generated frames at batch sizes
// {1,2,4,8}; frame synthesis is excluded from the timed region.
ThroughputReport bench(DropNet& net, double stream_fps, double margin, int rounds_per_batch);

void write_report_json(const ThroughputReport& r, const std::string& path);

// Writes base_path + "_s0.pgm" and "_s1.pgm", pixel = round(255 * value).
void emit_heatmap(const OutputGrid& grid, const std::string& base_path);

// DRPV container: "DRPV", u32 version=1, u32 width, u32 height, u32 fps
// numerator/denominator, u64 frame count, then raw RGB24 payloads.
class DrpvWriter {
public:
    DrpvWriter(const std::string& path, int width, int height, int fps_num, int fps_den);
    ~DrpvWriter();
    void add(const ImageU8& frame);
    void finish();  // back-patches the frame count; further add() is an error

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<ImageU8> read_drpv(const std::string& path, int* fps_num = nullptr,
                               int* fps_den = nullptr);

}  // namespace drip
