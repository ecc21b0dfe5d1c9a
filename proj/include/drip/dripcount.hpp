#pragma once

// Per-stream measurement chain: grid decoding, debounced drop counting,
// windowed flow rate, and the edge-proximity framing alarm.

#include <optional>
#include <vector>

#include "drip/common.hpp"
#include "drip/dropnet.hpp"

namespace drip {

struct DropObservation {
    double t = 0.0;
    bool detected = false;  // peak reached the detection threshold
    int s_hat = 0;
    int cell_i = 0, cell_j = 0;
    float confidence = 0.0f;  // the grid peak, whether or not detected
};

// s_hat = argmax over k of the per-layer maxima; cell = argmax within that
// layer. Ties break toward lower k, then the row-major lowest (i,j).
DropObservation extract_observation(const OutputGrid& grid, double t, float tau);

struct DripEvent {
    double t = 0.0;  // first frame of the new stable state-0 run
    int drop_count = 0;
    int cell_i = 0, cell_j = 0;
};

struct CounterState {
    int stable_state = -1;   // -1 until the first debounced commit
    int pending_state = -1;  // candidate raw state, -1 when no run is open
    int pending_run = 0;
    double pending_t0 = 0.0;
    int drop_count = 0;
    std::vector<double> detach_times;
    double last_t = 0.0;
    bool saw_frame = false;
};

// A raw state becomes stable after debounce_m consecutive detected frames;
// a stable 1 -> stable 0 commit counts one drop. Undetected frames keep the
// stable state but break any pending run.
std::optional<DripEvent> update_counter(CounterState& st, const DropObservation& obs,
                                        int debounce_m);

struct FlowRateSample {
    double t = 0.0;
    double q_gtt_min = 0.0;
    int window_n = 0;
};

// Q(t_i) = N / (t_i - t_{i-N}), scaled to gtt/min. Empty until N+1 detaches.
std::optional<FlowRateSample> flow_rate(const std::vector<double>& detach_times, int window_n);

struct FramingAlarm {
    double t = 0.0;
    int cell_i = 0, cell_j = 0;
    int margin_cells = 0;
};

// Alarm iff the detected cell is strictly within margin_cells of a grid edge.
std::optional<FramingAlarm> check_framing(const DropObservation& obs, int S, int margin_cells);

}  // namespace drip
