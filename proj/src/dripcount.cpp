#include "drip/dripcount.hpp"

#include <algorithm>

namespace drip {

DropObservation extract_observation(const OutputGrid& grid, double t, float tau) {
    if (!(tau > 0.0f && tau < 1.0f)) throw ParamError("extract_observation: tau outside (0,1)");
    const int S = grid.S;
    if (S < 1 || grid.v.size() != static_cast<std::size_t>(S) * S * 2)
        throw ShapeError("extract_observation: malformed grid");

    float peak[2] = {-1.0f, -1.0f};
    int pi[2] = {0, 0}, pj[2] = {0, 0};
    for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j)
            for (int k = 0; k < 2; ++k) {
                const float v = grid.at(i, j, k);
                if (v > peak[k]) {  // strict: first row-major cell keeps ties
                    peak[k] = v;
                    pi[k] = i;
                    pj[k] = j;
                }
            }

    DropObservation obs;
    obs.t = t;
    obs.s_hat = peak[1] > peak[0] ? 1 : 0;  // tie toward lower k
    obs.cell_i = pi[obs.s_hat];
    obs.cell_j = pj[obs.s_hat];
    obs.confidence = std::max(peak[0], peak[1]);
    obs.detected = obs.confidence >= tau;
    return obs;
}

std::optional<DripEvent> update_counter(CounterState& st, const DropObservation& obs,
                                        int debounce_m) {
    if (debounce_m < 1) throw ParamError("update_counter: debounce_m must be at least 1");
    if (st.saw_frame && obs.t < st.last_t)
        throw ParamError("update_counter: time regression within a stream");
    st.last_t = obs.t;
    st.saw_frame = true;

    if (!obs.detected) {
        st.pending_state = -1;
        st.pending_run = 0;
        return std::nullopt;
    }

    const int s = obs.s_hat;
    if (s == st.stable_state) {
        st.pending_state = -1;
        st.pending_run = 0;
        return std::nullopt;
    }
    if (s == st.pending_state) {
        ++st.pending_run;
    } else {
        st.pending_state = s;
        st.pending_run = 1;
        st.pending_t0 = obs.t;
    }
    if (st.pending_run < debounce_m) return std::nullopt;

    const int prev = st.stable_state;
    const double t0 = st.pending_t0;
    st.stable_state = s;
    st.pending_state = -1;
    st.pending_run = 0;
    if (prev == 1 && s == 0) {
        ++st.drop_count;
        st.detach_times.push_back(t0);
        return DripEvent{t0, st.drop_count, obs.cell_i, obs.cell_j};
    }
    return std::nullopt;
}

std::optional<FlowRateSample> flow_rate(const std::vector<double>& detach_times, int window_n) {
    if (window_n < 1) throw ParamError("flow_rate: window must be at least 1");
    const std::size_t n = detach_times.size();
    if (n < static_cast<std::size_t>(window_n) + 1) return std::nullopt;
    const double ti = detach_times[n - 1];
    const double tj = detach_times[n - 1 - window_n];
    const double dt = ti - tj;
    if (!(dt > 0.0)) throw ParamError("flow_rate: detach timestamps must be strictly increasing");
    return FlowRateSample{ti, 60.0 * window_n / dt, window_n};
}

std::optional<FramingAlarm> check_framing(const DropObservation& obs, int S, int margin_cells) {
    if (S < 1) throw ParamError("check_framing: grid size must be positive");
    if (margin_cells < 0) throw ParamError("check_framing: margin must be nonnegative");
    if (!obs.detected) return std::nullopt;
    const int d = std::min(std::min(obs.cell_i, obs.cell_j),
                           std::min(S - 1 - obs.cell_i, S - 1 - obs.cell_j));
    if (d >= margin_cells) return std::nullopt;
    return FramingAlarm{obs.t, obs.cell_i, obs.cell_j, margin_cells};
}

}  // namespace drip
