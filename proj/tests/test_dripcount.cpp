#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "drip/dripcount.hpp"

using namespace drip;

namespace {

OutputGrid flat_grid(int S, float p) {
    OutputGrid g(S);
    std::fill(g.v.begin(), g.v.end(), p);
    return g;
}

DropObservation obs_at(double t, bool detected, int s) {
    DropObservation o;
    o.t = t;
    o.detected = detected;
    o.s_hat = s;
    o.confidence = detected ? 0.9f : 0.1f;
    return o;
}

struct RawFrame {
    double t = 0.0;
    bool detected = false;
    int s = 0;
};

// Independent recount: run-length encode maximal stretches of identical
// (detected, s) frames, then walk the runs. A detected run of length >= m
// whose state differs from the current stable state commits that state at
// the run's first frame; a 1 -> 0 commit is one drop.
std::vector<double> rle_recount(const std::vector<RawFrame>& frames, int m) {
    std::vector<double> events;
    int stable = -1;
    std::size_t i = 0;
    while (i < frames.size()) {
        std::size_t j = i;
        while (j < frames.size() && frames[j].detected == frames[i].detected &&
               frames[j].s == frames[i].s)
            ++j;
        if (frames[i].detected && frames[i].s != stable && j - i >= std::size_t(m)) {
            if (stable == 1 && frames[i].s == 0) events.push_back(frames[i].t);
            stable = frames[i].s;
        }
        i = j;
    }
    return events;
}

std::vector<double> counter_events(const std::vector<RawFrame>& frames, int m) {
    CounterState st;
    std::vector<double> events;
    for (const RawFrame& f : frames) {
        auto ev = update_counter(st, obs_at(f.t, f.detected, f.s), m);
        if (ev) events.push_back(ev->t);
    }
    return events;
}

}  // namespace

TEST_CASE("extract_observation") {
    SUBCASE("single strong peak") {
        OutputGrid g = flat_grid(26, 0.05f);
        g.at(5, 7, 1) = 0.9f;
        const DropObservation o = extract_observation(g, 3.25, 0.3f);
        CHECK(o.t == 3.25);
        CHECK(o.detected);
        CHECK(o.s_hat == 1);
        CHECK(o.cell_i == 5);
        CHECK(o.cell_j == 7);
        CHECK(o.confidence == doctest::Approx(0.9f));
    }
    SUBCASE("the winning layer decides the state even against nearby mass") {
        OutputGrid g = flat_grid(26, 0.01f);
        g.at(10, 10, 0) = 0.95f;
        g.at(10, 11, 0) = 0.94f;
        g.at(3, 3, 1) = 0.20f;
        const DropObservation o = extract_observation(g, 0.0, 0.3f);
        CHECK(o.s_hat == 0);
        CHECK(o.cell_i == 10);
        CHECK(o.cell_j == 10);
    }
    SUBCASE("below threshold is not detected but the peak is still reported") {
        const DropObservation o = extract_observation(flat_grid(26, 0.1f), 1.0, 0.3f);
        CHECK(!o.detected);
        CHECK(o.confidence == doctest::Approx(0.1f));
        CHECK(o.s_hat == 0);
        CHECK(o.cell_i == 0);
        CHECK(o.cell_j == 0);
    }
    SUBCASE("confidence exactly at tau counts as detected") {
        OutputGrid g = flat_grid(8, 0.0f);
        g.at(4, 4, 1) = 0.3f;
        CHECK(extract_observation(g, 0.0, 0.3f).detected);
    }
    SUBCASE("layer tie breaks toward state 0") {
        OutputGrid g = flat_grid(8, 0.0f);
        g.at(2, 2, 0) = 0.8f;
        g.at(5, 5, 1) = 0.8f;
        const DropObservation o = extract_observation(g, 0.0, 0.3f);
        CHECK(o.s_hat == 0);
        CHECK(o.cell_i == 2);
        CHECK(o.cell_j == 2);
    }
    SUBCASE("within a layer ties break to the first row-major cell") {
        OutputGrid g = flat_grid(8, 0.0f);
        g.at(6, 1, 1) = 0.7f;
        g.at(2, 5, 1) = 0.7f;
        g.at(2, 6, 1) = 0.7f;
        const DropObservation o = extract_observation(g, 0.0, 0.3f);
        CHECK(o.s_hat == 1);
        CHECK(o.cell_i == 2);
        CHECK(o.cell_j == 5);
    }
    SUBCASE("parameter and shape guards") {
        const OutputGrid g = flat_grid(8, 0.5f);
        CHECK_THROWS_AS(extract_observation(g, 0.0, 0.0f), ParamError);
        CHECK_THROWS_AS(extract_observation(g, 0.0, 1.0f), ParamError);
        OutputGrid bad = g;
        bad.v.pop_back();
        CHECK_THROWS_AS(extract_observation(bad, 0.0, 0.3f), ShapeError);
        CHECK_THROWS_AS(extract_observation(OutputGrid{}, 0.0, 0.3f), ShapeError);
    }
}

TEST_CASE("update_counter examples") {
    SUBCASE("forming then detaching counts once at the run start") {
        // raw states 0,0,1,1,1,0,0 with m=2: the only event is the 1 -> 0
        // commit, stamped with the sixth frame's time
        CounterState st;
        const int s[] = {0, 0, 1, 1, 1, 0, 0};
        std::optional<DripEvent> got;
        int events = 0;
        for (int f = 0; f < 7; ++f) {
            auto ev = update_counter(st, obs_at(1.0 + f, true, s[f]), 2);
            if (ev) {
                ++events;
                got = ev;
            }
        }
        REQUIRE(events == 1);
        CHECK(got->t == 6.0);
        CHECK(got->drop_count == 1);
        CHECK(st.drop_count == 1);
        REQUIRE(st.detach_times.size() == 1);
        CHECK(st.detach_times[0] == 6.0);
    }
    SUBCASE("a single-frame dip does not count") {
        CounterState st;
        const int s[] = {1, 1, 0, 1, 1};
        int events = 0;
        for (int f = 0; f < 5; ++f)
            if (update_counter(st, obs_at(double(f), true, s[f]), 2)) ++events;
        CHECK(events == 0);
        CHECK(st.drop_count == 0);
        CHECK(st.stable_state == 1);
    }
    SUBCASE("a constant stream never counts") {
        CounterState st;
        for (int f = 0; f < 50; ++f)
            CHECK(!update_counter(st, obs_at(double(f), true, 1), 3));
        CHECK(st.drop_count == 0);
    }
    SUBCASE("undetected frames keep the stable state but break a pending run") {
        CounterState st;
        update_counter(st, obs_at(0.0, true, 1), 2);
        update_counter(st, obs_at(1.0, true, 1), 2);
        CHECK(st.stable_state == 1);
        // one frame of the new state, then a dropout, then the state again:
        // the run must start over, so the event time is the fourth frame's
        update_counter(st, obs_at(2.0, true, 0), 2);
        update_counter(st, obs_at(3.0, false, 0), 2);
        update_counter(st, obs_at(4.0, true, 0), 2);
        auto ev = update_counter(st, obs_at(5.0, true, 0), 2);
        REQUIRE(ev.has_value());
        CHECK(ev->t == 4.0);
        CHECK(ev->drop_count == 1);
    }
    SUBCASE("m = 1 commits instantly") {
        CounterState st;
        CHECK(!update_counter(st, obs_at(0.0, true, 1), 1));
        auto ev = update_counter(st, obs_at(0.5, true, 0), 1);
        REQUIRE(ev.has_value());
        CHECK(ev->t == 0.5);
    }
    SUBCASE("guards") {
        CounterState st;
        CHECK_THROWS_AS(update_counter(st, obs_at(0.0, true, 1), 0), ParamError);
        update_counter(st, obs_at(5.0, true, 1), 2);
        CHECK_NOTHROW(update_counter(st, obs_at(5.0, true, 1), 2));  // equal time is fine
        CHECK_THROWS_AS(update_counter(st, obs_at(4.9, true, 1), 2), ParamError);
    }
}

TEST_CASE("debounced counting agrees with an independent recount") {
    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> mdist(1, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    for (int trial = 0; trial < 10000; ++trial) {
        const int m = mdist(rng);
        const int len = 20 + int(u(rng) * 60);
        std::vector<RawFrame> frames;
        int s = u(rng) < 0.5 ? 1 : 0;
        double t = 0.0;
        for (int f = 0; f < len; ++f) {
            if (u(rng) < 0.25) s = 1 - s;  // state flips often enough to count
            t += 0.02 + 0.01 * u(rng);
            frames.push_back({t, u(rng) < 0.9, s});
        }
        const std::vector<double> got = counter_events(frames, m);
        const std::vector<double> want = rle_recount(frames, m);
        REQUIRE(got == want);
    }
}

TEST_CASE("m = 1 on clean sequences is plain transition counting") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<RawFrame> frames;
        int s = 0;
        for (int f = 0; f < 80; ++f) {
            if (u(rng) < 0.3) s = 1 - s;
            frames.push_back({double(f), true, s});
        }
        int naive = 0;
        for (std::size_t f = 1; f < frames.size(); ++f)
            if (frames[f - 1].s == 1 && frames[f].s == 0) ++naive;
        CHECK(int(counter_events(frames, 1).size()) == naive);
    }
}

TEST_CASE("flow_rate") {
    SUBCASE("three-drop window over regular detaches") {
        const std::vector<double> t = {0.0, 2.0, 4.0, 6.0};
        const auto q = flow_rate(t, 3);
        REQUIRE(q.has_value());
        CHECK(q->t == 6.0);
        CHECK(q->q_gtt_min == doctest::Approx(30.0).epsilon(1e-12));
        CHECK(q->window_n == 3);
    }
    SUBCASE("single-interval window") {
        const auto q = flow_rate({0.0, 3.0}, 1);
        REQUIRE(q.has_value());
        CHECK(q->q_gtt_min == doctest::Approx(20.0).epsilon(1e-12));
    }
    SUBCASE("needs window_n + 1 detaches") {
        CHECK(!flow_rate({}, 3));
        CHECK(!flow_rate({1.0, 2.0}, 3));
        CHECK(!flow_rate({1.0, 2.0, 3.0}, 3));
        CHECK(flow_rate({1.0, 2.0, 3.0, 4.0}, 3));
    }
    SUBCASE("guards") {
        CHECK_THROWS_AS(flow_rate({1.0, 2.0}, 0), ParamError);
        CHECK_THROWS_AS(flow_rate({5.0, 5.0}, 1), ParamError);
        CHECK_THROWS_AS(flow_rate({0.0, 2.0, 1.0}, 1), ParamError);
    }
    SUBCASE("rate is the reciprocal of the mean inter-drop interval") {
        std::mt19937 rng(77);
        std::uniform_real_distribution<double> gap(0.5, 3.0);
        std::vector<double> t = {0.0};
        for (int n = 0; n < 40; ++n) t.push_back(t.back() + gap(rng));
        for (int N : {1, 2, 3, 5}) {
            const auto q = flow_rate(t, N);
            REQUIRE(q.has_value());
            double mean_gap = 0.0;
            for (std::size_t i = t.size() - N; i < t.size(); ++i) mean_gap += t[i] - t[i - 1];
            mean_gap /= N;
            CHECK(std::abs(q->q_gtt_min - 60.0 / mean_gap) < 1e-9 * q->q_gtt_min);
        }
    }
    SUBCASE("constant period gives 60 over period at every sample") {
        const double period = 1.7;
        std::vector<double> detaches;
        CounterState st;
        // drive the counter frame by frame at 30 fps, 20 drops
        const double fps = 30.0;
        int frames = int(20.5 * period * fps);
        for (int f = 0; f < frames; ++f) {
            const double t = f / fps;
            const double ph = std::fmod(t, period) / period;
            const int s = ph < 0.5 ? 0 : 1;
            auto ev = update_counter(st, obs_at(t, true, s), 2);
            if (ev) {
                detaches.push_back(ev->t);
                const auto q = flow_rate(st.detach_times, 3);
                if (q) {
                    // quantized to the frame grid, so allow one frame of slack
                    const double ideal = 60.0 / period;
                    const double worst = 60.0 * 3.0 / (3.0 * period - 1.0 / fps);
                    CHECK(q->q_gtt_min >= ideal - (worst - ideal) - 1e-9);
                    CHECK(q->q_gtt_min <= worst + 1e-9);
                }
            }
        }
        CHECK(detaches.size() >= 18);
        // commit times sit one debounce interval after each phase boundary
        for (std::size_t i = 1; i < detaches.size(); ++i)
            CHECK(std::abs(detaches[i] - detaches[i - 1] - period) < 2.0 / fps);
    }
}

TEST_CASE("check_framing") {
    SUBCASE("examples at S = 26, margin 2") {
        DropObservation o = obs_at(1.0, true, 0);
        o.cell_i = 13;
        o.cell_j = 13;
        CHECK(!check_framing(o, 26, 2));
        o.cell_i = 1;
        const auto alarm = check_framing(o, 26, 2);
        REQUIRE(alarm.has_value());
        CHECK(alarm->t == 1.0);
        CHECK(alarm->cell_i == 1);
        CHECK(alarm->cell_j == 13);
        CHECK(alarm->margin_cells == 2);
        o.cell_i = 2;  // boundary is exclusive
        CHECK(!check_framing(o, 26, 2));
        o.cell_i = 25;
        CHECK(check_framing(o, 26, 2));
        o.cell_i = 13;
        o.cell_j = 24;
        CHECK(check_framing(o, 26, 2));
    }
    SUBCASE("exhaustive band at S = 26") {
        for (int i = 0; i < 26; ++i)
            for (int j = 0; j < 26; ++j) {
                DropObservation o = obs_at(0.0, true, 1);
                o.cell_i = i;
                o.cell_j = j;
                const bool want = std::min({i, j, 25 - i, 25 - j}) < 2;
                CHECK(check_framing(o, 26, 2).has_value() == want);
            }
    }
    SUBCASE("no detection, no alarm") {
        DropObservation o = obs_at(0.0, false, 0);
        o.cell_i = 0;
        o.cell_j = 0;
        CHECK(!check_framing(o, 26, 2));
    }
    SUBCASE("margin 0 never alarms") {
        DropObservation o = obs_at(0.0, true, 0);
        for (int i : {0, 1, 25}) {
            o.cell_i = i;
            o.cell_j = 0;
            CHECK(!check_framing(o, 26, 0));
        }
    }
    SUBCASE("guards") {
        const DropObservation o = obs_at(0.0, true, 0);
        CHECK_THROWS_AS(check_framing(o, 0, 2), ParamError);
        CHECK_THROWS_AS(check_framing(o, 26, -1), ParamError);
    }
}
