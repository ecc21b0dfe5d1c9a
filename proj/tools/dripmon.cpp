// dripmon: one binary for the whole workflow. Generate data, train, evaluate,
// run the monitoring pipeline, benchmark, or dump heatmaps.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <string>
#include <vector>

#include "drip/dropnet.hpp"
#include "drip/streamd.hpp"
#include "drip/synth.hpp"
#include "drip/trainer.hpp"

namespace {

drip::NetConfig net_by_name(const std::string& name, std::uint32_t seed) {
    if (name == "desk") return drip::NetConfig::desk(seed);
    if (name == "reference") return drip::NetConfig::reference(seed);
    throw drip::ConfigError("unknown net '" + name + "' (expected desk or reference)");
}

// Scene defaults scale with the frame size; the stock numbers assume 416.
drip::SceneSpec scaled_scene(int size, int style, std::uint32_t seed) {
    drip::SceneSpec sc;
    sc.frame_size = size;
    sc.style = style;
    sc.seed = seed;
    sc.drop_radius = std::max(4.0f, std::round(size * 16.0f / 416.0f));
    sc.dripper_x = size / 2.0f;
    sc.dripper_y = std::max(sc.drop_radius + 1.0f, std::round(size * 60.0f / 416.0f));
    return sc;
}

std::vector<drip::PeriodSegment> parse_periods(const std::vector<std::string>& raw) {
    std::vector<drip::PeriodSegment> out;
    for (const auto& item : raw) {
        drip::PeriodSegment seg;
        const auto colon = item.find(':');
        try {
            if (colon == std::string::npos) {
                seg.period = std::stod(item);
            } else {
                seg.t_start = std::stod(item.substr(0, colon));
                seg.period = std::stod(item.substr(colon + 1));
            }
        } catch (const std::exception&) {
            throw drip::ConfigError("bad --period '" + item + "' (want P or START:P)");
        }
        out.push_back(seg);
    }
    return out;
}

void gen_stream_drpv(const drip::DripStreamSpec& spec, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const drip::StreamTruth tr = drip::stream_truth(spec);
    long num = std::lround(spec.fps * 1000.0), den = 1000;
    const long g = std::gcd(num, den);
    drip::DrpvWriter writer(out_dir + "/stream.drpv", spec.scene.frame_size,
                            spec.scene.frame_size, int(num / g), int(den / g));
    for (std::size_t i = 0; i < tr.t.size(); ++i)
        writer.add(drip::quantize_frame(drip::stream_frame(spec, int(i))));
    writer.finish();
    std::ofstream truth(out_dir + "/truth.jsonl");
    for (std::size_t i = 0; i < tr.t.size(); ++i)
        truth << nlohmann::json{{"frame_index", i}, {"t_seconds", tr.t[i]}, {"state", tr.state[i]}}
                     .dump()
              << "\n";
    std::ofstream det(out_dir + "/detach.jsonl");
    for (double t : tr.detach_t) det << nlohmann::json{{"t_seconds", t}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"camera-based IV drip monitor toolkit"};
    app.require_subcommand(1);

    auto* gd = app.add_subcommand("gen-dataset", "render a labeled single-drop dataset");
    std::string gd_out;
    drip::DatasetSpec dspec;
    gd->add_option("--out", gd_out, "output directory")->required();
    gd->add_option("--count", dspec.count, "number of samples");
    gd->add_option("--size", dspec.frame_size, "frame size W");
    gd->add_option("--grid", dspec.grid_size, "grid size S");
    gd->add_option("--balance", dspec.class_balance, "fraction labeled s=1");
    gd->add_option("--styles", dspec.styles, "background style count");
    gd->add_option("--seed", dspec.seed, "rng seed");

    auto* gs = app.add_subcommand("gen-stream", "render a timed drip stream with ground truth");
    std::string gs_out, gs_format = "ppm";
    std::vector<std::string> gs_periods;
    double gs_duration = 60.0, gs_fps = 30.0, gs_forming = 0.5;
    int gs_size = 416, gs_style = 0;
    std::uint32_t gs_seed = 1;
    gs->add_option("--out", gs_out, "output directory")->required();
    gs->add_option("--duration", gs_duration, "seconds, frames cover [0,duration]");
    gs->add_option("--fps", gs_fps, "frames per second");
    gs->add_option("--period", gs_periods, "drip period, P or START:P, repeatable");
    gs->add_option("--forming-fraction", gs_forming, "leading cycle fraction in state 0");
    gs->add_option("--size", gs_size, "frame size");
    gs->add_option("--style", gs_style, "background style");
    gs->add_option("--seed", gs_seed, "rng seed");
    gs->add_option("--format", gs_format, "ppm or drpv")
        ->check(CLI::IsMember({"ppm", "drpv"}));

    auto* tr = app.add_subcommand("train", "train a net on a generated dataset");
    std::string tr_data, tr_out = "weights.drpw", tr_net = "desk", tr_history;
    drip::TrainConfig tcfg;
    tr->add_option("--data", tr_data, "dataset directory (with manifest.jsonl)")->required();
    tr->add_option("--out", tr_out, "weight file to write");
    tr->add_option("--net", tr_net, "desk or reference");
    tr->add_option("--epochs", tcfg.epochs, "training epochs");
    tr->add_option("--batch", tcfg.batch_size, "batch size");
    tr->add_option("--lr", tcfg.lr, "learning rate");
    tr->add_option("--momentum", tcfg.momentum, "sgd momentum");
    tr->add_option("--split", tcfg.split_ratio, "train fraction of the dataset");
    tr->add_option("--seed", tcfg.seed, "shuffle and init seed");
    tr->add_option("--history", tr_history, "csv file for per-epoch records");

    auto* ev = app.add_subcommand("eval", "evaluate a weight file on a dataset");
    std::string ev_data, ev_weights;
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--weights", ev_weights, "weight file")->required();

    auto* rn = app.add_subcommand("run", "run the multi-stream monitoring pipeline");
    std::string rn_config;
    rn->add_option("--config", rn_config, "pipeline config json")->required();

    auto* be = app.add_subcommand("bench", "measure inference throughput");
    std::string be_weights, be_net = "reference", be_out;
    double be_stream_fps = 30.0, be_margin = 0.875;
    int be_rounds = 40;
    std::uint32_t be_seed = 1;
    be->add_option("--weights", be_weights, "weight file (default: fresh-initialized net)");
    be->add_option("--net", be_net, "desk or reference, when no weights given");
    be->add_option("--seed", be_seed, "init seed, when no weights given");
    be->add_option("--stream-fps", be_stream_fps, "per-stream frame rate");
    be->add_option("--margin", be_margin, "capacity safety margin");
    be->add_option("--rounds", be_rounds, "timed rounds per batch size");
    be->add_option("--out", be_out, "report json path");

    auto* hm = app.add_subcommand("heatmap", "dump per-state response maps for one frame");
    std::string hm_weights, hm_frame, hm_out = "heatmap";
    hm->add_option("--weights", hm_weights, "weight file")->required();
    hm->add_option("--frame", hm_frame, "input ppm frame")->required();
    hm->add_option("--out", hm_out, "output base path (writes <base>_s0.pgm, <base>_s1.pgm)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gd->parsed()) {
            const auto entries = drip::build_dataset(dspec, gd_out);
            long pos = 0;
            for (const auto& e : entries) pos += e.s;
            std::cout << "wrote " << entries.size() << " samples (" << pos << " with s=1) to "
                      << gd_out << "\n";
        } else if (gs->parsed()) {
            drip::DripStreamSpec spec;
            spec.duration = gs_duration;
            spec.fps = gs_fps;
            if (!gs_periods.empty()) spec.periods = parse_periods(gs_periods);
            spec.forming_fraction = gs_forming;
            spec.scene = scaled_scene(gs_size, gs_style, gs_seed);
            spec.validate();
            if (gs_format == "drpv") {
                gen_stream_drpv(spec, gs_out);
                std::cout << "wrote " << gs_out << "/stream.drpv\n";
            } else {
                const auto truth = drip::gen_stream(spec, gs_out);
                std::cout << "wrote " << truth.t.size() << " frames, " << truth.detach_t.size()
                          << " detaches to " << gs_out << "\n";
            }
        } else if (tr->parsed()) {
            tcfg.validate();
            const auto entries = drip::load_manifest(tr_data);
            drip::DropNet net = drip::DropNet::build(net_by_name(tr_net, tcfg.seed));
            std::cout << "training " << tr_net << " net (" << net.param_count() << " params) on "
                      << entries.size() << " samples\n";
            const auto history = drip::train(net, tr_data, entries, tcfg);
            for (const auto& r : history.records)
                std::cout << "epoch " << r.epoch << ": train_loss " << r.train_loss
                          << " val_loss " << r.val_loss << " val_state_acc " << r.val_state_acc
                          << "\n";
            drip::save_weights(net, tr_out);
            std::cout << "kept epoch " << history.best_epoch << ", wrote " << tr_out << "\n";
            if (!tr_history.empty()) drip::write_history_csv(history, tr_history);
        } else if (ev->parsed()) {
            drip::DropNet net = drip::load_weights(ev_weights);
            const auto entries = drip::load_manifest(ev_data);
            const auto m = drip::evaluate(net, ev_data, entries);
            std::cout << "state_accuracy " << m.state_accuracy << "\n"
                      << "cell_accuracy " << m.cell_accuracy << "\n";
        } else if (rn->parsed()) {
            const auto rep = drip::run_pipeline(rn_config);
            std::cout << "processed " << rep.frames_processed << " frames in " << rep.wall_seconds
                      << " s (" << rep.fps_achieved << " fps)\n";
            for (const auto& s : rep.streams)
                std::cout << "  " << s.id << ": " << s.frames << " frames, " << s.drop_count
                          << " drops, q " << s.last_q << " gtt/min, " << s.alarms << " alarms\n";
        } else if (be->parsed()) {
            drip::DropNet net = be_weights.empty()
                                    ? drip::DropNet::build(net_by_name(be_net, be_seed))
                                    : drip::load_weights(be_weights);
            const auto rep = drip::bench(net, be_stream_fps, be_margin, be_rounds);
            for (const auto& e : rep.entries)
                std::cout << "batch " << e.batch << ": " << e.fps << " fps (pre "
                          << e.stages.preprocess_s << " s, infer " << e.stages.infer_s
                          << " s, decode " << e.stages.decode_s << " s)\n";
            std::cout << "fps_achieved " << rep.fps_achieved << ", max_streams "
                      << rep.max_streams << " at " << rep.stream_fps << " fps margin "
                      << rep.margin << "\n";
            if (!be_out.empty()) drip::write_report_json(rep, be_out);
        } else if (hm->parsed()) {
            drip::DropNet net = drip::load_weights(hm_weights);
            const drip::Tensor4 x =
                drip::preprocess(drip::read_ppm(hm_frame), net.config().input_size);
            const auto grids = net.forward(x);
            drip::emit_heatmap(grids[0], hm_out);
            std::cout << "wrote " << hm_out << "_s0.pgm and " << hm_out << "_s1.pgm\n";
        }
    } catch (const drip::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const drip::ParamError& e) {
        std::cerr << "bad argument: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
