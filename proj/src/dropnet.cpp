#include "drip/dropnet.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "drip/binio.hpp"

namespace drip {

namespace {

NetConfig stacked_config(int input_size, int grid_size, std::uint32_t seed,
                         const std::vector<int>& channels) {
    // channels: output width of the five hidden conv stages
    NetConfig cfg;
    cfg.input_size = input_size;
    cfg.grid_size = grid_size;
    cfg.seed = seed;
    int in = 3;
    for (std::size_t stage = 0; stage < channels.size(); ++stage) {
        cfg.layers.push_back(LayerSpec::conv(5, in, channels[stage]));
        cfg.layers.push_back(LayerSpec::batch_norm());
        cfg.layers.push_back(LayerSpec::leaky_relu());
        if (stage >= 3) cfg.layers.push_back(LayerSpec::dropout(0.2f));
        if (stage < 4) cfg.layers.push_back(LayerSpec::max_pool());
        in = channels[stage];
    }
    cfg.layers.push_back(LayerSpec::conv(1, in, 2));
    cfg.layers.push_back(LayerSpec::sigmoid());
    return cfg;
}

}  // namespace

NetConfig NetConfig::reference(std::uint32_t seed) {
    return stacked_config(416, 26, seed, {16, 32, 64, 128, 256});
}

NetConfig NetConfig::desk(std::uint32_t seed) {
    return stacked_config(128, 8, seed, {6, 12, 24, 48, 64});
}

void NetConfig::validate() const {
    auto fail = [](const std::string& rule, const std::string& detail) {
        throw ConfigError("net config violates '" + rule + "': " + detail);
    };
    if (input_size < 1 || grid_size < 1) fail("grid_divides_input", "sizes must be positive");
    if (input_size % grid_size != 0)
        fail("grid_divides_input", "W=" + std::to_string(input_size) + " not divisible by S=" +
                                       std::to_string(grid_size));
    int pools = 0;
    for (const auto& l : layers)
        if (l.kind == LayerSpec::Kind::MaxPool) ++pools;
    const int want_factor = input_size / grid_size;
    if (pools > 30 || (1 << pools) != want_factor)
        fail("pool_downsampling", "2^" + std::to_string(pools) + " pools != W/S = " +
                                      std::to_string(want_factor));
    if (layers.size() < 2) fail("final_layer", "stack too short");
    const LayerSpec& last_conv = layers[layers.size() - 2];
    const LayerSpec& last_act = layers.back();
    if (last_conv.kind != LayerSpec::Kind::Conv || last_conv.kernel != 1 || last_conv.out_ch != 2 ||
        last_act.kind != LayerSpec::Kind::Sigmoid)
        fail("final_layer", "stack must end with a 1x1 conv to 2 channels followed by sigmoid");

    // conv chain: channel bookkeeping, kernel sizes, activations
    int channels = 3;
    int prev_out = 0;
    std::size_t last_conv_idx = 0;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerSpec::Kind::Conv) last_conv_idx = i;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.kind != LayerSpec::Kind::Conv) continue;
        if (l.in_ch != channels)
            fail("channel_chain", "conv at layer " + std::to_string(i) + " expects in=" +
                                      std::to_string(l.in_ch) + " but gets " + std::to_string(channels));
        const bool hidden = i != last_conv_idx;
        if (hidden) {
            if (l.kernel != 5)
                fail("hidden_conv_kernel", "hidden convolutions must use 5x5 kernels");
            if (prev_out > l.out_ch)
                fail("channel_monotonic", "hidden conv channel counts must be nondecreasing");
            int lrelu = 0;
            for (std::size_t j = i + 1; j < layers.size() && layers[j].kind != LayerSpec::Kind::Conv; ++j) {
                if (layers[j].kind == LayerSpec::Kind::LeakyRelu) ++lrelu;
                if (layers[j].kind == LayerSpec::Kind::Sigmoid)
                    fail("hidden_conv_activation", "sigmoid is reserved for the output layer");
            }
            if (lrelu != 1)
                fail("hidden_conv_activation", "each hidden conv needs exactly one leaky ReLU");
            prev_out = l.out_ch;
        }
        channels = l.out_ch;
    }
    for (const auto& l : layers)
        if (l.kind == LayerSpec::Kind::Dropout && !(l.rate >= 0.0f && l.rate < 1.0f))
            fail("dropout_rate", "rate must be in [0,1)");
}

nlohmann::json NetConfig::to_json() const {
    nlohmann::json j;
    j["input_size"] = input_size;
    j["grid_size"] = grid_size;
    j["seed"] = seed;
    auto& arr = j["layers"] = nlohmann::json::array();
    for (const auto& l : layers) {
        nlohmann::json e;
        switch (l.kind) {
            case LayerSpec::Kind::Conv:
                e = {{"type", "conv"}, {"k", l.kernel}, {"in", l.in_ch}, {"out", l.out_ch}};
                break;
            case LayerSpec::Kind::BatchNorm: e = {{"type", "batch_norm"}}; break;
            case LayerSpec::Kind::LeakyRelu: e = {{"type", "leaky_relu"}}; break;
            case LayerSpec::Kind::Sigmoid: e = {{"type", "sigmoid"}}; break;
            case LayerSpec::Kind::MaxPool: e = {{"type", "max_pool"}}; break;
            case LayerSpec::Kind::Dropout: e = {{"type", "dropout"}, {"rate", l.rate}}; break;
        }
        arr.push_back(std::move(e));
    }
    return j;
}

NetConfig NetConfig::from_json(const nlohmann::json& j) {
    NetConfig cfg;
    cfg.input_size = j.at("input_size").get<int>();
    cfg.grid_size = j.at("grid_size").get<int>();
    cfg.seed = j.value("seed", 1u);
    cfg.layers.clear();
    for (const auto& e : j.at("layers")) {
        const std::string type = e.at("type").get<std::string>();
        if (type == "conv")
            cfg.layers.push_back(LayerSpec::conv(e.at("k").get<int>(), e.at("in").get<int>(),
                                                 e.at("out").get<int>()));
        else if (type == "batch_norm") cfg.layers.push_back(LayerSpec::batch_norm());
        else if (type == "leaky_relu") cfg.layers.push_back(LayerSpec::leaky_relu());
        else if (type == "sigmoid") cfg.layers.push_back(LayerSpec::sigmoid());
        else if (type == "max_pool") cfg.layers.push_back(LayerSpec::max_pool());
        else if (type == "dropout") cfg.layers.push_back(LayerSpec::dropout(e.at("rate").get<float>()));
        else throw FormatError("unknown layer type in config: " + type);
    }
    return cfg;
}

namespace {
constexpr char kMagic[4] = {'D', 'R', 'P', 'W'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_weights(DropNet& net, const std::string& path) {
    std::ostringstream body(std::ios::binary);
    body.write(kMagic, 4);
    binio::put_u32(body, kVersion);
    const std::string cfg_json = net.config().to_json().dump();
    binio::put_u32(body, static_cast<std::uint32_t>(cfg_json.size()));
    binio::put_bytes(body, cfg_json.data(), cfg_json.size());
    auto slots = net.stack().param_slots(true);
    binio::put_u32(body, static_cast<std::uint32_t>(slots.size()));
    for (const auto& s : slots) {
        binio::put_u32(body, static_cast<std::uint32_t>(s.name.size()));
        binio::put_bytes(body, s.name.data(), s.name.size());
        binio::put_u8(body, static_cast<std::uint8_t>(s.shape.size()));
        for (int d : s.shape) binio::put_u32(body, static_cast<std::uint32_t>(d));
        binio::put_bytes(body, s.value->data(), s.value->size() * sizeof(float));
    }
    const std::string payload = body.str();
    const std::uint32_t crc = binio::crc32(payload.data(), payload.size());

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    binio::put_u32(f, crc);
    if (!f) throw IoError("short write: " + path);
}

DropNet load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    const std::string all = buf.str();
    if (all.size() < 4 + 4 + 4 + 4 + 4) throw IoError("truncated weight file: " + path);

    const std::string payload = all.substr(0, all.size() - 4);
    std::istringstream in(payload, std::ios::binary);
    char magic[4] = {};
    binio::get_bytes(in, magic, 4);
    if (std::string(magic, 4) != std::string(kMagic, 4))
        throw FormatError("bad magic in weight file: " + path);
    const std::uint32_t version = binio::get_u32(in);
    if (version != kVersion)
        throw FormatError("unsupported weight file version " + std::to_string(version));

    const std::uint32_t json_len = binio::get_u32(in);
    if (json_len > payload.size()) throw FormatError("config blob overruns file: " + path);
    std::string cfg_json(json_len, '\0');
    binio::get_bytes(in, cfg_json.data(), json_len);
    NetConfig cfg;
    try {
        cfg = NetConfig::from_json(nlohmann::json::parse(cfg_json));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad config blob: ") + e.what());
    }

    DropNet net = DropNet::build(cfg);
    auto slots = net.stack().param_slots(true);
    const std::uint32_t count = binio::get_u32(in);
    if (count != slots.size())
        throw FormatError("weight file declares " + std::to_string(count) + " arrays, net has " +
                          std::to_string(slots.size()));
    for (auto& s : slots) {
        const std::uint32_t name_len = binio::get_u32(in);
        if (name_len > 4096) throw FormatError("unreasonable array name length");
        std::string name(name_len, '\0');
        binio::get_bytes(in, name.data(), name_len);
        if (name != s.name) throw FormatError("array order mismatch: got '" + name + "', want '" + s.name + "'");
        const std::uint8_t rank = binio::get_u8(in);
        if (rank != s.shape.size()) throw FormatError("rank mismatch on " + name);
        std::size_t total = 1;
        for (int r = 0; r < rank; ++r) {
            const std::uint32_t d = binio::get_u32(in);
            if (d != static_cast<std::uint32_t>(s.shape[r]))
                throw FormatError("shape table mismatch on " + name);
            total *= d;
        }
        if (total != s.value->size()) throw FormatError("element count mismatch on " + name);
        binio::get_bytes(in, s.value->data(), total * sizeof(float));
    }
    // nothing may remain between the last array and the CRC trailer
    in.peek();
    if (!in.eof()) throw FormatError("trailing bytes after weight arrays: " + path);

    // checked last so that a short file reads as truncation, not corruption
    std::uint32_t stored_crc = 0;
    std::memcpy(&stored_crc, all.data() + all.size() - 4, 4);
    if (binio::crc32(payload.data(), payload.size()) != stored_crc)
        throw FormatError("weight file CRC mismatch: " + path);
    return net;
}

}  // namespace drip
