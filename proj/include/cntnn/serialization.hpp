#pragma once

// JSON documents for specs, training configs and networks. Doubles are written
// in their shortest round-trip decimal form (at most 17 significant digits),
// so export followed by import reproduces every parameter bit for bit.

#include "cntnn/network.hpp"
#include "cntnn/train.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cntnn {

using json = nlohmann::json;

/// Schema violation in an imported document; the message names the field.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline const json& field(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(path + "." + key + ": missing field");
    return *it;
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& path) {
    const json& v = field(j, key, path);
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw SchemaError(path + "." + key + ": wrong type (" + std::string(v.type_name()) + ")");
    }
}

inline std::vector<double> flat(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

inline Matrix unflat(const json& j, const std::string& key, Index rows, Index cols, const std::string& path) {
    const auto v = get_as<std::vector<double>>(j, key, path);
    if (Index(v.size()) != rows * cols)
        throw SchemaError(path + "." + key + ": expected " + std::to_string(rows * cols) + " values for shape " +
                          shape_str(rows, cols) + ", found " + std::to_string(v.size()));
    Matrix m(rows, cols);
    std::copy(v.begin(), v.end(), m.data());
    return m;
}

} // namespace detail

inline json to_json(const LayerSpec& l) {
    json j{{"kind", to_string(l.kind)}, {"fan_in", l.fan_in}, {"fan_out", l.fan_out}};
    if (l.kind == LayerKind::Conv2d) {
        j["kernel_size"] = l.kernel_size;
        j["stride"] = l.stride;
        j["out_channels"] = l.out_channels;
        j["input"] = {l.input.channels, l.input.height, l.input.width};
    }
    if (l.kind == LayerKind::Recurrent) j["time_steps"] = l.time_steps;
    return j;
}

inline LayerSpec layer_spec_from_json(const json& j, const std::string& path) {
    LayerSpec l;
    try {
        l.kind = parse_layer_kind(detail::get_as<std::string>(j, "kind", path));
    } catch (const std::invalid_argument& e) {
        throw SchemaError(path + ".kind: " + e.what());
    }
    l.fan_in = detail::get_as<int>(j, "fan_in", path);
    l.fan_out = detail::get_as<int>(j, "fan_out", path);
    if (l.kind == LayerKind::Conv2d) {
        l.kernel_size = detail::get_as<int>(j, "kernel_size", path);
        l.stride = detail::get_as<int>(j, "stride", path);
        l.out_channels = detail::get_as<int>(j, "out_channels", path);
        const auto g = detail::get_as<std::vector<int>>(j, "input", path);
        if (g.size() != 3) throw SchemaError(path + ".input: expected [channels, height, width]");
        l.input = {g[0], g[1], g[2]};
    }
    if (l.kind == LayerKind::Recurrent) l.time_steps = detail::get_as<int>(j, "time_steps", path);
    return l;
}

inline json to_json(const ArchitectureSpec& s) {
    json layers = json::array();
    for (const auto& l : s.layers) layers.push_back(to_json(l));
    return {{"kind", to_string(s.kind)},
            {"activation", to_string(s.activation)},
            {"task", to_string(s.task)},
            {"layers", layers}};
}

inline ArchitectureSpec spec_from_json(const json& j, const std::string& path = "spec") {
    ArchitectureSpec s;
    try {
        s.kind = parse_arch_kind(detail::get_as<std::string>(j, "kind", path));
        s.activation = parse_activation(detail::get_as<std::string>(j, "activation", path));
        s.task = parse_task(detail::get_as<std::string>(j, "task", path));
    } catch (const std::invalid_argument& e) {
        throw SchemaError(path + ": " + e.what());
    }
    const json& layers = detail::field(j, "layers", path);
    if (!layers.is_array()) throw SchemaError(path + ".layers: expected an array");
    for (std::size_t i = 0; i < layers.size(); ++i)
        s.layers.push_back(layer_spec_from_json(layers[i], path + ".layers[" + std::to_string(i) + "]"));
    try {
        validate(s);
    } catch (const std::invalid_argument& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return s;
}

inline json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"momentum", c.momentum}, {"batch_size", c.batch_size},
            {"epochs", c.epochs},               {"loss", to_string(c.loss)}, {"init_std", c.init_std},
            {"seed", c.seed}};
}

inline json to_json(const TrainReport& r) {
    return {{"epoch_loss", r.epoch_loss}, {"final_metric", r.final_metric}};
}

inline json to_json(const Network& net) {
    json layers = json::array();
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const auto& p = net.params[i];
        json l{{"kind", to_string(net.spec.layers[i].kind)},
               {"shape", {p.weights.rows(), p.weights.cols()}},
               {"weights", detail::flat(p.weights)},
               {"bias", std::vector<double>(p.bias.data(), p.bias.data() + p.bias.size())}};
        if (p.recurrent.size() > 0) {
            l["recurrent_shape"] = {p.recurrent.rows(), p.recurrent.cols()};
            l["recurrent"] = detail::flat(p.recurrent);
        }
        layers.push_back(std::move(l));
    }
    return {{"format", "cntnn-network"},
            {"version", 1},
            {"spec", to_json(net.spec)},
            {"seed", net.seed},
            {"init_std", net.init_std},
            {"trained", net.trained},
            {"layers", layers}};
}

inline Network network_from_json(const json& j) {
    Network net;
    net.spec = spec_from_json(detail::field(j, "spec", "network"), "network.spec");
    net.seed = detail::get_as<std::uint64_t>(j, "seed", "network");
    net.init_std = detail::get_as<double>(j, "init_std", "network");
    net.trained = detail::get_as<bool>(j, "trained", "network");
    const json& layers = detail::field(j, "layers", "network");
    if (!layers.is_array() || layers.size() != net.spec.layers.size())
        throw SchemaError("network.layers: expected " + std::to_string(net.spec.layers.size()) + " layer entries");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string path = "network.layers[" + std::to_string(i) + "]";
        const auto& lj = layers[i];
        const auto& ls = net.spec.layers[i];
        const auto expect = param_shape(ls);
        if (detail::get_as<std::string>(lj, "kind", path) != to_string(ls.kind))
            throw SchemaError(path + ".kind: does not match spec layer kind " + to_string(ls.kind));
        const auto shape = detail::get_as<std::vector<Index>>(lj, "shape", path);
        if (shape.size() != 2 || shape[0] != expect.weight_rows || shape[1] != expect.weight_cols)
            throw SchemaError(path + ".shape: expected " + shape_str(expect.weight_rows, expect.weight_cols) +
                              " for layer " + std::to_string(i));
        LayerParams p;
        p.weights = detail::unflat(lj, "weights", expect.weight_rows, expect.weight_cols, path);
        const auto bias = detail::get_as<std::vector<double>>(lj, "bias", path);
        if (Index(bias.size()) != expect.bias)
            throw SchemaError(path + ".bias: expected " + std::to_string(expect.bias) + " values, found " +
                              std::to_string(bias.size()));
        p.bias = Eigen::Map<const Vector>(bias.data(), Index(bias.size()));
        if (expect.recurrent_rows > 0) {
            const auto rshape = detail::get_as<std::vector<Index>>(lj, "recurrent_shape", path);
            if (rshape.size() != 2 || rshape[0] != expect.recurrent_rows || rshape[1] != expect.recurrent_cols)
                throw SchemaError(path + ".recurrent_shape: expected " +
                                  shape_str(expect.recurrent_rows, expect.recurrent_cols) + " for layer " +
                                  std::to_string(i));
            p.recurrent = detail::unflat(lj, "recurrent", expect.recurrent_rows, expect.recurrent_cols, path);
        }
        if (!p.all_finite()) throw SchemaError(path + ": non-finite parameter values");
        net.params.push_back(std::move(p));
    }
    return net;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

inline json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

inline void export_network(const Network& net, const std::filesystem::path& path) {
    write_text(path, to_json(net).dump() + "\n");
}

inline Network import_network(const std::filesystem::path& path) { return network_from_json(read_json(path)); }

} // namespace cntnn
