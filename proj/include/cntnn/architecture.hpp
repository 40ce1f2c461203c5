#pragma once

#include "cntnn/activation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cntnn {

enum class ArchKind { FC, CNN, RNN, AE };
enum class LayerKind { Dense, Conv2d, Recurrent };
enum class Task { Classification, Reconstruction };

inline std::string to_string(ArchKind k) {
    switch (k) {
    case ArchKind::FC: return "fc";
    case ArchKind::CNN: return "cnn";
    case ArchKind::RNN: return "rnn";
    case ArchKind::AE: return "ae";
    }
    return "?";
}

inline ArchKind parse_arch_kind(std::string_view s) {
    if (s == "fc") return ArchKind::FC;
    if (s == "cnn") return ArchKind::CNN;
    if (s == "rnn") return ArchKind::RNN;
    if (s == "ae") return ArchKind::AE;
    throw std::invalid_argument("unknown architecture '" + std::string(s) +
                                "' (expected fc, cnn, rnn or ae)");
}

inline std::string to_string(LayerKind k) {
    switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Recurrent: return "recurrent";
    }
    return "?";
}

inline LayerKind parse_layer_kind(std::string_view s) {
    if (s == "dense") return LayerKind::Dense;
    if (s == "conv2d") return LayerKind::Conv2d;
    if (s == "recurrent") return LayerKind::Recurrent;
    throw std::invalid_argument("unknown layer kind '" + std::string(s) + "'");
}

inline std::string to_string(Task t) {
    return t == Task::Classification ? "classification" : "reconstruction";
}

inline Task parse_task(std::string_view s) {
    if (s == "classification") return Task::Classification;
    if (s == "reconstruction") return Task::Reconstruction;
    throw std::invalid_argument("unknown task '" + std::string(s) + "'");
}

/// Image geometry of a flattened, channel-major input.
struct Geometry {
    int channels = 1;
    int height = 1;
    int width = 1;

    int size() const { return channels * height * width; }
    bool operator==(const Geometry&) const = default;
};

/// One parameterized layer.
///
/// dense:     fan_in -> fan_out neurons.
/// conv2d:    valid-padding square kernel over a channel-major input volume;
///            fan_in = in_channels*in_height*in_width,
///            fan_out = out_channels*out_height*out_width.
/// recurrent: fan_in features per step, fan_out hidden units, consumed over
///            time_steps steps; the layer reads time_steps*fan_in values and
///            emits the final hidden state.
struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    int fan_in = 0;
    int fan_out = 0;
    int kernel_size = 0;
    int stride = 1;
    int time_steps = 0;
    Geometry input{};  // conv only
    int out_channels = 0; // conv only

    int out_height() const { return (input.height - kernel_size) / stride + 1; }
    int out_width() const { return (input.width - kernel_size) / stride + 1; }
    int positions() const { return out_height() * out_width(); }
    int patch_size() const { return input.channels * kernel_size * kernel_size; }

    /// Width of the vector this layer consumes per sample.
    int input_width() const { return kind == LayerKind::Recurrent ? time_steps * fan_in : fan_in; }
    /// Width of the vector this layer hands to the next layer.
    int output_width() const { return fan_out; }
    /// Width of one traced row (recurrent layers trace every step).
    int trace_width() const { return kind == LayerKind::Recurrent ? time_steps * fan_out : fan_out; }

    bool operator==(const LayerSpec&) const = default;
};

inline LayerSpec dense_layer(int fan_in, int fan_out) {
    LayerSpec l;
    l.kind = LayerKind::Dense;
    l.fan_in = fan_in;
    l.fan_out = fan_out;
    return l;
}

inline LayerSpec conv_layer(Geometry in, int out_channels, int kernel_size, int stride) {
    LayerSpec l;
    l.kind = LayerKind::Conv2d;
    l.input = in;
    l.out_channels = out_channels;
    l.kernel_size = kernel_size;
    l.stride = stride;
    l.fan_in = in.size();
    if (kernel_size > 0 && stride > 0 && kernel_size <= std::min(in.height, in.width))
        l.fan_out = out_channels * l.positions();
    return l;
}

inline LayerSpec recurrent_layer(int features, int hidden, int time_steps) {
    LayerSpec l;
    l.kind = LayerKind::Recurrent;
    l.fan_in = features;
    l.fan_out = hidden;
    l.time_steps = time_steps;
    return l;
}

struct ArchitectureSpec {
    ArchKind kind = ArchKind::FC;
    std::vector<LayerSpec> layers;
    Activation activation = Activation::Sigmoid;
    Task task = Task::Classification;

    int depth() const { return static_cast<int>(layers.size()); }
    int input_width() const { return layers.front().input_width(); }
    int output_width() const { return layers.back().output_width(); }

    /// Hidden layers use the spec activation; the output layer is linear.
    Activation layer_activation(int layer) const {
        return layer + 1 == depth() ? Activation::Linear : activation;
    }

    bool operator==(const ArchitectureSpec&) const = default;
};

/// Throws std::invalid_argument naming the offending layer (pair).
inline void validate(const ArchitectureSpec& spec) {
    if (spec.layers.empty()) throw std::invalid_argument("architecture has no layers");
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
        if (l.fan_in <= 0 || l.fan_out <= 0)
            throw std::invalid_argument(where + ": fan_in and fan_out must be positive");
        switch (l.kind) {
        case LayerKind::Dense:
            break;
        case LayerKind::Conv2d:
            if (l.kernel_size <= 0 || l.stride <= 0 || l.out_channels <= 0)
                throw std::invalid_argument(where + ": kernel_size, stride and out_channels must be positive");
            if (l.kernel_size > std::min(l.input.height, l.input.width))
                throw std::invalid_argument(where + ": kernel " + std::to_string(l.kernel_size) +
                                            " exceeds input " + std::to_string(l.input.height) + "x" +
                                            std::to_string(l.input.width));
            if (l.fan_in != l.input.size())
                throw std::invalid_argument(where + ": fan_in does not match input geometry");
            if (l.fan_out != l.out_channels * l.positions())
                throw std::invalid_argument(where + ": fan_out does not match out_channels x output size");
            break;
        case LayerKind::Recurrent:
            if (l.time_steps < 1) throw std::invalid_argument(where + ": time_steps must be >= 1");
            break;
        }
        if (i + 1 < spec.layers.size()) {
            const auto& next = spec.layers[i + 1];
            const std::string pair = "layers " + std::to_string(i) + " -> " + std::to_string(i + 1);
            if (l.output_width() != next.input_width())
                throw std::invalid_argument(pair + ": fan_out " + std::to_string(l.output_width()) +
                                            " does not match fan_in " + std::to_string(next.input_width()));
            if (l.kind == LayerKind::Conv2d && next.kind == LayerKind::Conv2d &&
                (next.input.channels != l.out_channels || next.input.height != l.out_height() ||
                 next.input.width != l.out_width()))
                throw std::invalid_argument(pair + ": conv output geometry does not match next conv input");
        }
    }
    if (spec.kind == ArchKind::AE) {
        if (spec.task != Task::Reconstruction)
            throw std::invalid_argument("AE architecture must use the reconstruction task");
        std::vector<int> widths{spec.layers.front().fan_in};
        for (const auto& l : spec.layers) {
            if (l.kind != LayerKind::Dense) throw std::invalid_argument("AE layers must be dense");
            widths.push_back(l.fan_out);
        }
        for (std::size_t i = 0; i < widths.size(); ++i)
            if (widths[i] != widths[widths.size() - 1 - i])
                throw std::invalid_argument("AE widths are not symmetric around the bottleneck");
        if (widths.size() < 3) throw std::invalid_argument("AE needs at least one hidden layer");
        const int bottleneck = *std::min_element(widths.begin() + 1, widths.end() - 1);
        if (bottleneck >= widths.front())
            throw std::invalid_argument("AE bottleneck must be strictly narrower than the input");
    }
    if (spec.task == Task::Reconstruction && spec.output_width() != spec.input_width())
        throw std::invalid_argument("reconstruction output width must equal input width");
}

/// Default architectures. `depth` counts parameterized layers for FC and CNN,
/// and neuron layers (input and output included) for AE. RNN ignores it: one
/// recurrent layer plus a dense head.
struct DefaultSpecOptions {
    ArchKind kind = ArchKind::FC;
    int depth = 3;
    Activation activation = Activation::Sigmoid;
    Geometry geometry{1, 28, 28};
    int classes = 10;
    std::vector<int> hidden_widths; // overrides the FC/AE hidden widths when non-empty
    int rnn_hidden = 128;
};

inline std::vector<int> default_fc_hidden(int depth, int classes) {
    if (depth == 3) return {128, 64};
    std::vector<int> h;
    for (int k = 0; k + 1 < depth; ++k) {
        const double frac = static_cast<double>(k) / (depth - 1);
        h.push_back(std::max(1, static_cast<int>(std::lround(128.0 * std::pow(classes / 128.0, frac)))));
    }
    return h;
}

inline std::vector<int> default_ae_encoder(int depth) {
    switch (depth) {
    case 3: return {64};
    case 5: return {128, 32};
    case 7: return {256, 128, 32};
    case 9: return {256, 128, 64, 32};
    default: break;
    }
    if (depth < 3 || depth % 2 == 0)
        throw std::invalid_argument("AE depth must be odd and >= 3, got " + std::to_string(depth));
    std::vector<int> enc;
    int w = 256;
    for (int i = 0; i < (depth - 1) / 2; ++i) {
        enc.push_back(std::max(8, w));
        w /= 2;
    }
    return enc;
}

inline ArchitectureSpec default_spec(const DefaultSpecOptions& o) {
    ArchitectureSpec spec;
    spec.kind = o.kind;
    spec.activation = o.activation;
    spec.task = o.kind == ArchKind::AE ? Task::Reconstruction : Task::Classification;
    const int d = o.geometry.size();
    switch (o.kind) {
    case ArchKind::FC: {
        if (o.depth < 1) throw std::invalid_argument("FC depth must be >= 1");
        std::vector<int> hidden = o.hidden_widths.empty() ? default_fc_hidden(o.depth, o.classes) : o.hidden_widths;
        if (static_cast<int>(hidden.size()) != o.depth - 1)
            throw std::invalid_argument("FC hidden_widths must list depth-1 widths");
        int prev = d;
        for (int w : hidden) {
            spec.layers.push_back(dense_layer(prev, w));
            prev = w;
        }
        spec.layers.push_back(dense_layer(prev, o.classes));
        break;
    }
    case ArchKind::AE: {
        std::vector<int> enc = o.hidden_widths.empty() ? default_ae_encoder(o.depth) : o.hidden_widths;
        std::vector<int> widths{d};
        widths.insert(widths.end(), enc.begin(), enc.end());
        for (auto it = enc.rbegin() + 1; it != enc.rend(); ++it) widths.push_back(*it);
        widths.push_back(d);
        for (std::size_t i = 0; i + 1 < widths.size(); ++i)
            spec.layers.push_back(dense_layer(widths[i], widths[i + 1]));
        break;
    }
    case ArchKind::CNN: {
        if (o.depth < 2) throw std::invalid_argument("CNN depth must be >= 2");
        Geometry g = o.geometry;
        int channels = 8;
        for (int i = 0; i + 1 < o.depth; ++i) {
            const int stride = (i % 2 == 0) ? 1 : 2;
            auto l = conv_layer(g, channels, 3, stride);
            if (l.kernel_size > std::min(g.height, g.width))
                throw std::invalid_argument("CNN depth " + std::to_string(o.depth) + " too deep for " +
                                            std::to_string(o.geometry.height) + "x" +
                                            std::to_string(o.geometry.width) + " inputs");
            spec.layers.push_back(l);
            g = Geometry{channels, l.out_height(), l.out_width()};
            if (i % 2 == 0) channels *= 2;
        }
        spec.layers.push_back(dense_layer(g.size(), o.classes));
        break;
    }
    case ArchKind::RNN: {
        // one image row per step, channels of the row concatenated
        const int features = o.geometry.channels * o.geometry.width;
        spec.layers.push_back(recurrent_layer(features, o.rnn_hidden, o.geometry.height));
        spec.layers.push_back(dense_layer(o.rnn_hidden, o.classes));
        break;
    }
    }
    validate(spec);
    return spec;
}

} // namespace cntnn
