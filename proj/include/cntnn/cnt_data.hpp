#pragma once

// Data-dependent metrics: neuron strength (the pre-activation a neuron reaches
// for inputs sampled from the training distribution) and neuron activation
// (its image under the layer's activation function).
//
// Each layer kind has its own evaluation route, kept separate from the
// training engine's batched kernels:
//   dense      explicit per-neuron dot products over the traced input
//   conv2d     patch isolation: one (input patch . kernel) product per output
//              neuron, linear memory, no Toeplitz matrix
//   recurrent  explicit temporal unfolding from a zero initial hidden state

#include "cntnn/datasets.hpp"
#include "cntnn/forward.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cntnn {

enum class NeuronMetricKind { Strength, Activation };

/// values: [samples x neurons]; recurrent layers: [samples x time_steps*width],
/// step-major within a row.
struct NeuronMetricMatrix {
    int layer = 0;
    NeuronMetricKind kind = NeuronMetricKind::Strength;
    Matrix values;
    int time_steps = 1;
    std::uint64_t sample_seed = 0;

    Index width() const { return values.cols() / time_steps; }
};

struct StrengthHeatmap {
    Matrix grid; // [height x width], mean |strength| attributed to each input position
    bool trained = false;
};

namespace detail {

inline void check_layer(const Network& net, int layer) {
    if (layer < 0 || layer >= net.depth())
        throw std::invalid_argument("layer " + std::to_string(layer) + " out of range [0, " +
                                    std::to_string(net.depth()) + ")");
}

inline void check_samples(const Network& net, const SampleBatch& samples) {
    if (samples.inputs.cols() != net.spec.input_width())
        throw std::invalid_argument("sample dimension " + std::to_string(samples.inputs.cols()) +
                                    " does not match network input width " +
                                    std::to_string(net.spec.input_width()));
}

/// Input the layer sees for each sample, taken from a traced forward pass.
inline Matrix layer_input(const Network& net, const SampleBatch& samples, int layer) {
    check_samples(net, samples);
    if (layer == 0) return samples.inputs;
    ForwardTrace trace;
    trace.inputs = samples.inputs;
    for (int i = 0; i < layer; ++i) {
        const Matrix in = layer_output(net.spec, trace, i - 1);
        trace.layers.push_back(layer_forward(net.spec.layers[i], net.params[i], net.spec.layer_activation(i), in));
    }
    return layer_output(net.spec, trace, layer - 1);
}

inline Matrix dense_strength(const LayerParams& p, const Matrix& in) {
    const Index n_in = p.weights.rows(), n_out = p.weights.cols();
    Matrix out(in.rows(), n_out);
    for (Index s = 0; s < in.rows(); ++s)
        for (Index k = 0; k < n_out; ++k) {
            double acc = 0.0;
            for (Index i = 0; i < n_in; ++i) acc += in(s, i) * p.weights(i, k);
            out(s, k) = acc + p.bias(k);
        }
    return out;
}

inline Matrix conv_patch_strength(const LayerSpec& l, const LayerParams& p, const Matrix& in) {
    const int m = l.kernel_size, st = l.stride, oh = l.out_height(), ow = l.out_width();
    const int C = l.input.channels, H = l.input.height, W = l.input.width;
    const Index P = l.positions();
    Matrix out(in.rows(), l.fan_out);
    for (Index s = 0; s < in.rows(); ++s) {
        const double* x = in.row(s).data();
        for (int k = 0; k < l.out_channels; ++k)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int c = 0; c < C; ++c)
                        for (int dy = 0; dy < m; ++dy)
                            for (int dx = 0; dx < m; ++dx)
                                acc += x[c * H * W + (oy * st + dy) * W + ox * st + dx] *
                                       p.weights(k, (c * m + dy) * m + dx);
                    out(s, k * P + oy * ow + ox) = acc + p.bias(k);
                }
    }
    return out;
}

/// zeta(t) = x(t) W + b + h(t) U, h(1) = 0, h(t+1) = f(zeta(t)).
inline Matrix unfolded_strength(const LayerSpec& l, const LayerParams& p, Activation f, const Matrix& in) {
    const Index F = l.fan_in, H = l.fan_out, T = l.time_steps;
    Matrix out(in.rows(), T * H);
    std::vector<double> h(static_cast<std::size_t>(H)), next(static_cast<std::size_t>(H));
    for (Index s = 0; s < in.rows(); ++s) {
        std::fill(h.begin(), h.end(), 0.0);
        for (Index t = 0; t < T; ++t) {
            for (Index k = 0; k < H; ++k) {
                double acc = p.bias(k);
                for (Index i = 0; i < F; ++i) acc += in(s, t * F + i) * p.weights(i, k);
                for (Index j = 0; j < H; ++j) acc += h[j] * p.recurrent(j, k);
                out(s, t * H + k) = acc;
                next[k] = activate(f, acc);
            }
            h.swap(next);
        }
    }
    return out;
}

} // namespace detail

/// Neuron strength of every neuron produced by `layer`, for every sample.
inline NeuronMetricMatrix neuron_strength(const Network& net, const SampleBatch& samples, int layer) {
    detail::check_layer(net, layer);
    const auto& l = net.spec.layers[layer];
    const auto& p = net.params[layer];
    const Matrix in = detail::layer_input(net, samples, layer);
    NeuronMetricMatrix r;
    r.layer = layer;
    r.sample_seed = samples.seed;
    switch (l.kind) {
    case LayerKind::Dense: r.values = detail::dense_strength(p, in); break;
    case LayerKind::Conv2d: r.values = detail::conv_patch_strength(l, p, in); break;
    case LayerKind::Recurrent:
        r.values = detail::unfolded_strength(l, p, net.spec.layer_activation(layer), in);
        r.time_steps = l.time_steps;
        break;
    }
    return r;
}

inline NeuronMetricMatrix neuron_activation(const NeuronMetricMatrix& strength, Activation f) {
    NeuronMetricMatrix r = strength;
    r.kind = NeuronMetricKind::Activation;
    r.values = activate(f, strength.values);
    return r;
}

inline NeuronMetricMatrix neuron_activation(const Network& net, const SampleBatch& samples, int layer) {
    return neuron_activation(neuron_strength(net, samples, layer), net.spec.layer_activation(layer));
}

/// Patch-isolation strength of a convolutional layer, laid out as
/// out-channel x out-row x out-column per sample.
inline NeuronMetricMatrix conv_neuron_strength(const Network& net, const SampleBatch& samples, int layer) {
    detail::check_layer(net, layer);
    if (net.spec.layers[layer].kind != LayerKind::Conv2d)
        throw std::invalid_argument("conv_neuron_strength: layer " + std::to_string(layer) + " is " +
                                    to_string(net.spec.layers[layer].kind) + ", not conv2d");
    return neuron_strength(net, samples, layer);
}

/// Reference convolution through an explicit doubly-blocked Toeplitz matrix
/// [fan_out x fan_in]. Quadratic memory; meant for small inputs in tests.
inline Vector conv_toeplitz_oracle(const LayerSpec& l, const LayerParams& p, const Vector& input) {
    if (l.kind != LayerKind::Conv2d) throw std::invalid_argument("conv_toeplitz_oracle: not a conv layer");
    if (l.kernel_size > std::min(l.input.height, l.input.width))
        throw std::invalid_argument("conv_toeplitz_oracle: kernel larger than input");
    if (input.size() != l.input.size()) throw std::invalid_argument("conv_toeplitz_oracle: input size mismatch");
    const int m = l.kernel_size, st = l.stride, oh = l.out_height(), ow = l.out_width();
    const int H = l.input.height, W = l.input.width;
    const Index P = Index(oh) * ow;
    Matrix toeplitz = Matrix::Zero(l.out_channels * P, l.input.size());
    Vector bias(l.out_channels * P);
    for (int k = 0; k < l.out_channels; ++k)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const Index row = k * P + oy * ow + ox;
                bias(row) = p.bias(k);
                for (int c = 0; c < l.input.channels; ++c)
                    for (int dy = 0; dy < m; ++dy)
                        for (int dx = 0; dx < m; ++dx)
                            toeplitz(row, c * H * W + (oy * st + dy) * W + ox * st + dx) =
                                p.weights(k, (c * m + dy) * m + dx);
            }
    return toeplitz * input + bias;
}

inline int first_recurrent_layer(const Network& net) {
    for (int i = 0; i < net.depth(); ++i)
        if (net.spec.layers[i].kind == LayerKind::Recurrent) return i;
    return -1;
}

/// Per-step strengths of the first recurrent layer, by explicit unfolding.
inline NeuronMetricMatrix rnn_unfolded_strength(const Network& net, const SampleBatch& samples) {
    const int layer = first_recurrent_layer(net);
    if (layer < 0) throw std::invalid_argument("rnn_unfolded_strength: network has no recurrent layer");
    const auto& l = net.spec.layers[layer];
    if (samples.inputs.cols() != net.spec.input_width() || (layer == 0 && samples.inputs.cols() != l.time_steps * l.fan_in))
        throw std::invalid_argument("rnn_unfolded_strength: samples lack the expected time axis (" +
                                    std::to_string(l.time_steps) + " steps x " + std::to_string(l.fan_in) +
                                    " features)");
    return neuron_strength(net, samples, layer);
}

/// Mean |strength| per time step, attributed to the input row consumed at
/// that step and broadcast across the row.
inline StrengthHeatmap rnn_strength_heatmap(const Network& net, const SampleBatch& samples) {
    const int layer = first_recurrent_layer(net);
    if (layer != 0) throw std::invalid_argument("rnn_strength_heatmap: needs a recurrent input layer");
    const auto& l = net.spec.layers[0];
    const auto g = samples.geometry;
    if (g.height != l.time_steps || g.channels * g.width != l.fan_in)
        throw std::invalid_argument("rnn_strength_heatmap: geometry " + std::to_string(g.channels) + "x" +
                                    std::to_string(g.height) + "x" + std::to_string(g.width) +
                                    " does not match " + std::to_string(l.time_steps) + " steps of " +
                                    std::to_string(l.fan_in) + " features");
    const auto strength = rnn_unfolded_strength(net, samples);
    const Index H = l.fan_out;
    StrengthHeatmap map;
    map.trained = net.trained;
    map.grid.resize(g.height, g.width);
    for (int t = 0; t < g.height; ++t) {
        const double mean = strength.values.middleCols(t * H, H).cwiseAbs().mean();
        map.grid.row(t).setConstant(mean);
    }
    return map;
}

} // namespace cntnn
