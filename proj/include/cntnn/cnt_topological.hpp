#pragma once

// Input-independent metrics on the bipartite layer graph: link-weight mean and
// variance, directed node strength, and layer fluctuation.
//
// Node indexing: "layer l" names the neurons produced by parameterized layer l
// (its fan_out units). The bias of a receiving neuron is attached to each of
// its incoming links. Convolutional layers are treated through their unrolled
// neuron graph (one node per output channel x position) without building it;
// recurrent layers contribute both the input map and the recurrent map, with
// the bias on input-map links only.

#include "cntnn/network.hpp"

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cntnn {

/// Whether the receiving bias enters node in-strength once per incoming edge
/// (the literal summation) or once per node.
enum class BiasMode { PerEdge, PerNode };

struct NodeStrengthRecord {
    int layer = 0;
    int node = 0;
    double s_in = 0.0;
    double s_out = 0.0;
    double s_total = 0.0;
};

struct LayerStatRecord {
    int layer = 0;
    double mean = 0.0;
    double variance = 0.0;
    double fluctuation_in = 0.0;
    double fluctuation_out = 0.0;
    double fluctuation_total = 0.0;
};

/// Mean of (w_ij + b_j) over all links of a dense layer.
inline double link_weight_mean(const LayerParams& layer) {
    const Index n_in = layer.weights.rows(), n_out = layer.weights.cols();
    if (n_in == 0 || n_out == 0) throw std::invalid_argument("link_weight_mean: empty layer");
    if (layer.bias.size() != n_out) throw std::invalid_argument("link_weight_mean: bias does not match fan_out");
    return (layer.weights.sum() + double(n_in) * layer.bias.sum()) / double(n_in * n_out);
}

/// Population variance of (w_ij + b_j) around link_weight_mean.
inline double link_weight_variance(const LayerParams& layer) {
    const double mu = link_weight_mean(layer);
    const Matrix centred = (layer.weights.rowwise() + layer.bias.transpose()).array() - mu;
    return centred.squaredNorm() / double(layer.weights.size());
}

/// Per-link terms (w + b_receiver) of any layer kind, one entry per distinct
/// parameter. Convolutional kernels are shared by every output position, so
/// each unrolled link repeats one of these terms equally often and the mean and
/// variance over the unrolled graph equal those over this list.
inline std::vector<double> link_terms(const LayerSpec& spec, const LayerParams& p) {
    std::vector<double> terms;
    switch (spec.kind) {
    case LayerKind::Dense:
    case LayerKind::Recurrent:
        terms.reserve(std::size_t(p.weights.size() + p.recurrent.size()));
        for (Index i = 0; i < p.weights.rows(); ++i)
            for (Index j = 0; j < p.weights.cols(); ++j) terms.push_back(p.weights(i, j) + p.bias(j));
        for (Index i = 0; i < p.recurrent.size(); ++i) terms.push_back(p.recurrent.data()[i]);
        break;
    case LayerKind::Conv2d:
        terms.reserve(std::size_t(p.weights.size()));
        for (Index k = 0; k < p.weights.rows(); ++k)
            for (Index q = 0; q < p.weights.cols(); ++q) terms.push_back(p.weights(k, q) + p.bias(k));
        break;
    }
    return terms;
}

struct LinkStats {
    double mean = 0.0;
    double variance = 0.0;
};

inline LinkStats link_stats(const LayerSpec& spec, const LayerParams& p) {
    if (spec.kind == LayerKind::Dense) return {link_weight_mean(p), link_weight_variance(p)};
    const auto terms = link_terms(spec, p);
    if (terms.empty()) throw std::invalid_argument("link_stats: empty layer");
    const double mu = std::accumulate(terms.begin(), terms.end(), 0.0) / double(terms.size());
    double ss = 0.0;
    for (double t : terms) ss += (t - mu) * (t - mu);
    return {mu, ss / double(terms.size())};
}

/// Incoming strength of each neuron produced by a layer (trace_width() / time
/// steps entries: recurrent units are shared across steps).
inline Vector in_strength(const LayerSpec& spec, const LayerParams& p, BiasMode mode = BiasMode::PerEdge) {
    switch (spec.kind) {
    case LayerKind::Dense: {
        const double edges = mode == BiasMode::PerEdge ? double(p.weights.rows()) : 1.0;
        return p.weights.colwise().sum().transpose() + edges * p.bias;
    }
    case LayerKind::Conv2d: {
        const double edges = mode == BiasMode::PerEdge ? double(spec.patch_size()) : 1.0;
        const Vector per_channel = p.weights.rowwise().sum() + edges * p.bias;
        const Index P = spec.positions();
        Vector s(spec.fan_out);
        for (Index k = 0; k < spec.out_channels; ++k) s.segment(k * P, P).setConstant(per_channel(k));
        return s;
    }
    case LayerKind::Recurrent: {
        const double edges = mode == BiasMode::PerEdge ? double(p.weights.rows()) : 1.0;
        return p.weights.colwise().sum().transpose() + edges * p.bias + p.recurrent.colwise().sum().transpose();
    }
    }
    throw std::logic_error("unreachable layer kind");
}

/// Outgoing strength, through this layer's links, of each neuron feeding it
/// (input_width() entries).
inline Vector out_strength(const LayerSpec& spec, const LayerParams& p) {
    switch (spec.kind) {
    case LayerKind::Dense: return p.weights.rowwise().sum();
    case LayerKind::Recurrent: {
        const Vector per_feature = p.weights.rowwise().sum();
        Vector s(spec.input_width());
        for (Index t = 0; t < spec.time_steps; ++t) s.segment(t * spec.fan_in, spec.fan_in) = per_feature;
        return s;
    }
    case LayerKind::Conv2d: {
        // every (patch, kernel) pairing contributes one link per kernel entry
        const int m = spec.kernel_size, st = spec.stride, oh = spec.out_height(), ow = spec.out_width();
        const int H = spec.input.height, W = spec.input.width;
        Vector s = Vector::Zero(spec.fan_in);
        for (int k = 0; k < spec.out_channels; ++k)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    for (int c = 0; c < spec.input.channels; ++c)
                        for (int dy = 0; dy < m; ++dy)
                            for (int dx = 0; dx < m; ++dx)
                                s(c * H * W + (oy * st + dy) * W + ox * st + dx) +=
                                    p.weights(k, (c * m + dy) * m + dx);
        return s;
    }
    }
    throw std::logic_error("unreachable layer kind");
}

/// Strength of every neuron produced by `layer`. Output-layer neurons have
/// s_out = 0. Recurrent units add their recurrent-map links on both sides.
inline std::vector<NodeStrengthRecord> node_strength(const Network& net, int layer,
                                                     BiasMode mode = BiasMode::PerEdge) {
    if (layer < 0 || layer >= net.depth())
        throw std::invalid_argument("node_strength: layer " + std::to_string(layer) + " out of range [0, " +
                                    std::to_string(net.depth()) + ")");
    const auto& spec = net.spec.layers[layer];
    const auto& p = net.params[layer];
    const Vector s_in = in_strength(spec, p, mode);
    Vector s_out = Vector::Zero(s_in.size());
    if (layer + 1 < net.depth()) s_out = out_strength(net.spec.layers[layer + 1], net.params[layer + 1]);
    if (spec.kind == LayerKind::Recurrent) s_out += p.recurrent.rowwise().sum();
    std::vector<NodeStrengthRecord> out;
    out.reserve(std::size_t(s_in.size()));
    for (Index k = 0; k < s_in.size(); ++k)
        out.push_back({layer, int(k), s_in(k), s_out(k), s_in(k) + s_out(k)});
    return out;
}

/// Input neurons: no incoming parameterized links.
inline std::vector<NodeStrengthRecord> input_node_strength(const Network& net) {
    const Vector s_out = out_strength(net.spec.layers.front(), net.params.front());
    std::vector<NodeStrengthRecord> out;
    for (Index k = 0; k < s_out.size(); ++k) out.push_back({-1, int(k), 0.0, s_out(k), s_out(k)});
    return out;
}

/// Population standard deviation of the node strengths of one layer.
inline double layer_fluctuation(std::span<const double> strengths) {
    if (strengths.empty()) throw std::invalid_argument("layer_fluctuation: empty strength list");
    const double n = double(strengths.size());
    const double mean = std::accumulate(strengths.begin(), strengths.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : strengths) ss += (s - mean) * (s - mean);
    return std::sqrt(ss / n);
}

inline LayerStatRecord layer_stats(const Network& net, int layer, BiasMode mode = BiasMode::PerEdge) {
    const auto records = node_strength(net, layer, mode);
    std::vector<double> in, out, total;
    for (const auto& r : records) {
        in.push_back(r.s_in);
        out.push_back(r.s_out);
        total.push_back(r.s_total);
    }
    const auto ls = link_stats(net.spec.layers[layer], net.params[layer]);
    return {layer, ls.mean, ls.variance, layer_fluctuation(in), layer_fluctuation(out), layer_fluctuation(total)};
}

} // namespace cntnn
