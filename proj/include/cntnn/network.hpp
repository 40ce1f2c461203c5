#pragma once

#include "cntnn/architecture.hpp"
#include "cntnn/tensor.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cntnn {

/// Parameters of one layer.
///
/// dense:     weights [fan_in x fan_out], bias [fan_out]
/// conv2d:    weights [out_channels x in_channels*m*m] (row-major flattening is
///            out-channel, in-channel, kernel row, kernel column), bias [out_channels]
/// recurrent: weights = input map [fan_in x fan_out], recurrent = [fan_out x fan_out],
///            bias [fan_out] on the input map only
struct LayerParams {
    Matrix weights;
    Matrix recurrent;
    Vector bias;

    Index parameter_count() const { return weights.size() + recurrent.size() + bias.size(); }
    bool all_finite() const { return weights.allFinite() && recurrent.allFinite() && bias.allFinite(); }
    bool operator==(const LayerParams& o) const {
        return weights.rows() == o.weights.rows() && weights.cols() == o.weights.cols() &&
               recurrent.rows() == o.recurrent.rows() && recurrent.cols() == o.recurrent.cols() &&
               bias.size() == o.bias.size() && weights == o.weights && recurrent == o.recurrent &&
               bias == o.bias;
    }
};

struct ParamShape {
    Index weight_rows, weight_cols, recurrent_rows, recurrent_cols, bias;
};

inline ParamShape param_shape(const LayerSpec& l) {
    switch (l.kind) {
    case LayerKind::Dense: return {l.fan_in, l.fan_out, 0, 0, l.fan_out};
    case LayerKind::Conv2d: return {l.out_channels, l.patch_size(), 0, 0, l.out_channels};
    case LayerKind::Recurrent: return {l.fan_in, l.fan_out, l.fan_out, l.fan_out, l.fan_out};
    }
    return {};
}

inline LayerParams zero_params(const LayerSpec& l) {
    const auto s = param_shape(l);
    return {Matrix::Zero(s.weight_rows, s.weight_cols), Matrix::Zero(s.recurrent_rows, s.recurrent_cols),
            Vector::Zero(s.bias)};
}

struct Network {
    ArchitectureSpec spec;
    std::vector<LayerParams> params;
    bool trained = false;
    std::uint64_t seed = 0;
    double init_std = 0.0;

    int depth() const { return spec.depth(); }
    Index parameter_count() const {
        Index n = 0;
        for (const auto& p : params) n += p.parameter_count();
        return n;
    }
    bool all_finite() const {
        for (const auto& p : params)
            if (!p.all_finite()) return false;
        return true;
    }
    bool operator==(const Network&) const = default;
};

/// Throws if any layer's parameter shapes disagree with its spec.
inline void check_shapes(const Network& net) {
    if (net.params.size() != net.spec.layers.size())
        throw std::invalid_argument("network has " + std::to_string(net.params.size()) +
                                    " parameter sets for " + std::to_string(net.spec.layers.size()) + " layers");
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const auto s = param_shape(net.spec.layers[i]);
        const auto& p = net.params[i];
        if (p.weights.rows() != s.weight_rows || p.weights.cols() != s.weight_cols ||
            p.recurrent.rows() != s.recurrent_rows || p.recurrent.cols() != s.recurrent_cols ||
            p.bias.size() != s.bias)
            throw std::invalid_argument("layer " + std::to_string(i) + ": parameter shapes do not match spec " +
                                        "(weights " + shape_str(p.weights.rows(), p.weights.cols()) +
                                        ", expected " + shape_str(s.weight_rows, s.weight_cols) + ")");
    }
}

/// Weights i.i.d. Normal(0, init_std^2) in layer order (weights, then the
/// recurrent map), biases zero.
inline Network build_network(const ArchitectureSpec& spec, double init_std, std::uint64_t seed) {
    validate(spec);
    if (!(init_std > 0.0) || !std::isfinite(init_std))
        throw std::invalid_argument("init_std must be positive and finite");
    Network net;
    net.spec = spec;
    net.seed = seed;
    net.init_std = init_std;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, init_std);
    for (const auto& l : spec.layers) {
        LayerParams p = zero_params(l);
        for (Index i = 0; i < p.weights.size(); ++i) p.weights.data()[i] = normal(rng);
        for (Index i = 0; i < p.recurrent.size(); ++i) p.recurrent.data()[i] = normal(rng);
        net.params.push_back(std::move(p));
    }
    return net;
}

} // namespace cntnn
