#pragma once

#include "cntnn/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cntnn {

/// Pre-activations and activations of one layer for a batch.
/// Recurrent layers hold every step: row b is [z(1) | z(2) | ... | z(T)].
struct LayerTrace {
    Matrix pre;
    Matrix act;
};

struct ForwardTrace {
    Matrix inputs;
    std::vector<LayerTrace> layers;

    const Matrix& logits() const { return layers.back().pre; }
};

namespace detail {

/// Patch matrix for a batch: row (b*P + p) holds the receptive field of
/// output position p of sample b, ordered (channel, kernel row, kernel column).
inline Matrix im2col(const LayerSpec& l, const Matrix& in) {
    const int m = l.kernel_size, s = l.stride, oh = l.out_height(), ow = l.out_width();
    const int H = l.input.height, W = l.input.width, C = l.input.channels;
    const Index P = oh * ow;
    Matrix cols(in.rows() * P, l.patch_size());
    for (Index b = 0; b < in.rows(); ++b) {
        const double* x = in.row(b).data();
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double* dst = cols.row(b * P + oy * ow + ox).data();
                for (int c = 0; c < C; ++c)
                    for (int dy = 0; dy < m; ++dy) {
                        const double* src = x + c * H * W + (oy * s + dy) * W + ox * s;
                        for (int dx = 0; dx < m; ++dx) *dst++ = src[dx];
                    }
            }
    }
    return cols;
}

/// Scatter-add the patch matrix back into input layout.
inline Matrix col2im(const LayerSpec& l, const Matrix& cols, Index batch) {
    const int m = l.kernel_size, s = l.stride, oh = l.out_height(), ow = l.out_width();
    const int H = l.input.height, W = l.input.width, C = l.input.channels;
    const Index P = oh * ow;
    Matrix out = Matrix::Zero(batch, l.fan_in);
    for (Index b = 0; b < batch; ++b) {
        double* x = out.row(b).data();
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const double* src = cols.row(b * P + oy * ow + ox).data();
                for (int c = 0; c < C; ++c)
                    for (int dy = 0; dy < m; ++dy) {
                        double* dst = x + c * H * W + (oy * s + dy) * W + ox * s;
                        for (int dx = 0; dx < m; ++dx) dst[dx] += *src++;
                    }
            }
    }
    return out;
}

// [B*P x K] (position-major) <-> [B x K*P] (channel-major)
inline Matrix positions_to_channels(const Matrix& r, Index batch, Index P) {
    const Index K = r.cols();
    Matrix out(batch, K * P);
    for (Index b = 0; b < batch; ++b)
        for (Index p = 0; p < P; ++p)
            for (Index k = 0; k < K; ++k) out(b, k * P + p) = r(b * P + p, k);
    return out;
}

inline Matrix channels_to_positions(const Matrix& z, Index K, Index P) {
    Matrix out(z.rows() * P, K);
    for (Index b = 0; b < z.rows(); ++b)
        for (Index p = 0; p < P; ++p)
            for (Index k = 0; k < K; ++k) out(b * P + p, k) = z(b, k * P + p);
    return out;
}

inline LayerTrace dense_forward(const LayerParams& p, Activation f, const Matrix& in) {
    LayerTrace t;
    t.pre = in * p.weights;
    t.pre.rowwise() += p.bias.transpose();
    t.act = activate(f, t.pre);
    return t;
}

inline LayerTrace conv_forward(const LayerSpec& l, const LayerParams& p, Activation f, const Matrix& in) {
    const Matrix cols = im2col(l, in);
    Matrix r = cols * p.weights.transpose();
    r.rowwise() += p.bias.transpose();
    LayerTrace t;
    t.pre = positions_to_channels(r, in.rows(), l.positions());
    t.act = activate(f, t.pre);
    return t;
}

inline LayerTrace recurrent_forward(const LayerSpec& l, const LayerParams& p, Activation f, const Matrix& in) {
    const Index B = in.rows(), F = l.fan_in, H = l.fan_out, T = l.time_steps;
    LayerTrace t;
    t.pre.resize(B, T * H);
    t.act.resize(B, T * H);
    Matrix h = Matrix::Zero(B, H); // h(1) = 0
    for (Index s = 0; s < T; ++s) {
        Matrix z = in.middleCols(s * F, F) * p.weights + h * p.recurrent;
        z.rowwise() += p.bias.transpose();
        h = activate(f, z);
        t.pre.middleCols(s * H, H) = z;
        t.act.middleCols(s * H, H) = h;
    }
    return t;
}

} // namespace detail

/// What layer `layer` passes on to the next one.
inline Matrix layer_output(const ArchitectureSpec& spec, const ForwardTrace& trace, int layer) {
    if (layer < 0) return trace.inputs;
    const auto& l = spec.layers[layer];
    const auto& act = trace.layers[layer].act;
    if (l.kind == LayerKind::Recurrent) return act.rightCols(l.fan_out);
    return act;
}

inline LayerTrace layer_forward(const LayerSpec& l, const LayerParams& p, Activation f, const Matrix& in) {
    switch (l.kind) {
    case LayerKind::Dense: return detail::dense_forward(p, f, in);
    case LayerKind::Conv2d: return detail::conv_forward(l, p, f, in);
    case LayerKind::Recurrent: return detail::recurrent_forward(l, p, f, in);
    }
    throw std::logic_error("unreachable layer kind");
}

/// Evaluates the network on a batch [batch x input width], keeping every
/// layer's pre-activation and activation.
inline ForwardTrace forward(const Network& net, const Matrix& batch) {
    const int expected = net.spec.input_width();
    if (batch.cols() != expected)
        throw std::invalid_argument("forward: expected input width " + std::to_string(expected) + ", got " +
                                    std::to_string(batch.cols()));
    if (!batch.allFinite()) throw std::invalid_argument("forward: input contains non-finite values");
    ForwardTrace trace;
    trace.inputs = batch;
    trace.layers.reserve(net.spec.layers.size());
    for (int i = 0; i < net.depth(); ++i) {
        const Matrix in = layer_output(net.spec, trace, i - 1);
        trace.layers.push_back(layer_forward(net.spec.layers[i], net.params[i], net.spec.layer_activation(i), in));
    }
    return trace;
}

/// Network output only (raw logits or reconstruction), evaluated in chunks.
inline Matrix predict(const Network& net, const Matrix& inputs, Index chunk = 1000) {
    Matrix out(inputs.rows(), net.spec.output_width());
    for (Index start = 0; start < inputs.rows(); start += chunk) {
        const Index n = std::min(chunk, inputs.rows() - start);
        out.middleRows(start, n) = forward(net, inputs.middleRows(start, n)).logits();
    }
    return out;
}

} // namespace cntnn
