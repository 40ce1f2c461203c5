#pragma once

#include "cntnn/datasets.hpp"
#include "cntnn/forward.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cntnn {

enum class LossKind { SoftmaxCrossEntropy, MSE };

inline std::string to_string(LossKind l) { return l == LossKind::MSE ? "mse" : "softmax_cross_entropy"; }

inline LossKind parse_loss(std::string_view s) {
    if (s == "mse") return LossKind::MSE;
    if (s == "softmax_cross_entropy") return LossKind::SoftmaxCrossEntropy;
    throw std::invalid_argument("unknown loss '" + std::string(s) + "'");
}

inline LossKind default_loss(Task t) { return t == Task::Classification ? LossKind::SoftmaxCrossEntropy : LossKind::MSE; }

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    int batch_size = 64;
    int epochs = 10;
    LossKind loss = LossKind::SoftmaxCrossEntropy;
    double init_std = 0.05;
    std::uint64_t seed = 0;

    bool operator==(const TrainConfig&) const = default;
};

inline void validate(const TrainConfig& c) {
    if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate))
        throw std::invalid_argument("learning_rate must be finite and non-negative");
    if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (c.batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (c.epochs <= 0) throw std::invalid_argument("epochs must be positive");
    if (!(c.init_std > 0.0) || !std::isfinite(c.init_std))
        throw std::invalid_argument("init_std must be positive and finite");
}

struct TrainReport {
    std::vector<double> epoch_loss;
    double final_metric = 0.0; // accuracy (classification) or mean squared error (reconstruction)
    double wall_seconds = 0.0;
};

/// A labeled minibatch. Reconstruction targets are the inputs themselves.
struct Batch {
    Matrix inputs;
    std::vector<int> labels;
};

using Gradients = std::vector<LayerParams>;

/// Loss value plus its gradient with respect to the network output.
///   softmax_cross_entropy: mean over the batch of -log softmax(y)[label]
///   mse:                   (1/2B) sum ||y - x||^2
inline double loss_and_gradient(LossKind loss, const Matrix& out, const Batch& batch, Matrix* grad) {
    const Index B = out.rows();
    if (loss == LossKind::SoftmaxCrossEntropy) {
        if (static_cast<Index>(batch.labels.size()) != B)
            throw std::invalid_argument("cross-entropy needs one label per sample");
        double total = 0.0;
        if (grad) grad->resize(B, out.cols());
        for (Index b = 0; b < B; ++b) {
            const double mx = out.row(b).maxCoeff();
            const Eigen::RowVectorXd e = (out.row(b).array() - mx).exp().matrix();
            const double sum = e.sum();
            const int y = batch.labels[b];
            total += -(out(b, y) - mx - std::log(sum));
            if (grad) {
                grad->row(b) = e / sum;
                (*grad)(b, y) -= 1.0;
            }
        }
        if (grad) *grad /= double(B);
        return total / double(B);
    }
    if (out.cols() != batch.inputs.cols()) throw std::invalid_argument("mse target width mismatch");
    const Matrix diff = out - batch.inputs;
    if (grad) *grad = diff / double(B);
    return 0.5 * diff.squaredNorm() / double(B);
}

namespace detail {

inline Matrix layer_backward(const LayerSpec& l, const LayerParams& p, Activation f, const Matrix& in,
                             const LayerTrace& t, const Matrix& d_out, LayerParams& g, bool need_input_grad) {
    switch (l.kind) {
    case LayerKind::Dense: {
        const Matrix dz = backprop_activation(f, t.pre, t.act, d_out);
        g.weights.noalias() = in.transpose() * dz;
        g.bias = dz.colwise().sum().transpose();
        g.recurrent.resize(0, 0);
        if (!need_input_grad) return {};
        return dz * p.weights.transpose();
    }
    case LayerKind::Conv2d: {
        const Matrix dz = backprop_activation(f, t.pre, t.act, d_out);
        const Index P = l.positions();
        const Matrix dr = channels_to_positions(dz, l.out_channels, P);
        const Matrix cols = im2col(l, in);
        g.weights.noalias() = dr.transpose() * cols;
        g.bias = dr.colwise().sum().transpose();
        g.recurrent.resize(0, 0);
        if (!need_input_grad) return {};
        return col2im(l, dr * p.weights, in.rows());
    }
    case LayerKind::Recurrent: {
        const Index F = l.fan_in, H = l.fan_out, T = l.time_steps;
        g.weights = Matrix::Zero(F, H);
        g.recurrent = Matrix::Zero(H, H);
        g.bias = Vector::Zero(H);
        Matrix d_in = need_input_grad ? Matrix::Zero(in.rows(), T * F) : Matrix();
        Matrix dh = d_out;
        for (Index s = T - 1; s >= 0; --s) {
            const Matrix z = t.pre.middleCols(s * H, H);
            const Matrix a = t.act.middleCols(s * H, H);
            const Matrix dz = backprop_activation(f, z, a, dh);
            g.weights.noalias() += in.middleCols(s * F, F).transpose() * dz;
            g.bias += dz.colwise().sum().transpose();
            if (need_input_grad) d_in.middleCols(s * F, F) = dz * p.weights.transpose();
            if (s > 0) {
                g.recurrent.noalias() += t.act.middleCols((s - 1) * H, H).transpose() * dz;
                dh = dz * p.recurrent.transpose();
            }
        }
        return d_in;
    }
    }
    throw std::logic_error("unreachable layer kind");
}

} // namespace detail

/// Backpropagation through a recorded trace; `d_output` is the loss gradient
/// with respect to the network output.
inline Gradients backward(const Network& net, const ForwardTrace& trace, const Matrix& d_output) {
    Gradients grads(net.params.size());
    Matrix d = d_output;
    for (int i = net.depth() - 1; i >= 0; --i) {
        const Matrix in = layer_output(net.spec, trace, i - 1);
        d = detail::layer_backward(net.spec.layers[i], net.params[i], net.spec.layer_activation(i), in,
                                   trace.layers[i], d, grads[i], i > 0);
    }
    return grads;
}

inline double batch_loss(const Network& net, const Batch& batch, LossKind loss) {
    return loss_and_gradient(loss, forward(net, batch.inputs).logits(), batch, nullptr);
}

inline std::pair<double, Gradients> loss_and_gradients(const Network& net, const Batch& batch, LossKind loss) {
    const ForwardTrace trace = forward(net, batch.inputs);
    Matrix d_out;
    const double value = loss_and_gradient(loss, trace.logits(), batch, &d_out);
    return {value, backward(net, trace, d_out)};
}

inline void check_task(const Network& net, const Dataset& ds) {
    if (ds.feature_dim() != net.spec.input_width())
        throw std::invalid_argument("dataset feature dimension " + std::to_string(ds.feature_dim()) +
                                    " does not match network input width " + std::to_string(net.spec.input_width()));
    if (net.spec.task == Task::Classification) {
        if (!ds.has_labels()) throw std::invalid_argument("classification needs a labeled dataset");
        if (ds.class_count != net.spec.output_width())
            throw std::invalid_argument("dataset has " + std::to_string(ds.class_count) + " classes but the network emits " +
                                        std::to_string(net.spec.output_width()));
    }
}

/// Accuracy for classification, mean per-element squared error for reconstruction.
inline double evaluate(const Network& net, const Dataset& ds) {
    check_task(net, ds);
    const Matrix out = predict(net, ds.inputs);
    if (net.spec.task == Task::Reconstruction) return (out - ds.inputs).squaredNorm() / double(out.size());
    Index correct = 0;
    for (Index i = 0; i < out.rows(); ++i) {
        Index arg;
        out.row(i).maxCoeff(&arg);
        correct += (arg == ds.labels[i]);
    }
    return double(correct) / double(out.rows());
}

inline Batch gather(const Dataset& ds, std::span<const Index> idx) {
    Batch b;
    b.inputs.resize(Index(idx.size()), ds.feature_dim());
    for (std::size_t i = 0; i < idx.size(); ++i) b.inputs.row(Index(i)) = ds.inputs.row(idx[i]);
    if (ds.has_labels()) {
        b.labels.reserve(idx.size());
        for (Index i : idx) b.labels.push_back(ds.labels[i]);
    }
    return b;
}

/// Minibatch SGD with momentum (v <- mu v - lr g; w <- w + v). The dataset
/// is reshuffled each epoch from config.seed. `eval` (optional) supplies the
/// split used for the final metric; otherwise the training split is used.
inline TrainReport train(Network& net, const Dataset& ds, const TrainConfig& config, const Dataset* eval = nullptr) {
    validate(config);
    check_shapes(net);
    check_task(net, ds);
    const auto start = std::chrono::steady_clock::now();

    Gradients velocity;
    for (const auto& l : net.spec.layers) velocity.push_back(zero_params(l));

    std::vector<Index> order(ds.count());
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(config.seed);

    TrainReport report;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        Index seen = 0;
        for (Index s = 0; s < ds.count(); s += config.batch_size) {
            const Index n = std::min<Index>(config.batch_size, ds.count() - s);
            const Batch batch = gather(ds, std::span<const Index>(order.data() + s, std::size_t(n)));
            auto [loss, grads] = loss_and_gradients(net, batch, config.loss);
            if (!std::isfinite(loss))
                throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch) + " (loss " +
                                                 std::to_string(loss) + ")");
            total += loss * double(n);
            seen += n;
            for (std::size_t i = 0; i < net.params.size(); ++i) {
                auto& v = velocity[i];
                auto& p = net.params[i];
                const auto& g = grads[i];
                v.weights = config.momentum * v.weights - config.learning_rate * g.weights;
                p.weights += v.weights;
                v.bias = config.momentum * v.bias - config.learning_rate * g.bias;
                p.bias += v.bias;
                if (p.recurrent.size() > 0) {
                    v.recurrent = config.momentum * v.recurrent - config.learning_rate * g.recurrent;
                    p.recurrent += v.recurrent;
                }
            }
        }
        if (!net.all_finite())
            throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch) +
                                             " (non-finite parameters)");
        report.epoch_loss.push_back(total / double(seen));
    }
    net.trained = true;
    report.final_metric = evaluate(net, eval ? *eval : ds);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

struct GradCheckReport {
    bool passed = false;
    double max_relative_error = 0.0;
    Index parameters_checked = 0;
};

/// Analytic gradients, the default provider for grad_check.
struct AnalyticGradient {
    Gradients operator()(const Network& net, const Batch& batch, LossKind loss) const {
        return loss_and_gradients(net, batch, loss).second;
    }
};

/// Compares a gradient provider against central finite differences for every
/// parameter. Relative error is |a - n| / max(|a|, |n|, 1e-6).
template <typename GradientFn = AnalyticGradient>
GradCheckReport grad_check(const Network& net, const Batch& sample, double tolerance, LossKind loss,
                           GradientFn gradient = {}, double step = 1e-5) {
    GradCheckReport report;
    if (net.parameter_count() > 10000) throw std::invalid_argument("grad_check: network too large for finite differences");
    const Gradients analytic = gradient(net, sample, loss);
    Network probe = net;
    auto check_block = [&](auto member) {
        for (std::size_t l = 0; l < probe.params.size(); ++l) {
            auto& block = probe.params[l].*member;
            const auto& g = analytic[l].*member;
            for (Index i = 0; i < block.size(); ++i) {
                const double saved = block.data()[i];
                block.data()[i] = saved + step;
                const double up = batch_loss(probe, sample, loss);
                block.data()[i] = saved - step;
                const double down = batch_loss(probe, sample, loss);
                block.data()[i] = saved;
                const double numeric = (up - down) / (2.0 * step);
                const double a = i < g.size() ? g.data()[i] : 0.0;
                const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
                report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric) / denom);
                ++report.parameters_checked;
            }
        }
    };
    check_block(&LayerParams::weights);
    check_block(&LayerParams::recurrent);
    check_block(&LayerParams::bias);
    report.passed = report.max_relative_error < tolerance;
    return report;
}

inline GradCheckReport grad_check(const Network& net, const Batch& sample, double tolerance) {
    return grad_check(net, sample, tolerance, default_loss(net.spec.task));
}

} // namespace cntnn
