#pragma once

#include "cntnn/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cntnn {

enum class Activation { Linear, ReLU, Sigmoid };

inline std::string to_string(Activation a) {
    switch (a) {
    case Activation::Linear: return "linear";
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

inline Activation parse_activation(std::string_view s) {
    if (s == "linear") return Activation::Linear;
    if (s == "relu") return Activation::ReLU;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw std::invalid_argument("unknown activation '" + std::string(s) +
                                "' (expected linear, relu or sigmoid)");
}

inline double activate(Activation a, double z) {
    switch (a) {
    case Activation::Linear: return z;
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

/// Derivative expressed through both the pre-activation and its image.
inline double activate_derivative(Activation a, double z, double fz) {
    switch (a) {
    case Activation::Linear: return 1.0;
    case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return fz * (1.0 - fz);
    }
    return 1.0;
}

inline Matrix activate(Activation a, const Matrix& z) {
    switch (a) {
    case Activation::Linear: return z;
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::Sigmoid:
        return z.unaryExpr([](double v) { return activate(Activation::Sigmoid, v); });
    }
    return z;
}

/// grad wrt pre-activation, given grad wrt activation.
inline Matrix backprop_activation(Activation a, const Matrix& z, const Matrix& fz, const Matrix& grad) {
    switch (a) {
    case Activation::Linear: return grad;
    case Activation::ReLU: return (z.array() > 0.0).select(grad, 0.0);
    case Activation::Sigmoid:
        return (grad.array() * fz.array() * (1.0 - fz.array())).matrix();
    }
    return grad;
}

} // namespace cntnn
