#pragma once

#include "cntnn/cntnn.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

namespace cntnn::testing {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

/// Random weights and biases (biases nonzero, unlike build_network).
inline Network random_network(const ArchitectureSpec& spec, std::uint64_t seed, double scale = 0.5) {
    Network net = build_network(spec, scale, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& p : net.params)
        for (Index i = 0; i < p.bias.size(); ++i) p.bias(i) = u(rng);
    return net;
}

inline ArchitectureSpec small_fc(Activation f, std::vector<int> widths = {6, 5, 4, 3}) {
    ArchitectureSpec s;
    s.kind = ArchKind::FC;
    s.activation = f;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) s.layers.push_back(dense_layer(widths[i], widths[i + 1]));
    return s;
}

inline ArchitectureSpec small_cnn(Activation f, Geometry g = {2, 6, 6}, int kernel = 3, int stride = 1) {
    ArchitectureSpec s;
    s.kind = ArchKind::CNN;
    s.activation = f;
    const auto c = conv_layer(g, 3, kernel, stride);
    s.layers.push_back(c);
    s.layers.push_back(dense_layer(c.fan_out, 3));
    return s;
}

inline ArchitectureSpec small_rnn(Activation f, int features = 3, int hidden = 4, int steps = 5) {
    ArchitectureSpec s;
    s.kind = ArchKind::RNN;
    s.activation = f;
    s.layers.push_back(recurrent_layer(features, hidden, steps));
    s.layers.push_back(dense_layer(hidden, 3));
    return s;
}

inline ArchitectureSpec small_ae(Activation f, std::vector<int> widths = {6, 4, 2, 4, 6}) {
    ArchitectureSpec s = small_fc(f, widths);
    s.kind = ArchKind::AE;
    s.task = Task::Reconstruction;
    return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("cntnn_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline ExperimentConfig smoke_config(const std::filesystem::path& out) {
    ExperimentConfig c;
    c.name = "smoke";
    c.dataset = "synthetic";
    c.synthetic_count = 120;
    c.synthetic_features = 16;
    c.synthetic_classes = 4;
    c.synthetic_geometry = {1, 4, 4};
    c.architectures = {"fc", "rnn", "ae"};
    c.activations = {"relu"};
    c.depths = {3};
    c.ae_encoder_widths = {8};
    c.pool_size = 2;
    c.epochs = 1;
    c.sample_size = 10;
    c.bins = 10;
    c.output_dir = out.string();
    c.seed = 3;
    return c;
}

} // namespace cntnn::testing
