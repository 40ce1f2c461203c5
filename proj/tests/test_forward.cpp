#include "helpers.hpp"

using namespace cntnn;
using namespace cntnn::testing;

TEST(Forward, DenseLinearOracle) {
    ArchitectureSpec s = small_fc(Activation::Linear, {2, 2});
    Network net = build_network(s, 0.1, 1);
    net.params[0].weights << 2, 1, 1, 2;
    net.params[0].bias << 0.5, 0.5;
    Matrix x(1, 2);
    x << 1, -1;
    const Matrix y = forward(net, x).logits();
    EXPECT_DOUBLE_EQ(y(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(y(0, 1), -0.5);
}

TEST(Forward, HiddenLayersUseSpecActivationOutputIsLinear) {
    ArchitectureSpec s = small_fc(Activation::Sigmoid, {3, 4, 2});
    Network net = random_network(s, 5);
    std::mt19937_64 rng(1);
    const Matrix x = random_matrix(3, 3, rng);
    const auto t = forward(net, x);
    const Matrix h = activate(Activation::Sigmoid, Matrix((x * net.params[0].weights).rowwise() +
                                                          net.params[0].bias.transpose()));
    EXPECT_LT((t.layers[0].act - h).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(t.layers[1].pre, t.layers[1].act);
}

TEST(Forward, ConvAllOnes) {
    ArchitectureSpec s;
    s.kind = ArchKind::CNN;
    s.activation = Activation::Linear;
    s.layers.push_back(conv_layer({1, 3, 3}, 1, 2, 1));
    s.layers.push_back(dense_layer(4, 1));
    Network net = build_network(s, 0.1, 1);
    net.params[0].weights.setOnes();
    net.params[0].bias.setZero();
    const Matrix x = Matrix::Ones(1, 9);
    const auto t = forward(net, x);
    ASSERT_EQ(t.layers[0].pre.cols(), 4);
    for (Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(t.layers[0].pre(0, i), 4.0);
}

TEST(Forward, ConvMatchesToeplitzProduct) {
    for (int kernel : {1, 2, 3})
        for (int stride : {1, 2}) {
            ArchitectureSpec s = small_cnn(Activation::ReLU, {2, 7, 6}, kernel, stride);
            Network net = random_network(s, 11 + kernel * 7 + stride);
            std::mt19937_64 rng(kernel * 10 + stride);
            const Matrix x = random_matrix(4, s.input_width(), rng);
            const Matrix pre = forward(net, x).layers[0].pre;
            for (Index b = 0; b < x.rows(); ++b) {
                const Vector ref = conv_toeplitz_oracle(s.layers[0], net.params[0], x.row(b).transpose());
                EXPECT_LT((pre.row(b).transpose() - ref).cwiseAbs().maxCoeff(), 1e-12)
                    << "kernel " << kernel << " stride " << stride;
            }
        }
}

TEST(Forward, RecurrentScalarUnrolls) {
    ArchitectureSpec s;
    s.kind = ArchKind::RNN;
    s.activation = Activation::Linear;
    s.layers.push_back(recurrent_layer(1, 1, 2));
    s.layers.push_back(dense_layer(1, 1));
    Network net = build_network(s, 0.1, 1);
    net.params[0].weights << 1;
    net.params[0].recurrent << 1;
    net.params[0].bias << 0;
    Matrix x(1, 2);
    x << 1, 1;
    const Matrix pre = forward(net, x).layers[0].pre;
    EXPECT_DOUBLE_EQ(pre(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(pre(0, 1), 2.0);
}

TEST(Forward, RecurrentMatchesExplicitLoop) {
    for (auto f : {Activation::Linear, Activation::ReLU, Activation::Sigmoid}) {
        ArchitectureSpec s = small_rnn(f, 3, 4, 6);
        Network net = random_network(s, 21);
        std::mt19937_64 rng(2);
        const Matrix x = random_matrix(5, s.input_width(), rng);
        const auto t = forward(net, x);
        const auto& p = net.params[0];
        for (Index b = 0; b < x.rows(); ++b) {
            Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(4);
            for (int step = 0; step < 6; ++step) {
                const Eigen::RowVectorXd z =
                    x.row(b).segment(step * 3, 3) * p.weights + p.bias.transpose() + h * p.recurrent;
                EXPECT_LT((t.layers[0].pre.row(b).segment(step * 4, 4) - z).cwiseAbs().maxCoeff(), 1e-12);
                h = activate(f, Matrix(z));
            }
            EXPECT_LT((layer_output(s, t, 0).row(b) - h).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Forward, LinearNetworkCollapsesToOneAffineMap) {
    ArchitectureSpec s = small_fc(Activation::Linear, {5, 7, 6, 3});
    Network net = random_network(s, 8);
    Matrix W = Matrix::Identity(5, 5);
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(5);
    for (const auto& p : net.params) {
        b = b * p.weights + p.bias.transpose();
        W = W * p.weights;
    }
    std::mt19937_64 rng(3);
    const Matrix x = random_matrix(10, 5, rng);
    const Matrix expect = (x * W).rowwise() + b;
    EXPECT_LT((forward(net, x).logits() - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, RejectsWrongWidthAndNonFiniteInput) {
    Network net = random_network(small_fc(Activation::ReLU), 1);
    EXPECT_THROW(forward(net, Matrix::Zero(2, 5)), std::invalid_argument);
    Matrix x = Matrix::Zero(2, 6);
    x(1, 3) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(forward(net, x), std::invalid_argument);
}

TEST(Forward, PredictChunksAgreeWithSinglePass) {
    Network net = random_network(small_cnn(Activation::Sigmoid), 4);
    std::mt19937_64 rng(9);
    const Matrix x = random_matrix(23, net.spec.input_width(), rng, 0.0, 1.0);
    EXPECT_LT((predict(net, x, 5) - forward(net, x).logits()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Architecture, ValidateNamesOffendingLayerPair) {
    ArchitectureSpec s = small_fc(Activation::ReLU, {4, 3, 2});
    s.layers[1].fan_in = 5;
    try {
        validate(s);
        FAIL() << "expected rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("layers 0 -> 1"), std::string::npos) << e.what();
    }
}

TEST(Architecture, DefaultSpecs) {
    DefaultSpecOptions o;
    o.kind = ArchKind::FC;
    auto fc = default_spec(o);
    ASSERT_EQ(fc.depth(), 3);
    EXPECT_EQ(fc.layers[0].fan_out, 128);
    EXPECT_EQ(fc.layers[1].fan_out, 64);
    EXPECT_EQ(fc.output_width(), 10);

    o.kind = ArchKind::AE;
    o.depth = 7;
    auto ae = default_spec(o);
    EXPECT_EQ(ae.depth(), 6);
    EXPECT_EQ(ae.output_width(), 784);
    EXPECT_EQ(ae.layers[2].fan_out, 32);

    o.kind = ArchKind::RNN;
    auto rnn = default_spec(o);
    EXPECT_EQ(rnn.layers[0].time_steps, 28);
    EXPECT_EQ(rnn.layers[0].fan_in, 28);

    o.kind = ArchKind::CNN;
    o.depth = 3;
    auto cnn = default_spec(o);
    EXPECT_EQ(cnn.layers[0].kind, LayerKind::Conv2d);
    EXPECT_EQ(cnn.layers[2].kind, LayerKind::Dense);

    o.kind = ArchKind::AE;
    o.depth = 4;
    EXPECT_THROW(default_spec(o), std::invalid_argument);
}

TEST(Network, InitializationIsSeededAndGaussian) {
    DefaultSpecOptions o;
    const auto spec = default_spec(o);
    const Network a = build_network(spec, 0.05, 42), b = build_network(spec, 0.05, 42), c = build_network(spec, 0.05, 43);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
    const auto& w = a.params[0].weights;
    const double mean = w.mean();
    const double sd = std::sqrt((w.array() - mean).square().mean());
    EXPECT_NEAR(mean, 0.0, 0.002);
    EXPECT_NEAR(sd, 0.05, 0.002);
    EXPECT_TRUE(a.params[0].bias.isZero());
}
