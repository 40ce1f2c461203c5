#include "helpers.hpp"

#include <tuple>

using namespace cntnn;
using namespace cntnn::testing;

namespace {

Batch random_batch(const Network& net, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Batch b;
    b.inputs = random_matrix(n, net.spec.input_width(), rng, 0.0, 1.0);
    if (net.spec.task == Task::Classification)
        for (int i = 0; i < n; ++i) b.labels.push_back(int(rng() % std::uint64_t(net.spec.output_width())));
    return b;
}

ArchitectureSpec spec_for(LayerKind kind, Activation f) {
    switch (kind) {
    case LayerKind::Dense: return small_fc(f);
    case LayerKind::Conv2d: return small_cnn(f, {2, 5, 5}, 2, 1);
    case LayerKind::Recurrent: return small_rnn(f);
    }
    return {};
}

} // namespace

class GradCheck : public ::testing::TestWithParam<std::tuple<LayerKind, Activation>> {};

TEST_P(GradCheck, AnalyticMatchesFiniteDifferences) {
    const auto [kind, f] = GetParam();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Network net = random_network(spec_for(kind, f), seed);
        const auto report = grad_check(net, random_batch(net, 4, seed + 100), 1e-4);
        EXPECT_TRUE(report.passed) << "max relative error " << report.max_relative_error;
        EXPECT_EQ(report.parameters_checked, net.parameter_count());
    }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, GradCheck,
                         ::testing::Combine(::testing::Values(LayerKind::Dense, LayerKind::Conv2d, LayerKind::Recurrent),
                                            ::testing::Values(Activation::Linear, Activation::ReLU,
                                                              Activation::Sigmoid)),
                         [](const auto& info) {
                             return to_string(std::get<0>(info.param)) + "_" + to_string(std::get<1>(info.param));
                         });

TEST(GradCheckHarness, ReconstructionLoss) {
    const Network net = random_network(small_ae(Activation::Sigmoid), 7);
    EXPECT_TRUE(grad_check(net, random_batch(net, 3, 8), 1e-4).passed);
}

TEST(GradCheckHarness, DetectsSignFlippedGradient) {
    const Network net = random_network(small_fc(Activation::Sigmoid), 4);
    auto flipped = [](const Network& n, const Batch& b, LossKind loss) {
        auto g = loss_and_gradients(n, b, loss).second;
        g[1].weights = -g[1].weights;
        return g;
    };
    const auto report = grad_check(net, random_batch(net, 4, 5), 1e-4, LossKind::SoftmaxCrossEntropy, flipped);
    EXPECT_FALSE(report.passed);
    EXPECT_GT(report.max_relative_error, 1.0);
}

TEST(GradCheckHarness, RefusesLargeNetworks) {
    const Network net = build_network(small_fc(Activation::ReLU, {200, 60, 10}), 0.05, 1);
    EXPECT_THROW(grad_check(net, random_batch(net, 1, 1), 1e-4), std::invalid_argument);
}

TEST(Loss, CrossEntropyOfUniformLogits) {
    Matrix out = Matrix::Zero(2, 2);
    Batch b;
    b.inputs = Matrix::Zero(2, 1);
    b.labels = {0, 1};
    Matrix g;
    EXPECT_NEAR(loss_and_gradient(LossKind::SoftmaxCrossEntropy, out, b, &g), std::log(2.0), 1e-15);
    EXPECT_NEAR(g(0, 0), -0.25, 1e-15);
    EXPECT_NEAR(g(0, 1), 0.25, 1e-15);
}

TEST(Loss, MseIsHalfSquaredErrorPerSample) {
    Matrix out(2, 2);
    out << 1, 0, 0, 0;
    Batch b;
    b.inputs = Matrix::Zero(2, 2);
    EXPECT_DOUBLE_EQ(loss_and_gradient(LossKind::MSE, out, b, nullptr), 0.25);
}

TEST(Train, ReducesLossAndIsDeterministic) {
    const auto ds = synthetic_dataset(1, 200, 6, 3);
    TrainConfig c;
    c.epochs = 15;
    c.learning_rate = 0.1;
    c.batch_size = 16;
    Network a = build_network(small_fc(Activation::ReLU), 0.3, 5), b = a;
    const auto ra = train(a, ds, c);
    const auto rb = train(b, ds, c);
    EXPECT_LT(ra.epoch_loss.back(), ra.epoch_loss.front());
    EXPECT_GT(ra.final_metric, 0.9);
    EXPECT_TRUE(a == b);
    EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
    EXPECT_TRUE(a.trained);
}

TEST(Train, ShuffleSeedChangesTrajectory) {
    const auto ds = synthetic_dataset(1, 100, 6, 3);
    TrainConfig c;
    c.epochs = 2;
    Network a = build_network(small_fc(Activation::ReLU), 0.3, 5), b = a;
    train(a, ds, c);
    c.seed = 1;
    train(b, ds, c);
    EXPECT_FALSE(a == b);
}

TEST(Train, DivergenceIsReportedWithEpoch) {
    auto ds = synthetic_dataset(1, 64, 6, 3);
    ds.inputs *= 1e3;
    TrainConfig c;
    c.learning_rate = 1e6;
    c.momentum = 0.0;
    c.epochs = 50;
    Network net = build_network(small_fc(Activation::Linear), 1.0, 2);
    try {
        train(net, ds, c);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_GE(e.epoch(), 0);
        EXPECT_LT(e.epoch(), 50);
    }
}

TEST(Train, RejectsMismatchedDatasetAndBadConfig) {
    Network net = build_network(small_fc(Activation::ReLU), 0.1, 1);
    TrainConfig c;
    EXPECT_THROW(train(net, synthetic_dataset(1, 10, 7, 3), c), std::invalid_argument);
    EXPECT_THROW(train(net, synthetic_dataset(1, 10, 6, 4), c), std::invalid_argument);
    c.batch_size = 0;
    EXPECT_THROW(train(net, synthetic_dataset(1, 10, 6, 3), c), std::invalid_argument);
    c = {};
    c.momentum = 1.0;
    EXPECT_THROW(validate(c), std::invalid_argument);
}

TEST(Train, AllKindsLearnSyntheticData) {
    const Geometry g{1, 4, 4};
    const auto ds = synthetic_dataset(2, 300, 16, 4, g);
    TrainConfig c;
    c.epochs = 10;
    c.learning_rate = 0.05;
    c.batch_size = 16;
    for (auto kind : {ArchKind::FC, ArchKind::CNN, ArchKind::AE}) {
        DefaultSpecOptions o;
        o.kind = kind;
        o.activation = Activation::ReLU;
        o.geometry = g;
        o.classes = 4;
        o.depth = kind == ArchKind::CNN ? 2 : 3;
        if (kind == ArchKind::FC) o.hidden_widths = {12, 8};
        if (kind == ArchKind::AE) o.hidden_widths = {8};
        const auto spec = default_spec(o);
        Network net = build_network(spec, 0.1, 1);
        TrainConfig cc = c;
        cc.loss = default_loss(spec.task);
        const auto r = train(net, ds, cc);
        EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front()) << to_string(kind);
    }
}
