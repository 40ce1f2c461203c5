#include "helpers.hpp"

using namespace cntnn;
using namespace cntnn::testing;

namespace {

struct Fixture {
    Dataset ds = synthetic_dataset(4, 120, 6, 3);
    ArchitectureSpec spec = small_fc(Activation::Sigmoid, {6, 5, 4, 3});
    TrainConfig config = [] {
        TrainConfig c;
        c.epochs = 2;
        c.learning_rate = 0.1;
        c.batch_size = 16;
        c.init_std = 0.3;
        return c;
    }();
};

} // namespace

TEST(TrainPool, SeedsAndUntrainedTwins) {
    Fixture f;
    const auto pool = train_pool(f.spec, 3, 100, f.ds, f.config);
    ASSERT_EQ(pool.members.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& m = pool.members[i];
        EXPECT_EQ(m.trained.seed, 100 + i);
        EXPECT_TRUE(m.untrained == build_network(f.spec, 0.3, 100 + i));
        EXPECT_FALSE(m.untrained.trained);
        EXPECT_TRUE(m.trained.trained);
        EXPECT_EQ(m.report.epoch_loss.size(), 2u);
        EXPECT_EQ(member_index(pool, m), i);
    }
    EXPECT_EQ(pool.healthy_count(), 3u);
}

TEST(TrainPool, ThreadCountDoesNotChangeResults) {
    Fixture f;
    const auto a = train_pool(f.spec, 3, 7, f.ds, f.config, nullptr, 1);
    const auto b = train_pool(f.spec, 3, 7, f.ds, f.config, nullptr, 3);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(a.members[i].trained == b.members[i].trained);
}

TEST(TrainPool, AllDivergedIsAnError) {
    Fixture f;
    f.ds.inputs *= 1e3;
    f.config.learning_rate = 1e6;
    f.config.momentum = 0.0;
    f.config.epochs = 30;
    f.spec.activation = Activation::Linear;
    EXPECT_THROW(train_pool(f.spec, 2, 1, f.ds, f.config), std::runtime_error);
}

TEST(Aggregate, PoolsEveryHealthyMember) {
    Fixture f;
    auto pool = train_pool(f.spec, 3, 1, f.ds, f.config);
    MetricOptions o;
    o.sample_size = 10;
    o.bins = 8;
    const auto ns = aggregate_metric(pool, "node_strength", 1, f.ds, o);
    EXPECT_EQ(ns.values.size(), 3u * 4u);
    EXPECT_TRUE(std::is_sorted(ns.values.begin(), ns.values.end()));
    const auto act = aggregate_metric(pool, Metric::NeuronActivation, 0, f.ds, o);
    EXPECT_EQ(act.values.size(), 3u * 10u * 5u);
    EXPECT_EQ(act.summary.n, 150);
    for (double v : act.values) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
    pool.members[1].failed = true;
    EXPECT_EQ(aggregate_metric(pool, "link_mean", 0, f.ds, o).values.size(), 2u);
    EXPECT_THROW(aggregate_metric(pool, "no_such_metric", 0, f.ds, o), std::invalid_argument);
}

TEST(Aggregate, IndependentOfMemberOrder) {
    Fixture f;
    auto pool = train_pool(f.spec, 3, 1, f.ds, f.config);
    MetricOptions o;
    o.sample_size = 10;
    const auto a = aggregate_metric(pool, Metric::NeuronStrength, 1, f.ds, o);
    std::reverse(pool.members.begin(), pool.members.end());
    const auto b = aggregate_metric(pool, Metric::NeuronStrength, 1, f.ds, o);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.histogram.counts, b.histogram.counts);
}

TEST(Correlate, ScatterPointsAndBounds) {
    Fixture f;
    const auto pool = train_pool(f.spec, 2, 1, f.ds, f.config);
    MetricOptions o;
    o.sample_size = 12;
    const auto r = correlate(pool, Metric::NodeStrength, Metric::NeuronStrength, 0, f.ds, o);
    EXPECT_EQ(r.record.points, 2 * 5);
    EXPECT_EQ(r.x.size(), r.y.size());
    ASSERT_TRUE(r.record.r.has_value());
    EXPECT_LE(std::abs(*r.record.r), 1.0);
    const auto self = correlate(pool, Metric::NeuronStrength, Metric::NeuronStrength, 0, f.ds, o);
    EXPECT_NEAR(*self.record.r, 1.0, 1e-12);
    const auto undefined = correlate_values("a", "b", 0, {1, 1, 1}, {1, 2, 3});
    EXPECT_FALSE(undefined.record.r.has_value());
}

TEST(TrainedVsUntrained, PairedDistributions) {
    Fixture f;
    f.config.epochs = 5;
    const auto pool = train_pool(f.spec, 2, 1, f.ds, f.config);
    MetricOptions o;
    o.sample_size = 20;
    const auto c = compare_trained_untrained(pool, Metric::NeuronStrength, 0, f.ds, o);
    EXPECT_EQ(c.trained.values.size(), c.untrained.values.size());
    EXPECT_GT(c.ks, 0.0);
    EXPECT_LE(c.ks, 1.0);
}

TEST(MetricNames, RoundTrip) {
    for (const auto& [m, name] : kMetricNames) EXPECT_EQ(parse_metric(to_string(m)), m);
    EXPECT_TRUE(is_data_dependent(Metric::NeuronActivation));
    EXPECT_FALSE(is_data_dependent(Metric::NodeStrength));
}
