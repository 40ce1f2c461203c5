#include "helpers.hpp"

#include <chrono>

using namespace cntnn;
using namespace cntnn::testing;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> digests(const ExperimentManifest& m) {
    std::map<std::string, std::string> d;
    for (const auto& f : m.document.at("files")) d[f.at("path")] = f.at("sha256");
    return d;
}

std::string config_error(const json& j) {
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
    EXPECT_NE(config_error({{"poolsize", 3}}).find("'poolsize': unknown key"), std::string::npos);
    EXPECT_NE(config_error({{"pool_size", "three"}}).find("'pool_size': wrong type"), std::string::npos);
    EXPECT_NE(config_error({{"pool_size", 0}}).find("'pool_size'"), std::string::npos);
    EXPECT_NE(config_error({{"dataset", "svhn"}}).find("'dataset'"), std::string::npos);
    EXPECT_NE(config_error({{"metrics", {"node_strenght"}}}).find("unknown metric"), std::string::npos);
    EXPECT_NE(config_error({{"activations", {"tanh"}}}).find("'activations'"), std::string::npos);
    EXPECT_NE(config_error({{"correlations", {"node_strength"}}}).find("'correlations'"), std::string::npos);
    EXPECT_NE(config_error({{"learning_rate_by_arch", {{"mlp", 0.1}}}}).find("'learning_rate_by_arch'"),
              std::string::npos);
    EXPECT_NE(config_error(json::array()).find("expected a JSON object"), std::string::npos);
}

TEST(Config, DefaultsFollowDataset) {
    auto c = config_from_json({{"dataset", "cifar10"}});
    EXPECT_EQ(c.resolved_init_std(), 0.5);
    EXPECT_EQ(c.resolved_epochs(), 20);
    EXPECT_EQ(c.pool_size, 30);
    EXPECT_EQ(c.sample_size, 100);
    c = config_from_json({{"dataset", "mnist"}, {"learning_rate_by_arch", {{"rnn", 0.05}}}});
    EXPECT_EQ(c.resolved_init_std(), 0.05);
    DefaultSpecOptions o;
    o.kind = ArchKind::RNN;
    EXPECT_EQ(train_config(c, default_spec(o)).learning_rate, 0.05);
    o.kind = ArchKind::FC;
    EXPECT_EQ(train_config(c, default_spec(o)).learning_rate, 0.01);
}

TEST(Config, ShippedConfigsParse) {
    for (const auto& entry : fs::directory_iterator(fs::path(CNTNN_SOURCE_DIR) / "configs"))
        EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
}

TEST(Config, OverridesApply) {
    ConfigOverrides o;
    o.pool_size = 4;
    o.seed = 9;
    o.output_dir = "elsewhere";
    const auto c = apply(ExperimentConfig{}, o);
    EXPECT_EQ(c.pool_size, 4);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.output_dir, "elsewhere");
}

TEST(Experiment, SmokeRunIsFastAndComplete) {
    const auto out = temp_dir("exp_smoke");
    auto c = smoke_config(out);
    c.pool_size = 1;
    c.architectures = {"fc", "cnn", "rnn", "ae"};
    c.depths = {2};
    c.export_neuron_matrices = true;
    const auto start = std::chrono::steady_clock::now();
    const auto m = run_experiment(c);
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 10.0);

    std::set<std::string> listed;
    for (const auto& f : m.document.at("files")) listed.insert(f.at("path").get<std::string>());
    std::size_t on_disk = 0;
    for (const auto& e : fs::recursive_directory_iterator(out)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        ++on_disk;
        EXPECT_TRUE(listed.count(fs::relative(e.path(), out).generic_string())) << e.path();
    }
    EXPECT_EQ(on_disk, listed.size());
    EXPECT_TRUE(verify_manifest(m.path).empty());
    EXPECT_TRUE(fs::exists(out / "rnn_relu" / "heatmap_trained.csv"));
    EXPECT_TRUE(fs::exists(out / "fc_relu_L2" / "dist" / "neuron_strength_L0_untrained.csv"));
    EXPECT_EQ(m.document.at("pools").size(), 4u);
    const json sidecar = read_json(out / "rnn_relu" / "heatmap_trained.json");
    EXPECT_EQ(sidecar.at("height"), 4);
    EXPECT_EQ(sidecar.at("trained"), true);
    EXPECT_EQ(sidecar.at("dataset"), "synthetic");
}

TEST(Experiment, RerunReproducesDigests) {
    const auto a = run_experiment(smoke_config(temp_dir("exp_det_a")));
    const auto b = run_experiment(smoke_config(temp_dir("exp_det_b")));
    EXPECT_EQ(digests(a), digests(b));
    EXPECT_FALSE(digests(a).empty());
}

TEST(Experiment, StagedRunMatchesSingleRun) {
    const auto all = run_experiment(smoke_config(temp_dir("exp_stage_all")));
    const auto dir = temp_dir("exp_stage_split");
    run_experiment(smoke_config(dir), Stage::Train);
    const auto staged = run_experiment(smoke_config(dir), Stage::Metrics);
    EXPECT_EQ(digests(all), digests(staged));
}

TEST(Experiment, MetricsWithoutTrainingFails) {
    EXPECT_THROW(run_experiment(smoke_config(temp_dir("exp_untrained")), Stage::Metrics), std::runtime_error);
}

TEST(Experiment, TamperedFileFailsVerification) {
    const auto out = temp_dir("exp_tamper");
    const auto m = run_experiment(smoke_config(out));
    write_text(out / "fc_relu_L3" / "layer_stats.csv", "tampered\n");
    const auto bad = verify_manifest(m.path);
    ASSERT_EQ(bad.size(), 1u);
    EXPECT_EQ(bad[0], "fc_relu_L3/layer_stats.csv");
}

TEST(Experiment, MissingDataIsActionable) {
    auto c = smoke_config(temp_dir("exp_nodata"));
    c.dataset = "mnist";
    c.data_root = "/definitely/not/here";
    try {
        run_experiment(c);
        FAIL();
    } catch (const DataFileError& e) {
        EXPECT_NE(std::string(e.what()).find("--data-root"), std::string::npos);
    }
}

TEST(CompareExperiments, SelfComparisonIsZero) {
    const auto m = run_experiment(smoke_config(temp_dir("exp_cmp")));
    const auto c = compare_experiments(m.path, m.path, "neuron_activation", 0, "fc_relu_L3", "fc_relu_L3");
    EXPECT_EQ(c.ks, 0.0);
    EXPECT_EQ(c.delta_mean, 0.0);
    EXPECT_EQ(c.delta_std, 0.0);
    EXPECT_EQ(c.delta_skewness, 0.0);
    EXPECT_EQ(c.delta_kurtosis, 0.0);
    const auto cross = compare_experiments(m.path, m.path, "neuron_activation", 0, "fc_relu_L3", "ae_relu_L3");
    EXPECT_GT(cross.ks, 0.0);
    EXPECT_THROW(compare_experiments(m.path, m.path, "neuron_activation", 7, "fc_relu_L3", "fc_relu_L3"),
                 std::invalid_argument);
    EXPECT_THROW(compare_experiments(m.path, m.path, "neuron_activation", 0), std::invalid_argument);
}

TEST(CompareExperiments, AbsentMetricRejected) {
    const auto out = temp_dir("exp_cmp_absent");
    auto c = smoke_config(out);
    c.metrics = {"link_mean"};
    c.correlations.clear();
    const auto m = run_experiment(c);
    EXPECT_THROW(compare_experiments(m.path, m.path, "neuron_strength", 0, "fc_relu_L3", "fc_relu_L3"),
                 std::invalid_argument);
}
