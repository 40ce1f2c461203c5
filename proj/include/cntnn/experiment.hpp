#pragma once

// Config-driven experiments: train one pool per (architecture, activation,
// depth) cell, compute the requested metrics, and write CSV/JSON artifacts
// plus a manifest carrying a SHA-256 digest for every emitted file.
//
// Output layout under output_dir:
//   manifest.json
//   <pool>/pool.json                          member seeds, metrics, network paths
//   <pool>/networks/member_<i>_{trained,untrained}.json
//   <pool>/node_strength.csv                  network_seed,layer,node,s_in,s_out,s_total
//   <pool>/layer_stats.csv                    network_seed,layer,mean,variance,fluctuation_*
//   <pool>/dist/<metric>_L<l>[_untrained].{csv,json,f64}
//   <pool>/corr/<a>_vs_<b>_L<l>.{csv,json}
//   <pool>/trained_vs_untrained.json
//   <pool>/heatmap_{trained,untrained}.{csv,json}   recurrent pools only
//   <pool>/neurons/<metric>_L<l>.csv          when export_neuron_matrices is set
//
// Only manifest.json carries wall-clock times, so every listed file is a pure
// function of the config.

#include "cntnn/digest.hpp"
#include "cntnn/population.hpp"
#include "cntnn/serialization.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace cntnn {

namespace fs = std::filesystem;

/// Invalid experiment configuration; the message names the field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::string dataset = "mnist"; // mnist | cifar10 | synthetic
    std::string data_root;
    std::vector<std::string> architectures{"fc"};
    std::vector<std::string> activations{"sigmoid"};
    std::vector<int> depths{3};
    std::vector<int> hidden_widths;     // FC, depth-1 entries
    std::vector<int> ae_encoder_widths; // AE encoder half, mirrored for the decoder
    int pool_size = 30;
    std::optional<double> init_std; // 0.05 MNIST/synthetic, 0.5 CIFAR-10
    int sample_size = 100;
    double learning_rate = 0.01;
    std::map<std::string, double> learning_rate_by_arch; // e.g. {"rnn": 0.05}
    double momentum = 0.9;
    int batch_size = 64;
    std::optional<int> epochs; // 10 MNIST/synthetic, 20 CIFAR-10
    Index train_limit = 0;     // 0 = full training split
    Index test_limit = 0;
    std::vector<std::string> metrics{"link_mean",         "link_variance",   "node_strength_in",
                                     "node_strength_out", "layer_fluctuation", "neuron_strength",
                                     "neuron_activation"};
    std::vector<int> layers; // empty = every layer
    std::vector<std::string> correlations{"node_strength:neuron_strength", "node_strength:neuron_activation"};
    int bins = 100;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    int threads = 1;
    bool export_neuron_matrices = false;
    int synthetic_count = 600;
    int synthetic_features = 16;
    int synthetic_classes = 4;
    std::vector<int> synthetic_geometry{1, 4, 4};
    int test_count = 0; // synthetic only; 0 = count / 5

    double resolved_init_std() const { return init_std.value_or(dataset == "cifar10" ? 0.5 : 0.05); }
    int resolved_epochs() const { return epochs.value_or(dataset == "cifar10" ? 20 : 10); }
};

namespace detail {

template <typename T>
T config_value(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config field '" + key + "': wrong type (" + std::string(j.type_name()) + ")");
    }
}

} // namespace detail

inline json to_json(const ExperimentConfig& c) {
    json j{{"name", c.name},
           {"dataset", c.dataset},
           {"data_root", c.data_root},
           {"architectures", c.architectures},
           {"activations", c.activations},
           {"depths", c.depths},
           {"hidden_widths", c.hidden_widths},
           {"ae_encoder_widths", c.ae_encoder_widths},
           {"pool_size", c.pool_size},
           {"init_std", c.resolved_init_std()},
           {"sample_size", c.sample_size},
           {"learning_rate", c.learning_rate},
           {"learning_rate_by_arch", c.learning_rate_by_arch},
           {"momentum", c.momentum},
           {"batch_size", c.batch_size},
           {"epochs", c.resolved_epochs()},
           {"train_limit", c.train_limit},
           {"test_limit", c.test_limit},
           {"metrics", c.metrics},
           {"layers", c.layers},
           {"correlations", c.correlations},
           {"bins", c.bins},
           {"output_dir", c.output_dir},
           {"seed", c.seed},
           {"threads", c.threads},
           {"export_neuron_matrices", c.export_neuron_matrices}};
    if (c.dataset == "synthetic") {
        j["synthetic_count"] = c.synthetic_count;
        j["synthetic_features"] = c.synthetic_features;
        j["synthetic_classes"] = c.synthetic_classes;
        j["synthetic_geometry"] = c.synthetic_geometry;
        j["test_count"] = c.test_count;
    }
    return j;
}

inline void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& field, const std::string& msg) {
        throw ConfigError("config field '" + field + "': " + msg);
    };
    if (c.dataset != "mnist" && c.dataset != "cifar10" && c.dataset != "synthetic")
        fail("dataset", "expected mnist, cifar10 or synthetic, got '" + c.dataset + "'");
    if (c.architectures.empty()) fail("architectures", "must not be empty");
    for (const auto& a : c.architectures) try {
            parse_arch_kind(a);
        } catch (const std::invalid_argument& e) {
            fail("architectures", e.what());
        }
    if (c.activations.empty()) fail("activations", "must not be empty");
    for (const auto& a : c.activations) try {
            parse_activation(a);
        } catch (const std::invalid_argument& e) {
            fail("activations", e.what());
        }
    if (c.depths.empty()) fail("depths", "must not be empty");
    for (int d : c.depths)
        if (d < 1) fail("depths", "depths must be >= 1");
    if (c.pool_size < 1) fail("pool_size", "must be >= 1");
    if (!(c.resolved_init_std() > 0.0)) fail("init_std", "must be positive");
    if (c.sample_size < 1) fail("sample_size", "must be >= 1");
    if (!(c.learning_rate >= 0.0)) fail("learning_rate", "must be non-negative");
    for (const auto& [arch, lr] : c.learning_rate_by_arch) {
        try {
            parse_arch_kind(arch);
        } catch (const std::invalid_argument& e) {
            fail("learning_rate_by_arch", e.what());
        }
        if (!(lr >= 0.0)) fail("learning_rate_by_arch", "rates must be non-negative");
    }
    if (!(c.momentum >= 0.0 && c.momentum < 1.0)) fail("momentum", "must lie in [0, 1)");
    if (c.batch_size < 1) fail("batch_size", "must be >= 1");
    if (c.resolved_epochs() < 1) fail("epochs", "must be >= 1");
    for (const auto& m : c.metrics) try {
            parse_metric(m);
        } catch (const std::invalid_argument& e) {
            fail("metrics", e.what());
        }
    for (const auto& pair : c.correlations) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) fail("correlations", "entries look like 'metric_a:metric_b', got '" + pair + "'");
        try {
            parse_metric(pair.substr(0, colon));
            parse_metric(pair.substr(colon + 1));
        } catch (const std::invalid_argument& e) {
            fail("correlations", e.what());
        }
    }
    for (int l : c.layers)
        if (l < 0) fail("layers", "layer indices must be >= 0");
    if (c.bins < 1) fail("bins", "must be >= 1");
    if (c.threads < 1) fail("threads", "must be >= 1");
    if (c.dataset == "synthetic") {
        if (c.synthetic_count < 2 || c.synthetic_features < 1 || c.synthetic_classes < 1)
            fail("synthetic_count", "synthetic sizes must be positive");
        if (c.synthetic_geometry.size() != 3) fail("synthetic_geometry", "expected [channels, height, width]");
    }
}

/// Strict parse: unknown keys are errors.
inline ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    ExperimentConfig c;
    using detail::config_value;
    for (const auto& [key, v] : j.items()) {
        if (key == "name") c.name = config_value<std::string>(v, key);
        else if (key == "dataset") c.dataset = config_value<std::string>(v, key);
        else if (key == "data_root") c.data_root = config_value<std::string>(v, key);
        else if (key == "architectures") c.architectures = config_value<std::vector<std::string>>(v, key);
        else if (key == "activations") c.activations = config_value<std::vector<std::string>>(v, key);
        else if (key == "depths") c.depths = config_value<std::vector<int>>(v, key);
        else if (key == "hidden_widths") c.hidden_widths = config_value<std::vector<int>>(v, key);
        else if (key == "ae_encoder_widths") c.ae_encoder_widths = config_value<std::vector<int>>(v, key);
        else if (key == "pool_size") c.pool_size = config_value<int>(v, key);
        else if (key == "init_std") c.init_std = config_value<double>(v, key);
        else if (key == "sample_size") c.sample_size = config_value<int>(v, key);
        else if (key == "learning_rate") c.learning_rate = config_value<double>(v, key);
        else if (key == "learning_rate_by_arch")
            c.learning_rate_by_arch = config_value<std::map<std::string, double>>(v, key);
        else if (key == "momentum") c.momentum = config_value<double>(v, key);
        else if (key == "batch_size") c.batch_size = config_value<int>(v, key);
        else if (key == "epochs") c.epochs = config_value<int>(v, key);
        else if (key == "train_limit") c.train_limit = config_value<Index>(v, key);
        else if (key == "test_limit") c.test_limit = config_value<Index>(v, key);
        else if (key == "metrics") c.metrics = config_value<std::vector<std::string>>(v, key);
        else if (key == "layers") c.layers = config_value<std::vector<int>>(v, key);
        else if (key == "correlations") c.correlations = config_value<std::vector<std::string>>(v, key);
        else if (key == "bins") c.bins = config_value<int>(v, key);
        else if (key == "output_dir") c.output_dir = config_value<std::string>(v, key);
        else if (key == "seed") c.seed = config_value<std::uint64_t>(v, key);
        else if (key == "threads") c.threads = config_value<int>(v, key);
        else if (key == "export_neuron_matrices") c.export_neuron_matrices = config_value<bool>(v, key);
        else if (key == "synthetic_count") c.synthetic_count = config_value<int>(v, key);
        else if (key == "synthetic_features") c.synthetic_features = config_value<int>(v, key);
        else if (key == "synthetic_classes") c.synthetic_classes = config_value<int>(v, key);
        else if (key == "synthetic_geometry") c.synthetic_geometry = config_value<std::vector<int>>(v, key);
        else if (key == "test_count") c.test_count = config_value<int>(v, key);
        else throw ConfigError("config field '" + key + "': unknown key");
    }
    validate(c);
    return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
    try {
        return config_from_json(json::parse(read_text(path)));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// Command-line overrides applied on top of a config file.
struct ConfigOverrides {
    std::optional<std::string> data_root;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> pool_size;
};

inline ExperimentConfig apply(ExperimentConfig c, const ConfigOverrides& o) {
    if (o.data_root) c.data_root = *o.data_root;
    if (o.output_dir) c.output_dir = *o.output_dir;
    if (o.seed) c.seed = *o.seed;
    if (o.pool_size) c.pool_size = *o.pool_size;
    validate(c);
    return c;
}

struct DatasetPair {
    Dataset train;
    Dataset test;
};

inline DatasetPair load_datasets(const ExperimentConfig& c) {
    DatasetPair d;
    if (c.dataset == "synthetic") {
        const Geometry g{c.synthetic_geometry[0], c.synthetic_geometry[1], c.synthetic_geometry[2]};
        const int test_count = c.test_count > 0 ? c.test_count : std::max(c.synthetic_classes, c.synthetic_count / 5);
        d.train = synthetic_dataset(c.seed, c.synthetic_count, c.synthetic_features, c.synthetic_classes, g);
        d.test = synthetic_dataset(c.seed + 1, test_count, c.synthetic_features, c.synthetic_classes, g);
        d.test.split = Split::Test;
    } else {
        const fs::path root = resolve_data_root(c.data_root);
        if (c.dataset == "mnist") {
            d.train = load_mnist_dir(root, Split::Train);
            d.test = load_mnist_dir(root, Split::Test);
        } else {
            d.train = load_cifar10_dir(root, Split::Train);
            d.test = load_cifar10_dir(root, Split::Test);
        }
    }
    d.train = head(d.train, c.train_limit);
    d.test = head(d.test, c.test_limit);
    return d;
}

struct PoolCell {
    std::string name;
    ArchitectureSpec spec;
    bool row_sequence = false; // recurrent pools read images row by row
};

inline std::vector<PoolCell> pool_cells(const ExperimentConfig& c, const Dataset& train) {
    std::vector<PoolCell> cells;
    std::set<std::string> seen;
    for (const auto& a : c.architectures)
        for (const auto& act : c.activations)
            for (int depth : c.depths) {
                DefaultSpecOptions o;
                o.kind = parse_arch_kind(a);
                o.activation = parse_activation(act);
                o.depth = depth;
                o.geometry = train.geometry;
                o.classes = train.class_count;
                if (o.kind == ArchKind::FC) o.hidden_widths = c.hidden_widths;
                if (o.kind == ArchKind::AE) o.hidden_widths = c.ae_encoder_widths;
                PoolCell cell;
                cell.name = o.kind == ArchKind::RNN ? a + "_" + act : a + "_" + act + "_L" + std::to_string(depth);
                if (!seen.insert(cell.name).second) continue;
                try {
                    cell.spec = default_spec(o);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError("config cell " + cell.name + ": " + e.what());
                }
                cell.row_sequence = o.kind == ArchKind::RNN;
                cells.push_back(std::move(cell));
            }
    return cells;
}

inline TrainConfig train_config(const ExperimentConfig& c, const ArchitectureSpec& spec) {
    TrainConfig t;
    t.learning_rate = c.learning_rate;
    if (auto it = c.learning_rate_by_arch.find(to_string(spec.kind)); it != c.learning_rate_by_arch.end())
        t.learning_rate = it->second;
    t.momentum = c.momentum;
    t.batch_size = c.batch_size;
    t.epochs = c.resolved_epochs();
    t.loss = default_loss(spec.task);
    t.init_std = c.resolved_init_std();
    t.seed = c.seed;
    return t;
}

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Collects emitted files (relative to the output directory) for the manifest.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }

    void text(const std::string& rel, const std::string& content) {
        write_text(root_ / rel, content);
        files_.insert(rel);
    }
    void json_file(const std::string& rel, const json& j) { text(rel, j.dump(2) + "\n"); }
    void doubles(const std::string& rel, const std::vector<double>& v) {
        const auto path = root_ / rel;
        fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
        if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
        files_.insert(rel);
    }
    void record_existing(const std::string& rel) { files_.insert(rel); }

    json file_list() const {
        json list = json::array();
        for (const auto& rel : files_) list.push_back({{"path", rel}, {"sha256", sha256_file(root_ / rel)}});
        return list;
    }

private:
    fs::path root_;
    std::set<std::string> files_;
};

inline std::vector<double> read_doubles(const fs::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    const auto bytes = std::size_t(in.tellg());
    if (bytes % sizeof(double) != 0) throw std::runtime_error(path.string() + ": not a packed double array");
    std::vector<double> v(bytes / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(bytes));
    return v;
}

inline json summary_json(const MomentSummary& s) {
    return {{"mean", s.mean}, {"std", s.std}, {"skewness", s.skewness}, {"kurtosis", s.kurtosis}, {"n", s.n}};
}

/// Writes the pool's networks and pool.json.
inline json write_pool(ArtifactWriter& out, const std::string& pool_name, const PoolResult& pool,
                       const std::string& dataset_name) {
    json members = json::array();
    for (std::size_t i = 0; i < pool.members.size(); ++i) {
        const auto& m = pool.members[i];
        const std::string base = pool_name + "/networks/member_" + std::to_string(i);
        out.text(base + "_untrained.json", to_json(m.untrained).dump() + "\n");
        json entry{{"index", i}, {"seed", m.untrained.seed}, {"untrained_path", base + "_untrained.json"},
                   {"failed", m.failed}};
        if (m.failed) {
            entry["failure"] = m.failure;
            entry["failed_epoch"] = m.failed_epoch;
        } else {
            out.text(base + "_trained.json", to_json(m.trained).dump() + "\n");
            entry["trained_path"] = base + "_trained.json";
            entry["final_metric"] = m.report.final_metric;
            entry["epoch_loss"] = m.report.epoch_loss;
        }
        members.push_back(std::move(entry));
    }
    json doc{{"pool", pool_name},
             {"dataset", dataset_name},
             {"spec", to_json(pool.spec)},
             {"train_config", to_json(pool.config)},
             {"base_seed", pool.base_seed},
             {"members", members}};
    out.json_file(pool_name + "/pool.json", doc);
    return doc;
}

/// Rebuilds a pool from pool.json and its network files.
inline PoolResult read_pool(const fs::path& root, const std::string& pool_name) {
    const json doc = read_json(root / pool_name / "pool.json");
    PoolResult pool;
    pool.spec = spec_from_json(detail::field(doc, "spec", "pool"), "pool.spec");
    pool.base_seed = detail::get_as<std::uint64_t>(doc, "base_seed", "pool");
    const json& tc = detail::field(doc, "train_config", "pool");
    pool.config.learning_rate = detail::get_as<double>(tc, "learning_rate", "pool.train_config");
    pool.config.momentum = detail::get_as<double>(tc, "momentum", "pool.train_config");
    pool.config.batch_size = detail::get_as<int>(tc, "batch_size", "pool.train_config");
    pool.config.epochs = detail::get_as<int>(tc, "epochs", "pool.train_config");
    pool.config.loss = parse_loss(detail::get_as<std::string>(tc, "loss", "pool.train_config"));
    pool.config.init_std = detail::get_as<double>(tc, "init_std", "pool.train_config");
    pool.config.seed = detail::get_as<std::uint64_t>(tc, "seed", "pool.train_config");
    for (const auto& mj : detail::field(doc, "members", "pool")) {
        PoolMember m;
        m.untrained = import_network(root / detail::get_as<std::string>(mj, "untrained_path", "pool.members"));
        m.failed = detail::get_as<bool>(mj, "failed", "pool.members");
        if (m.failed) {
            m.failure = mj.value("failure", "");
            m.failed_epoch = mj.value("failed_epoch", -1);
            m.trained = m.untrained;
        } else {
            m.trained = import_network(root / detail::get_as<std::string>(mj, "trained_path", "pool.members"));
            m.report.final_metric = detail::get_as<double>(mj, "final_metric", "pool.members");
            m.report.epoch_loss = detail::get_as<std::vector<double>>(mj, "epoch_loss", "pool.members");
        }
        pool.members.push_back(std::move(m));
    }
    return pool;
}

inline void write_distribution(ArtifactWriter& out, json& index, const std::string& pool_name,
                               const MetricDistribution& d, const std::string& suffix) {
    const std::string stem = pool_name + "/dist/" + d.metric + "_L" + std::to_string(d.layer) + suffix;
    std::ostringstream csv;
    csv << "metric,layer,bin_left,bin_right,count\n";
    for (std::size_t b = 0; b < d.histogram.counts.size(); ++b)
        csv << d.metric << ',' << d.layer << ',' << fmt17(d.histogram.edges[b]) << ','
            << fmt17(d.histogram.edges[b + 1]) << ',' << d.histogram.counts[b] << '\n';
    out.text(stem + ".csv", csv.str());
    out.json_file(stem + ".json", summary_json(d.summary));
    out.doubles(stem + ".f64", d.values);
    index.push_back({{"pool", pool_name},
                     {"metric", d.metric},
                     {"layer", d.layer},
                     {"side", suffix.empty() ? "trained" : "untrained"},
                     {"histogram", stem + ".csv"},
                     {"summary", stem + ".json"},
                     {"values", stem + ".f64"}});
}

inline void write_heatmap(ArtifactWriter& out, const std::string& pool_name, const std::string& tag,
                          const Matrix& grid, bool trained, const std::string& dataset) {
    std::ostringstream csv;
    for (Index r = 0; r < grid.rows(); ++r) {
        for (Index c = 0; c < grid.cols(); ++c) csv << (c ? "," : "") << fmt17(grid(r, c));
        csv << '\n';
    }
    out.text(pool_name + "/heatmap_" + tag + ".csv", csv.str());
    out.json_file(pool_name + "/heatmap_" + tag + ".json",
                  {{"height", grid.rows()}, {"width", grid.cols()}, {"trained", trained}, {"dataset", dataset}});
}

/// Mean heatmap over healthy members, each with its own sample batch.
inline StrengthHeatmap pool_heatmap(const PoolResult& pool, const Dataset& ds, const MetricOptions& o, PoolSide side) {
    StrengthHeatmap acc;
    int n = 0;
    for (const auto& m : pool.members) {
        if (m.failed) continue;
        const auto samples = member_samples(pool, m, ds, o);
        const auto h = rnn_strength_heatmap(side == PoolSide::Trained ? m.trained : m.untrained, samples);
        if (n == 0) acc.grid = Matrix::Zero(h.grid.rows(), h.grid.cols());
        acc.grid += h.grid;
        ++n;
    }
    if (n > 0) acc.grid /= double(n);
    acc.trained = side == PoolSide::Trained;
    return acc;
}

inline std::vector<int> metric_layers(const ExperimentConfig& c, const ArchitectureSpec& spec) {
    std::vector<int> layers;
    if (c.layers.empty()) {
        for (int i = 0; i < spec.depth(); ++i) layers.push_back(i);
    } else {
        for (int l : c.layers)
            if (l < spec.depth()) layers.push_back(l);
    }
    return layers;
}

/// All metric artifacts of one pool.
inline void write_pool_metrics(ArtifactWriter& out, json& dist_index, const ExperimentConfig& c,
                               const std::string& pool_name, const PoolResult& pool, const Dataset& metric_set) {
    MetricOptions o;
    o.sample_size = c.sample_size;
    o.samples_seed = c.seed;
    o.bins = c.bins;

    std::ostringstream ns, ls;
    ns << "network_seed,layer,node,s_in,s_out,s_total\n";
    ls << "network_seed,layer,mean,variance,fluctuation_in,fluctuation_out,fluctuation_total\n";
    for (const auto& m : pool.members) {
        if (m.failed) continue;
        for (int l = 0; l < pool.spec.depth(); ++l) {
            for (const auto& r : node_strength(m.trained, l))
                ns << m.trained.seed << ',' << l << ',' << r.node << ',' << fmt17(r.s_in) << ',' << fmt17(r.s_out)
                   << ',' << fmt17(r.s_total) << '\n';
            const auto st = layer_stats(m.trained, l);
            ls << m.trained.seed << ',' << l << ',' << fmt17(st.mean) << ',' << fmt17(st.variance) << ','
               << fmt17(st.fluctuation_in) << ',' << fmt17(st.fluctuation_out) << ',' << fmt17(st.fluctuation_total)
               << '\n';
        }
    }
    out.text(pool_name + "/node_strength.csv", ns.str());
    out.text(pool_name + "/layer_stats.csv", ls.str());

    json ks = json::array();
    for (int layer : metric_layers(c, pool.spec)) {
        for (const auto& name : c.metrics) {
            const Metric metric = parse_metric(name);
            if (is_data_dependent(metric)) {
                const auto cmp = compare_trained_untrained(pool, metric, layer, metric_set, o);
                write_distribution(out, dist_index, pool_name, cmp.trained, "");
                write_distribution(out, dist_index, pool_name, cmp.untrained, "_untrained");
                ks.push_back({{"metric", name}, {"layer", layer}, {"ks", cmp.ks}});
            } else {
                write_distribution(out, dist_index, pool_name, aggregate_metric(pool, metric, layer, metric_set, o), "");
            }
        }
        for (const auto& pair : c.correlations) {
            const auto colon = pair.find(':');
            const Metric a = parse_metric(pair.substr(0, colon)), b = parse_metric(pair.substr(colon + 1));
            const auto res = correlate(pool, a, b, layer, metric_set, o);
            const std::string stem = pool_name + "/corr/" + to_string(a) + "_vs_" + to_string(b) + "_L" +
                                     std::to_string(layer);
            std::ostringstream csv;
            csv << to_string(a) << ',' << to_string(b) << '\n';
            for (std::size_t i = 0; i < res.x.size(); ++i) csv << fmt17(res.x[i]) << ',' << fmt17(res.y[i]) << '\n';
            out.text(stem + ".csv", csv.str());
            json rec{{"metric_a", res.record.metric_a}, {"metric_b", res.record.metric_b},
                     {"layer", layer},                  {"points", res.record.points},
                     {"defined", res.record.r.has_value()}};
            rec["pearson_r"] = res.record.r ? json(*res.record.r) : json(nullptr);
            out.json_file(stem + ".json", rec);
        }
        if (c.export_neuron_matrices) {
            for (const auto& m : pool.members) {
                if (m.failed) continue;
                const auto samples = member_samples(pool, m, metric_set, o);
                const auto strength = neuron_strength(m.trained, samples, layer);
                const auto activation = neuron_activation(strength, pool.spec.layer_activation(layer));
                for (const auto* mat : {&strength, &activation}) {
                    const std::string kind = mat == &strength ? "neuron_strength" : "neuron_activation";
                    const std::string rel = pool_name + "/neurons/" + kind + "_L" + std::to_string(layer) + "_seed" +
                                            std::to_string(m.trained.seed) + ".csv";
                    std::ostringstream csv;
                    const bool timed = mat->time_steps > 1 ||
                                       pool.spec.layers[layer].kind == LayerKind::Recurrent;
                    csv << "network_seed,layer,sample_idx,neuron_idx" << (timed ? ",time_step" : "") << ",value\n";
                    const Index w = mat->width();
                    for (Index s = 0; s < mat->values.rows(); ++s)
                        for (Index t = 0; t < mat->time_steps; ++t)
                            for (Index k = 0; k < w; ++k) {
                                csv << m.trained.seed << ',' << layer << ',' << samples.indices[s] << ',' << k;
                                if (timed) csv << ',' << t;
                                csv << ',' << fmt17(mat->values(s, t * w + k)) << '\n';
                            }
                    out.text(rel, csv.str());
                }
            }
        }
    }
    out.json_file(pool_name + "/trained_vs_untrained.json", ks);

    if (first_recurrent_layer(pool.members.front().trained) == 0) {
        write_heatmap(out, pool_name, "trained", pool_heatmap(pool, metric_set, o, PoolSide::Trained).grid, true,
                      metric_set.name);
        write_heatmap(out, pool_name, "untrained", pool_heatmap(pool, metric_set, o, PoolSide::Untrained).grid, false,
                      metric_set.name);
    }
}

struct ExperimentManifest {
    json document;
    fs::path path;
};

enum class Stage { Train, Metrics, All };

using Logger = std::function<void(const std::string&)>;

/// Trains (Stage::Train), computes metrics on previously trained pools
/// (Stage::Metrics) or both, then writes manifest.json.
inline ExperimentManifest run_experiment(const ExperimentConfig& config, Stage stage = Stage::All,
                                         const Logger& log = {}) {
    validate(config);
    const auto start = std::chrono::steady_clock::now();
    auto say = [&](const std::string& s) {
        if (log) log(s);
    };
    const DatasetPair data = load_datasets(config);
    const fs::path root = config.output_dir;
    fs::create_directories(root);
    ArtifactWriter out(root);

    const auto cells = pool_cells(config, data.train);
    if (stage != Stage::Metrics) {
        // pools left behind by an earlier config would otherwise sit unlisted
        std::set<std::string> current;
        for (const auto& cell : cells) current.insert(cell.name);
        for (const auto& entry : fs::directory_iterator(root))
            if (entry.is_directory() && fs::exists(entry.path() / "pool.json") &&
                !current.count(entry.path().filename().string()))
                fs::remove_all(entry.path());
    }

    json pools = json::array();
    json dist_index = json::array();
    for (const auto& cell : cells) {
        const Dataset train_set = cell.row_sequence ? as_row_sequence(data.train) : data.train;
        const Dataset test_set = cell.row_sequence ? as_row_sequence(data.test) : data.test;
        const auto cell_start = std::chrono::steady_clock::now();
        PoolResult pool;
        if (stage == Stage::Metrics) {
            if (!fs::exists(root / cell.name / "pool.json"))
                throw std::runtime_error("pool '" + cell.name + "' has not been trained: run train-pool first (missing " +
                                         (root / cell.name / "pool.json").string() + ")");
            pool = read_pool(root, cell.name);
            if (!(pool.spec == cell.spec))
                throw std::runtime_error("pool '" + cell.name + "' was trained with a different architecture");
            for (std::size_t i = 0; i < pool.members.size(); ++i) {
                const std::string base = cell.name + "/networks/member_" + std::to_string(i);
                out.record_existing(base + "_untrained.json");
                if (!pool.members[i].failed) out.record_existing(base + "_trained.json");
            }
            out.record_existing(cell.name + "/pool.json");
        } else {
            fs::remove_all(root / cell.name);
            say("training pool " + cell.name + " (" + std::to_string(config.pool_size) + " networks)");
            pool = train_pool(cell.spec, config.pool_size, config.seed, train_set, train_config(config, cell.spec),
                              &test_set, config.threads, [&](std::size_t i, const PoolMember& m) {
                                  say("  member " + std::to_string(i) +
                                      (m.failed ? " diverged: " + m.failure
                                                : " final metric " + fmt17(m.report.final_metric)));
                              });
            write_pool(out, cell.name, pool, data.train.name);
        }
        if (stage != Stage::Train) {
            for (const char* sub : {"dist", "corr", "neurons"}) fs::remove_all(root / cell.name / sub);
            say("computing metrics for " + cell.name);
            write_pool_metrics(out, dist_index, config, cell.name, pool, train_set);
        }
        json metrics = json::array(), failed = json::array();
        for (const auto& m : pool.members) {
            if (m.failed) failed.push_back(m.untrained.seed);
            else metrics.push_back(m.report.final_metric);
        }
        pools.push_back({{"pool", cell.name},
                         {"spec", to_json(cell.spec)},
                         {"task", to_string(cell.spec.task)},
                         {"final_metric", metrics},
                         {"failed_seeds", failed},
                         {"wall_seconds",
                          std::chrono::duration<double>(std::chrono::steady_clock::now() - cell_start).count()}});
    }

    ExperimentManifest manifest;
    manifest.path = root / "manifest.json";
    manifest.document = {{"format", "cntnn-manifest"},
                         {"version", 1},
                         {"config", to_json(config)},
                         {"stage", stage == Stage::Train ? "train" : stage == Stage::Metrics ? "metrics" : "all"},
                         {"pools", pools},
                         {"distributions", dist_index},
                         {"files", out.file_list()},
                         {"total_wall_seconds",
                          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    write_text(manifest.path, manifest.document.dump(2) + "\n");
    return manifest;
}

inline ExperimentManifest run_experiment(const fs::path& config_path, const ConfigOverrides& overrides = {},
                                         Stage stage = Stage::All, const Logger& log = {}) {
    return run_experiment(apply(load_config(config_path), overrides), stage, log);
}

/// Re-hashes every listed file; returns the paths whose digest differs.
inline std::vector<std::string> verify_manifest(const fs::path& manifest_path) {
    const json doc = read_json(manifest_path);
    const fs::path root = manifest_path.parent_path();
    std::vector<std::string> bad;
    for (const auto& f : doc.at("files")) {
        const auto rel = f.at("path").get<std::string>();
        if (!fs::exists(root / rel) || sha256_file(root / rel) != f.at("sha256").get<std::string>()) bad.push_back(rel);
    }
    return bad;
}

struct ExperimentComparison {
    std::string metric;
    int layer = 0;
    std::string pool_a, pool_b;
    double ks = 0.0;
    MomentSummary a, b;
    double delta_mean = 0.0, delta_std = 0.0, delta_skewness = 0.0, delta_kurtosis = 0.0;
};

inline json to_json(const ExperimentComparison& c) {
    return {{"metric", c.metric},         {"layer", c.layer},
            {"pool_a", c.pool_a},         {"pool_b", c.pool_b},
            {"ks", c.ks},                 {"summary_a", summary_json(c.a)},
            {"summary_b", summary_json(c.b)}, {"delta_mean", c.delta_mean},
            {"delta_std", c.delta_std},   {"delta_skewness", c.delta_skewness},
            {"delta_kurtosis", c.delta_kurtosis}};
}

/// Pooled trained-side values of (pool, metric, layer) from a manifest. An
/// empty pool name is allowed when the manifest holds exactly one pool with
/// that distribution.
inline std::pair<std::string, std::vector<double>> manifest_values(const fs::path& manifest_path, const std::string& metric,
                                                                   int layer, const std::string& pool) {
    const json doc = read_json(manifest_path);
    std::vector<json> hits;
    for (const auto& d : doc.at("distributions"))
        if (d.at("metric") == metric && d.at("layer") == layer && d.at("side") == "trained" &&
            (pool.empty() || d.at("pool") == pool))
            hits.push_back(d);
    if (hits.empty())
        throw std::invalid_argument(manifest_path.string() + ": no distribution for metric '" + metric + "' at layer " +
                                    std::to_string(layer) + (pool.empty() ? "" : " in pool '" + pool + "'"));
    if (hits.size() > 1)
        throw std::invalid_argument(manifest_path.string() + ": several pools carry '" + metric +
                                    "'; choose one with a pool name");
    const auto& d = hits.front();
    return {d.at("pool").get<std::string>(),
            read_doubles(manifest_path.parent_path() / d.at("values").get<std::string>())};
}

inline ExperimentComparison compare_experiments(const fs::path& manifest_a, const fs::path& manifest_b,
                                                const std::string& metric, int layer, const std::string& pool_a = {},
                                                const std::string& pool_b = {}) {
    parse_metric(metric);
    auto [name_a, va] = manifest_values(manifest_a, metric, layer, pool_a);
    auto [name_b, vb] = manifest_values(manifest_b, metric, layer, pool_b);
    ExperimentComparison c;
    c.metric = metric;
    c.layer = layer;
    c.pool_a = name_a;
    c.pool_b = name_b;
    c.ks = ks_statistic(va, vb);
    c.a = moments(va);
    c.b = moments(vb);
    c.delta_mean = c.b.mean - c.a.mean;
    c.delta_std = c.b.std - c.a.std;
    c.delta_skewness = c.b.skewness - c.a.skewness;
    c.delta_kurtosis = c.b.kurtosis - c.a.kurtosis;
    return c;
}

} // namespace cntnn
