#pragma once

#include "cntnn/cnt_data.hpp"
#include "cntnn/cnt_topological.hpp"
#include "cntnn/stats.hpp"
#include "cntnn/train.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace cntnn {

struct PoolMember {
    Network trained;
    Network untrained; // parameters at initialization
    TrainReport report;
    bool failed = false;
    int failed_epoch = -1;
    std::string failure;
};

struct PoolResult {
    ArchitectureSpec spec;
    std::vector<PoolMember> members;
    std::uint64_t base_seed = 0;
    TrainConfig config;

    std::size_t healthy_count() const {
        return std::size_t(std::count_if(members.begin(), members.end(), [](const auto& m) { return !m.failed; }));
    }
};

using PoolProgress = std::function<void(std::size_t member, const PoolMember&)>;

/// Member i uses network seed base_seed + i and shuffling seed config.seed + i.
/// Divergent members are flagged and kept; the pool fails only if all diverge.
inline PoolResult train_pool(const ArchitectureSpec& spec, int n, std::uint64_t base_seed, const Dataset& train_set,
                             const TrainConfig& config, const Dataset* eval_set = nullptr, int threads = 1,
                             const PoolProgress& progress = {}) {
    if (n < 1) throw std::invalid_argument("train_pool: pool size must be >= 1");
    validate(spec);
    validate(config);
    PoolResult pool;
    pool.spec = spec;
    pool.base_seed = base_seed;
    pool.config = config;
    pool.members.resize(std::size_t(n));

    std::atomic<int> next{0};
    std::mutex report_mutex;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            PoolMember& m = pool.members[std::size_t(i)];
            m.untrained = build_network(spec, config.init_std, base_seed + std::uint64_t(i));
            m.trained = m.untrained;
            TrainConfig member_config = config;
            member_config.seed = config.seed + std::uint64_t(i);
            try {
                m.report = train(m.trained, train_set, member_config, eval_set);
            } catch (const DivergenceError& e) {
                m.failed = true;
                m.failed_epoch = e.epoch();
                m.failure = e.what();
            }
            if (progress) {
                std::lock_guard lock(report_mutex);
                progress(std::size_t(i), m);
            }
        }
    };
    const int workers = std::clamp(threads, 1, n);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool_threads;
        for (int t = 0; t < workers; ++t) pool_threads.emplace_back(worker);
        for (auto& t : pool_threads) t.join();
    }
    if (pool.healthy_count() == 0) throw std::runtime_error("train_pool: every pool member diverged");
    return pool;
}

enum class Metric {
    LinkMean,
    LinkVariance,
    NodeStrengthIn,
    NodeStrengthOut,
    NodeStrength,
    LayerFluctuation,
    LayerFluctuationIn,
    LayerFluctuationOut,
    NeuronStrength,
    NeuronActivation,
};

inline constexpr std::pair<Metric, std::string_view> kMetricNames[] = {
    {Metric::LinkMean, "link_mean"},
    {Metric::LinkVariance, "link_variance"},
    {Metric::NodeStrengthIn, "node_strength_in"},
    {Metric::NodeStrengthOut, "node_strength_out"},
    {Metric::NodeStrength, "node_strength"},
    {Metric::LayerFluctuation, "layer_fluctuation"},
    {Metric::LayerFluctuationIn, "layer_fluctuation_in"},
    {Metric::LayerFluctuationOut, "layer_fluctuation_out"},
    {Metric::NeuronStrength, "neuron_strength"},
    {Metric::NeuronActivation, "neuron_activation"},
};

inline std::string to_string(Metric m) {
    for (const auto& [k, name] : kMetricNames)
        if (k == m) return std::string(name);
    return "?";
}

inline Metric parse_metric(std::string_view s) {
    for (const auto& [k, name] : kMetricNames)
        if (name == s) return k;
    std::string known;
    for (const auto& [k, name] : kMetricNames) known += (known.empty() ? "" : ", ") + std::string(name);
    throw std::invalid_argument("unknown metric '" + std::string(s) + "' (known: " + known + ")");
}

inline bool is_data_dependent(Metric m) { return m == Metric::NeuronStrength || m == Metric::NeuronActivation; }

struct MetricOptions {
    Index sample_size = 100;
    std::uint64_t samples_seed = 0;
    int bins = 100;
    BiasMode bias_mode = BiasMode::PerEdge;
};

/// All scalar values one network contributes to a metric at a layer.
/// `samples` is only read for data-dependent metrics.
inline std::vector<double> metric_values(const Network& net, Metric metric, int layer, const SampleBatch* samples,
                                         BiasMode mode = BiasMode::PerEdge) {
    if (layer < 0 || layer >= net.depth())
        throw std::invalid_argument(to_string(metric) + ": layer " + std::to_string(layer) + " out of range [0, " +
                                    std::to_string(net.depth()) + ")");
    switch (metric) {
    case Metric::LinkMean: return {link_stats(net.spec.layers[layer], net.params[layer]).mean};
    case Metric::LinkVariance: return {link_stats(net.spec.layers[layer], net.params[layer]).variance};
    case Metric::LayerFluctuation: return {layer_stats(net, layer, mode).fluctuation_total};
    case Metric::LayerFluctuationIn: return {layer_stats(net, layer, mode).fluctuation_in};
    case Metric::LayerFluctuationOut: return {layer_stats(net, layer, mode).fluctuation_out};
    case Metric::NodeStrengthIn:
    case Metric::NodeStrengthOut:
    case Metric::NodeStrength: {
        std::vector<double> v;
        for (const auto& r : node_strength(net, layer, mode))
            v.push_back(metric == Metric::NodeStrengthIn ? r.s_in : metric == Metric::NodeStrengthOut ? r.s_out : r.s_total);
        return v;
    }
    case Metric::NeuronStrength:
    case Metric::NeuronActivation: {
        if (!samples) throw std::invalid_argument(to_string(metric) + " needs a sample batch");
        auto m = neuron_strength(net, *samples, layer);
        if (metric == Metric::NeuronActivation) m = neuron_activation(m, net.spec.layer_activation(layer));
        return std::vector<double>(m.values.data(), m.values.data() + m.values.size());
    }
    }
    throw std::logic_error("unreachable metric");
}

/// One value per neuron: node strengths directly, data-dependent metrics
/// averaged over samples (and time steps for recurrent layers).
inline std::vector<double> per_neuron_values(const Network& net, Metric metric, int layer, const SampleBatch* samples,
                                             BiasMode mode = BiasMode::PerEdge) {
    switch (metric) {
    case Metric::NodeStrengthIn:
    case Metric::NodeStrengthOut:
    case Metric::NodeStrength: return metric_values(net, metric, layer, samples, mode);
    case Metric::NeuronStrength:
    case Metric::NeuronActivation: {
        if (!samples) throw std::invalid_argument(to_string(metric) + " needs a sample batch");
        auto m = neuron_strength(net, *samples, layer);
        if (metric == Metric::NeuronActivation) m = neuron_activation(m, net.spec.layer_activation(layer));
        const Index width = m.width();
        std::vector<double> v(std::size_t(width), 0.0);
        for (Index s = 0; s < m.values.rows(); ++s)
            for (Index t = 0; t < m.time_steps; ++t)
                for (Index k = 0; k < width; ++k) v[std::size_t(k)] += m.values(s, t * width + k);
        for (auto& x : v) x /= double(m.values.rows() * m.time_steps);
        return v;
    }
    default:
        throw std::invalid_argument(to_string(metric) + " is not a per-neuron metric");
    }
}

struct MetricDistribution {
    std::string metric;
    int layer = 0;
    std::vector<double> values; // pooled, sorted ascending
    Histogram histogram;
    MomentSummary summary;
};

/// Builds the histogram and summary from pooled values. Values are sorted
/// first so the result does not depend on pooling order.
inline MetricDistribution make_distribution(std::string metric, int layer, std::vector<double> values, int bins) {
    std::sort(values.begin(), values.end());
    MetricDistribution d;
    d.metric = std::move(metric);
    d.layer = layer;
    d.histogram = make_histogram(values, bins);
    d.summary = moments(values);
    d.values = std::move(values);
    return d;
}

enum class PoolSide { Trained, Untrained };

inline std::uint64_t member_index(const PoolResult& pool, const PoolMember& m) { return m.untrained.seed - pool.base_seed; }

/// Sample batch used for member `m`: seed samples_seed + member index.
inline SampleBatch member_samples(const PoolResult& pool, const PoolMember& m, const Dataset& ds,
                                  const MetricOptions& o) {
    return sample_inputs(ds, o.sample_size, o.samples_seed + member_index(pool, m));
}

inline MetricDistribution aggregate_metric(const PoolResult& pool, Metric metric, int layer, const Dataset& ds,
                                           const MetricOptions& o = {}, PoolSide side = PoolSide::Trained) {
    std::vector<double> pooled;
    for (const auto& m : pool.members) {
        if (m.failed) continue;
        const Network& net = side == PoolSide::Trained ? m.trained : m.untrained;
        std::optional<SampleBatch> samples;
        if (is_data_dependent(metric)) samples = member_samples(pool, m, ds, o);
        const auto v = metric_values(net, metric, layer, samples ? &*samples : nullptr, o.bias_mode);
        pooled.insert(pooled.end(), v.begin(), v.end());
    }
    if (pooled.empty()) throw std::runtime_error("aggregate_metric: pool has no healthy members");
    return make_distribution(to_string(metric), layer, std::move(pooled), o.bins);
}

inline MetricDistribution aggregate_metric(const PoolResult& pool, std::string_view metric, int layer,
                                           const Dataset& ds, const MetricOptions& o = {},
                                           PoolSide side = PoolSide::Trained) {
    return aggregate_metric(pool, parse_metric(metric), layer, ds, o, side);
}

struct CorrelationRecord {
    std::string metric_a, metric_b;
    int layer = 0;
    std::optional<double> r; // empty when undefined
    std::int64_t points = 0;
};

struct CorrelationResult {
    CorrelationRecord record;
    std::vector<double> x, y; // scatter points, one per (network, neuron)
};

inline CorrelationResult correlate_values(std::string a, std::string b, int layer, std::vector<double> x,
                                          std::vector<double> y) {
    CorrelationResult res;
    res.record.metric_a = std::move(a);
    res.record.metric_b = std::move(b);
    res.record.layer = layer;
    res.record.points = std::int64_t(x.size());
    res.record.r = pearson(x, y);
    res.x = std::move(x);
    res.y = std::move(y);
    return res;
}

inline CorrelationResult correlate(const PoolResult& pool, Metric a, Metric b, int layer, const Dataset& ds,
                                   const MetricOptions& o = {}) {
    std::vector<double> x, y;
    for (const auto& m : pool.members) {
        if (m.failed) continue;
        std::optional<SampleBatch> samples;
        if (is_data_dependent(a) || is_data_dependent(b)) samples = member_samples(pool, m, ds, o);
        const SampleBatch* sp = samples ? &*samples : nullptr;
        const auto va = per_neuron_values(m.trained, a, layer, sp, o.bias_mode);
        const auto vb = per_neuron_values(m.trained, b, layer, sp, o.bias_mode);
        if (va.size() != vb.size())
            throw std::invalid_argument("correlate: " + to_string(a) + " and " + to_string(b) +
                                        " have different neuron counts at layer " + std::to_string(layer));
        x.insert(x.end(), va.begin(), va.end());
        y.insert(y.end(), vb.begin(), vb.end());
    }
    return correlate_values(to_string(a), to_string(b), layer, std::move(x), std::move(y));
}

struct TrainedUntrainedComparison {
    MetricDistribution trained;
    MetricDistribution untrained;
    double ks = 0.0;
};

inline TrainedUntrainedComparison compare_trained_untrained(const PoolResult& pool, Metric metric, int layer,
                                                            const Dataset& ds, const MetricOptions& o = {}) {
    TrainedUntrainedComparison c;
    c.trained = aggregate_metric(pool, metric, layer, ds, o, PoolSide::Trained);
    c.untrained = aggregate_metric(pool, metric, layer, ds, o, PoolSide::Untrained);
    c.ks = ks_statistic(c.trained.values, c.untrained.values);
    return c;
}

} // namespace cntnn
