// Acceptance runner: prints one PASS/FAIL/SKIP line per criterion.
// Exit status: 0 when nothing failed and something ran, 1 on any failure,
// 77 when every requested criterion was skipped (missing datasets).

#include "cntnn/cntnn.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

namespace {

using namespace cntnn;

enum class Outcome { Pass, Fail, Skip };

struct Result {
    Outcome outcome = Outcome::Fail;
    std::string detail;
};

Result pass(std::string d) { return {Outcome::Pass, std::move(d)}; }
Result fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Result skip(std::string d) { return {Outcome::Skip, std::move(d)}; }
Result check(bool ok, std::string d) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(d)}; }

std::string num(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

struct Context {
    fs::path configs;
    fs::path cache;
    std::string data_root;
};

Matrix uniform(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

Network randomized(const ArchitectureSpec& spec, std::mt19937_64& rng) {
    Network net = build_network(spec, 0.5, rng());
    for (auto& p : net.params) p.bias = uniform(p.bias.size(), 1, rng, -0.5, 0.5);
    return net;
}

/// Runs (or reuses) an experiment. A cached run is reused only when its
/// manifest records the same config and every listed digest still verifies.
ExperimentManifest cached_experiment(const Context& ctx, const std::string& config_file) {
    ExperimentConfig c = load_config(ctx.configs / config_file);
    c.data_root = ctx.data_root;
    c.output_dir = (ctx.cache / c.name).string();
    const fs::path manifest = fs::path(c.output_dir) / "manifest.json";
    if (fs::exists(manifest)) {
        try {
            const json doc = read_json(manifest);
            if (doc.at("config") == to_json(c) && doc.at("stage") == "all" && verify_manifest(manifest).empty()) {
                std::cerr << "reusing cached " << c.name << "\n";
                return {doc, manifest};
            }
        } catch (const std::exception&) {
        }
    }
    std::cerr << "running " << c.name << " (pool size " << c.pool_size << ")\n";
    return run_experiment(c, Stage::All, [](const std::string& s) { std::cerr << s << "\n"; });
}

const json& pool_entry(const ExperimentManifest& m, const std::string& pool) {
    for (const auto& p : m.document.at("pools"))
        if (p.at("pool") == pool) return p;
    throw std::runtime_error("manifest lacks pool " + pool);
}

std::vector<double> pool_values(const ExperimentManifest& m, const std::string& pool, const std::string& metric,
                                 int layer) {
    return manifest_values(m.path, metric, layer, pool).second;
}

std::string metric_list(const json& pool) {
    std::string s;
    for (const auto& v : pool.at("final_metric")) s += (s.empty() ? "" : ", ") + num(v.get<double>());
    if (!pool.at("failed_seeds").empty()) s += "; diverged seeds " + pool.at("failed_seeds").dump();
    return "[" + s + "]";
}

/// Every member trained and every final metric inside [lo, hi].
bool all_within(const json& pool, std::size_t expected, double lo, double hi) {
    if (!pool.at("failed_seeds").empty() || pool.at("final_metric").size() != expected) return false;
    for (const auto& v : pool.at("final_metric"))
        if (v.get<double>() < lo || v.get<double>() > hi) return false;
    return true;
}

bool mnist_present(const Context& ctx) { return mnist_available(resolve_data_root(ctx.data_root)); }

// 1 -------------------------------------------------------------------------
Result criterion_fc_accuracy(const Context& ctx) {
    if (!mnist_present(ctx)) return skip("MNIST files not found under " + resolve_data_root(ctx.data_root).string());
    const auto m = cached_experiment(ctx, "level1_mnist.json");
    const auto& fc = pool_entry(m, "fc_sigmoid_L3");
    return check(all_within(fc, 5, 0.85, 0.97), "FC test accuracy " + metric_list(fc) + " within [0.85, 0.97]");
}

// 2 -------------------------------------------------------------------------
Result criterion_other_architectures(const Context& ctx) {
    if (!mnist_present(ctx)) return skip("MNIST files not found under " + resolve_data_root(ctx.data_root).string());
    const auto m = cached_experiment(ctx, "level1_mnist.json");
    const auto& cnn = pool_entry(m, "cnn_sigmoid_L3");
    const auto& rnn = pool_entry(m, "rnn_sigmoid");
    const auto& ae = pool_entry(m, "ae_sigmoid_L3");
    const bool ok = all_within(cnn, 5, 0.85, 1.0) && all_within(rnn, 5, 0.80, 1.0) && all_within(ae, 5, 0.0, 0.08);
    return check(ok, "CNN accuracy " + metric_list(cnn) + " >= 0.85, RNN accuracy " + metric_list(rnn) +
                         " >= 0.80, AE MSE " + metric_list(ae) + " <= 0.08");
}

// 3 -------------------------------------------------------------------------
Result criterion_cifar10(const Context& ctx) {
    const auto root = resolve_data_root(ctx.data_root);
    if (!cifar10_available(root)) return skip("extended criterion; CIFAR-10 binary batches not found under " + root.string());
    const auto m = cached_experiment(ctx, "level1_cifar10.json");
    const auto& fc = pool_entry(m, "fc_sigmoid_L3");
    const auto& cnn = pool_entry(m, "cnn_sigmoid_L3");
    const auto& rnn = pool_entry(m, "rnn_sigmoid");
    const bool ok = all_within(fc, 5, 0.25, 0.45) && all_within(cnn, 5, 0.45, 0.65) && all_within(rnn, 5, 0.35, 0.50);
    return check(ok, "FC " + metric_list(fc) + " in [0.25, 0.45], CNN " + metric_list(cnn) + " in [0.45, 0.65], RNN " +
                         metric_list(rnn) + " in [0.35, 0.50]");
}

// 4 -------------------------------------------------------------------------
Result criterion_conv_oracle(const Context&) {
    std::mt19937_64 rng(4);
    double worst = 0.0;
    int combos = 0;
    for (int kernel = 1; kernel <= 5; ++kernel)
        for (int stride = 1; stride <= 3; ++stride, ++combos)
            for (int trial = 0; trial < 100; ++trial) {
                const int c = 1 + int(rng() % 3), h = kernel + int(rng() % 8), w = kernel + int(rng() % 8);
                ArchitectureSpec s;
                s.kind = ArchKind::CNN;
                s.activation = Activation::ReLU;
                const auto conv = conv_layer({c, h, w}, 1 + int(rng() % 4), kernel, stride);
                s.layers = {conv, dense_layer(conv.fan_out, 2)};
                const Network net = randomized(s, rng);
                const auto samples = as_sample_batch(uniform(1, conv.fan_in, rng), {c, h, w});
                const auto m = conv_neuron_strength(net, samples, 0);
                const Vector ref = conv_toeplitz_oracle(conv, net.params[0], samples.inputs.row(0).transpose());
                worst = std::max(worst, (m.values.row(0).transpose() - ref).cwiseAbs().maxCoeff());
            }
    return check(worst <= 1e-10, "patch isolation vs Toeplitz oracle, " + std::to_string(combos) +
                                     " kernel/stride combinations x 100 instances, max |diff| " + num(worst, 3));
}

// 5 -------------------------------------------------------------------------
Result criterion_rnn_oracle(const Context&) {
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int F = 1 + int(rng() % 6), H = 1 + int(rng() % 8), T = 1 + int(rng() % 10);
        const Activation f = std::array{Activation::Linear, Activation::ReLU, Activation::Sigmoid}[trial % 3];
        ArchitectureSpec s;
        s.kind = ArchKind::RNN;
        s.activation = f;
        s.layers = {recurrent_layer(F, H, T), dense_layer(H, 2)};
        const Network net = randomized(s, rng);
        const auto& p = net.params[0];
        const Matrix x = uniform(4, Index(F) * T, rng, 0.0, 1.0);
        const auto m = rnn_unfolded_strength(net, as_sample_batch(x));
        for (Index b = 0; b < x.rows(); ++b) {
            std::vector<double> h(static_cast<std::size_t>(H), 0.0), next(static_cast<std::size_t>(H));
            for (int t = 0; t < T; ++t) {
                for (int k = 0; k < H; ++k) {
                    double z = p.bias(k);
                    for (int i = 0; i < F; ++i) z += x(b, t * F + i) * p.weights(i, k);
                    for (int j = 0; j < H; ++j) z += h[j] * p.recurrent(j, k);
                    worst = std::max(worst, std::abs(z - m.values(b, t * H + k)));
                    next[k] = activate(f, z);
                }
                h.swap(next);
            }
        }
    }
    return check(worst <= 1e-10, "temporal unfolding vs loop forward, 100 instances, every step, max |diff| " + num(worst, 3));
}

// 6 -------------------------------------------------------------------------
Result criterion_grad_check(const Context&) {
    std::mt19937_64 rng(6);
    double worst = 0.0;
    std::string worst_case;
    for (auto kind : {LayerKind::Dense, LayerKind::Conv2d, LayerKind::Recurrent})
        for (auto f : {Activation::Linear, Activation::ReLU, Activation::Sigmoid})
            for (int trial = 0; trial < 3; ++trial) {
                ArchitectureSpec s;
                s.activation = f;
                if (kind == LayerKind::Dense) {
                    s.kind = ArchKind::FC;
                    s.layers = {dense_layer(6, 5), dense_layer(5, 4), dense_layer(4, 3)};
                } else if (kind == LayerKind::Conv2d) {
                    s.kind = ArchKind::CNN;
                    const auto c1 = conv_layer({2, 6, 6}, 3, 3, 1);
                    const auto c2 = conv_layer({3, 4, 4}, 2, 2, 2);
                    s.layers = {c1, c2, dense_layer(c2.fan_out, 3)};
                } else {
                    s.kind = ArchKind::RNN;
                    s.layers = {recurrent_layer(3, 4, 5), dense_layer(4, 3)};
                }
                const Network net = randomized(s, rng);
                Batch batch;
                batch.inputs = uniform(4, s.input_width(), rng, 0.0, 1.0);
                for (int i = 0; i < 4; ++i) batch.labels.push_back(int(rng() % 3));
                const auto r = grad_check(net, batch, 1e-4);
                if (r.max_relative_error >= worst) {
                    worst = r.max_relative_error;
                    worst_case = to_string(kind) + "/" + to_string(f);
                }
            }
    return check(worst < 1e-4, "dense, conv2d, recurrent x linear, relu, sigmoid; max relative error " + num(worst, 3) +
                                   " (" + worst_case + ")");
}

// 7 -------------------------------------------------------------------------
Result criterion_invariants(const Context&) {
    std::mt19937_64 rng(7);
    std::vector<std::string> broken;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok && std::find(broken.begin(), broken.end(), what) == broken.end()) broken.push_back(what);
    };
    for (int trial = 0; trial < 100; ++trial) {
        // link statistics against the double-loop definition
        const Index n = 1 + Index(rng() % 12), m = 1 + Index(rng() % 12);
        LayerParams p;
        p.weights = uniform(n, m, rng);
        p.bias = uniform(m, 1, rng);
        double sum = 0.0, ss = 0.0;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < m; ++j) sum += p.weights(i, j) + p.bias(j);
        const double mu = sum / double(n * m);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < m; ++j) ss += std::pow(p.weights(i, j) + p.bias(j) - mu, 2);
        expect(std::abs(link_weight_mean(p) - mu) < 1e-12, "link mean double loop");
        expect(std::abs(link_weight_variance(p) - ss / double(n * m)) < 1e-12, "link variance double loop");

        // node strength decomposition and scaling covariance
        const Activation f = std::array{Activation::Linear, Activation::ReLU, Activation::Sigmoid}[trial % 3];
        ArchitectureSpec s;
        s.kind = ArchKind::FC;
        s.activation = f;
        s.layers = {dense_layer(5, 4), dense_layer(4, 6), dense_layer(6, 3)};
        const Network net = randomized(s, rng);
        Network scaled = net;
        const double c = std::uniform_real_distribution<double>(-3, 3)(rng);
        for (auto& q : scaled.params) {
            q.weights *= c;
            q.bias *= c;
        }
        for (int l = 0; l < net.depth(); ++l) {
            const auto a = node_strength(net, l), b = node_strength(scaled, l);
            double out_sum = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) {
                expect(a[k].s_total == a[k].s_in + a[k].s_out, "node strength decomposition");
                expect(std::abs(b[k].s_total - c * a[k].s_total) < 1e-10, "node strength scaling covariance");
                out_sum += a[k].s_out;
            }
            const double next = l + 1 < net.depth() ? net.params[l + 1].weights.sum() : 0.0;
            expect(std::abs(out_sum - next) < 1e-10, "out-strength totals");
            const auto sa = layer_stats(net, l), sb = layer_stats(scaled, l);
            expect(std::abs(sb.fluctuation_total - std::abs(c) * sa.fluctuation_total) < 1e-10,
                   "fluctuation scaling covariance");
        }

        // fluctuation translation invariance
        std::vector<double> strengths(1 + rng() % 30);
        for (auto& v : strengths) v = std::uniform_real_distribution<double>(-5, 5)(rng);
        auto shifted = strengths;
        const double shift = std::uniform_real_distribution<double>(-10, 10)(rng);
        for (auto& v : shifted) v += shift;
        expect(std::abs(layer_fluctuation(strengths) - layer_fluctuation(shifted)) < 1e-9,
               "fluctuation translation invariance");

        // neuron activation is the activation of neuron strength
        const auto samples = as_sample_batch(uniform(5, 5, rng, 0.0, 1.0));
        for (int l = 0; l < net.depth(); ++l) {
            const auto st = neuron_strength(net, samples, l);
            const auto ac = neuron_activation(net, samples, l);
            for (Index i = 0; i < st.values.size(); ++i)
                expect(ac.values.data()[i] == activate(net.spec.layer_activation(l), st.values.data()[i]),
                       "strength/activation functional link");
        }

        // Pearson and KS bounds, histogram conservation
        std::vector<double> x(2 + rng() % 40), y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = std::normal_distribution<double>(0, 1)(rng);
            y[i] = x[i] * c + std::normal_distribution<double>(0, 1)(rng);
        }
        if (const auto r = pearson(x, y)) expect(*r >= -1.0 && *r <= 1.0, "Pearson bounds");
        const double d = ks_statistic(x, y);
        expect(d >= 0.0 && d <= 1.0, "KS bounds");
        expect(ks_statistic(x, x) == 0.0, "KS identity");
        const auto h = make_histogram(y, 1 + int(rng() % 50));
        std::int64_t total = 0;
        for (auto k : h.counts) total += k;
        expect(total == std::int64_t(y.size()), "histogram conservation");
    }
    std::string detail = "100 randomized rounds over link stats, node strength, fluctuation, neuron activation, "
                         "Pearson, KS, histograms";
    for (const auto& b : broken) detail += "; violated: " + b;
    return check(broken.empty(), detail);
}

// 8 -------------------------------------------------------------------------
Result criterion_orderings(const Context& ctx) {
    if (!mnist_present(ctx)) return skip("MNIST files not found under " + resolve_data_root(ctx.data_root).string());
    const auto l1 = cached_experiment(ctx, "level1_mnist.json");
    const auto l3 = cached_experiment(ctx, "level3_depth_mnist.json");
    const fs::path root = l1.path.parent_path();

    // (a) recurrent heatmap concentrates on central rows; training moves strengths
    const std::string heat = read_text(root / "rnn_sigmoid" / "heatmap_trained.csv");
    std::vector<double> rows;
    std::istringstream lines(heat);
    for (std::string line; std::getline(lines, line);) rows.push_back(std::stod(line.substr(0, line.find(','))));
    const std::size_t H = rows.size(), lo = H / 4, hi = H - H / 4;
    double central = 0.0, outer = 0.0;
    for (std::size_t r = 0; r < H; ++r) (r >= lo && r < hi ? central : outer) += rows[r];
    central /= double(hi - lo);
    outer /= double(H - (hi - lo));
    double ks_rnn = 0.0;
    for (const auto& e : read_json(root / "rnn_sigmoid" / "trained_vs_untrained.json"))
        if (e.at("metric") == "neuron_strength" && e.at("layer") == 0) ks_rnn = e.at("ks");
    const bool a = central > outer && ks_rnn > 0.05;

    // (b) sigmoid FC activations pile up at the extremes; RNN keeps more mass mid-band
    const auto fc_act = pool_values(l1, "fc_sigmoid_L3", "neuron_activation", 1);
    const auto rnn_act = pool_values(l1, "rnn_sigmoid", "neuron_activation", 0);
    const double fc_extreme = fraction_within(fc_act, 0.0, 0.1) + fraction_within(fc_act, 0.9, 1.0);
    const double fc_mid = fraction_within(fc_act, 0.45, 0.55), rnn_mid = fraction_within(rnn_act, 0.45, 0.55);
    const bool b = fc_extreme > fc_mid && rnn_mid > fc_mid;

    // (c) shallow and deep AEs diverge more than shallow and deep FCs
    const auto ks_of = [&](const std::string& p, const std::string& q) {
        return ks_statistic(pool_values(l3, p, "neuron_activation", 0), pool_values(l3, q, "neuron_activation", 0));
    };
    const double ks_ae = ks_of("ae_sigmoid_L3", "ae_sigmoid_L7"), ks_fc = ks_of("fc_sigmoid_L3", "fc_sigmoid_L7");
    const bool c = ks_ae > ks_fc;

    return check(a && b && c,
                 std::string("(a) ") + (a ? "ok" : "FAILED") + ": heatmap central rows " + num(central) + " vs outer " +
                     num(outer) + ", trained-vs-untrained KS " + num(ks_rnn) + "; (b) " + (b ? "ok" : "FAILED") +
                     ": FC extremes " + num(fc_extreme) + " vs mid-band " + num(fc_mid) + ", RNN mid-band " +
                     num(rnn_mid) + "; (c) " + (c ? "ok" : "FAILED") + ": KS AE 3 vs 7 " + num(ks_ae) +
                     " vs FC 3 vs 7 " + num(ks_fc));
}

// 9 -------------------------------------------------------------------------
Result criterion_determinism(const Context& ctx) {
    const auto start = std::chrono::steady_clock::now();
    std::map<std::string, std::string> first;
    std::size_t files = 0;
    bool same = true;
    for (int run = 0; run < 2; ++run) {
        ExperimentConfig c = load_config(ctx.configs / "smoke_synthetic.json");
        c.output_dir = (ctx.cache / ("determinism_" + std::to_string(run))).string();
        fs::remove_all(c.output_dir);
        const auto m = run_experiment(c);
        std::map<std::string, std::string> d;
        for (const auto& f : m.document.at("files")) d[f.at("path")] = f.at("sha256");
        if (run == 0) {
            first = d;
            files = d.size();
        } else {
            same = d == first;
        }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return check(same && files > 0 && seconds < 60.0, "smoke config run twice: " + std::to_string(files) +
                                                          " files, digests " + (same ? "identical" : "DIFFER") + ", " +
                                                          num(seconds, 3) + " s");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cntnn acceptance criteria"};
    Context ctx;
    std::string criteria = "1,2,3,4,5,6,7,8,9";
    app.add_option("--configs", ctx.configs, "directory with the shipped experiment configs")->required();
    app.add_option("--cache", ctx.cache, "directory for trained pools and run artifacts")->required();
    app.add_option("--data-root", ctx.data_root, "dataset root (default: $CNTNN_DATA_ROOT, then ./data)");
    app.add_option("--criteria", criteria, "comma-separated criterion numbers");
    CLI11_PARSE(app, argc, argv);

    using Fn = Result (*)(const Context&);
    const std::map<int, std::pair<std::string, Fn>> all = {
        {1, {"MNIST FC accuracy", criterion_fc_accuracy}},
        {2, {"MNIST CNN/RNN accuracy and AE reconstruction", criterion_other_architectures}},
        {3, {"CIFAR-10 accuracy ranges", criterion_cifar10}},
        {4, {"conv patch isolation equals Toeplitz oracle", criterion_conv_oracle}},
        {5, {"RNN temporal unfolding equals loop forward", criterion_rnn_oracle}},
        {6, {"gradient checks", criterion_grad_check}},
        {7, {"metric invariants", criterion_invariants}},
        {8, {"qualitative orderings", criterion_orderings}},
        {9, {"end-to-end determinism", criterion_determinism}},
    };

    fs::create_directories(ctx.cache);
    int passed = 0, failed = 0, skipped = 0;
    std::stringstream list(criteria);
    for (std::string item; std::getline(list, item, ',');) {
        const int id = std::stoi(item);
        const auto it = all.find(id);
        if (it == all.end()) {
            std::cerr << "unknown criterion " << id << "\n";
            return 2;
        }
        const auto start = std::chrono::steady_clock::now();
        Result r;
        try {
            r = it->second.second(ctx);
        } catch (const std::exception& e) {
            r = fail(std::string("error: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* tag = r.outcome == Outcome::Pass ? "PASS" : r.outcome == Outcome::Fail ? "FAIL" : "SKIP";
        std::cout << tag << " criterion " << id << " (" << it->second.first << "): " << r.detail << " [" << num(seconds, 3)
                  << " s]" << std::endl;
        (r.outcome == Outcome::Pass ? passed : r.outcome == Outcome::Fail ? failed : skipped)++;
    }
    if (failed > 0) return 1;
    return passed == 0 && skipped > 0 ? 77 : 0;
}
