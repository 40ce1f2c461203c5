// cntnn command-line front end. Every subcommand accepts --config,
// --data-root, --out, --seed and --pool-size. On failure a single JSON line
// {"error": <kind>, "message": <text>} goes to stderr and the exit code is
// nonzero: 2 usage/config/bad argument, 3 data files, 4 schema, 1 anything else.

#include "cntnn/cntnn.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace cntnn;

struct CommonOptions {
    std::string config;
    std::string data_root;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> pool_size;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required) {
    auto* c = cmd->add_option("--config", o.config, "experiment config (JSON)");
    if (config_required) c->required();
    cmd->add_option("--data-root", o.data_root, "directory holding mnist/ and cifar-10-batches-bin/");
    cmd->add_option("--out", o.out, "output directory (overrides the config's output_dir)");
    cmd->add_option("--seed", o.seed, "global seed (overrides the config)");
    cmd->add_option("--pool-size", o.pool_size, "networks per pool (overrides the config)");
}

ExperimentConfig resolve(const CommonOptions& o) {
    ConfigOverrides ov;
    if (!o.data_root.empty()) ov.data_root = o.data_root;
    if (!o.out.empty()) ov.output_dir = o.out;
    ov.seed = o.seed;
    ov.pool_size = o.pool_size;
    return apply(load_config(o.config), ov);
}

void print_manifest_summary(const ExperimentManifest& m) {
    json s{{"manifest", m.path.string()},
           {"files", m.document.at("files").size()},
           {"pools", json::array()}};
    for (const auto& p : m.document.at("pools"))
        s["pools"].push_back({{"pool", p.at("pool")}, {"final_metric", p.at("final_metric")}, {"failed_seeds", p.at("failed_seeds")}});
    std::cout << s.dump() << '\n';
}

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Complex Network Theory metrics for pools of small neural networks"};
    app.require_subcommand(1);
    app.fallthrough();
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress progress output on stderr");

    CommonOptions train_o, metrics_o, run_o, compare_o, export_o, import_o;

    auto* train_cmd = app.add_subcommand("train-pool", "train every pool of a config and save the networks");
    add_common(train_cmd, train_o, true);

    auto* metrics_cmd = app.add_subcommand("metrics", "compute metric artifacts for pools trained by train-pool");
    add_common(metrics_cmd, metrics_o, true);

    auto* run_cmd = app.add_subcommand("run", "train-pool followed by metrics");
    add_common(run_cmd, run_o, true);

    auto* compare_cmd = app.add_subcommand("compare", "KS statistic and moment deltas between two manifests");
    add_common(compare_cmd, compare_o, false);
    std::string manifest_a, manifest_b, metric, pool_a, pool_b;
    int layer = 0;
    compare_cmd->add_option("--a", manifest_a, "first manifest.json")->required();
    compare_cmd->add_option("--b", manifest_b, "second manifest.json")->required();
    compare_cmd->add_option("--metric", metric, "metric name")->required();
    compare_cmd->add_option("--layer", layer, "layer index")->required();
    compare_cmd->add_option("--pool-a", pool_a, "pool inside the first manifest");
    compare_cmd->add_option("--pool-b", pool_b, "pool inside the second manifest");

    auto* export_cmd = app.add_subcommand("export", "write one pool member as a network JSON file");
    add_common(export_cmd, export_o, false);
    std::string export_pool, export_file;
    std::size_t export_member = 0;
    bool export_untrained = false;
    export_cmd->add_option("--pool", export_pool, "pool name, e.g. fc_sigmoid_L3")->required();
    export_cmd->add_option("--member", export_member, "member index");
    export_cmd->add_flag("--untrained", export_untrained, "export the snapshot taken at initialization");
    export_cmd->add_option("--file", export_file, "destination (default: <out>/<pool>_member_<i>.json)");

    auto* import_cmd = app.add_subcommand("import", "validate a network JSON file and optionally evaluate it");
    add_common(import_cmd, import_o, false);
    std::string import_file, import_to;
    import_cmd->add_option("--file", import_file, "network JSON file")->required();
    import_cmd->add_option("--to", import_to, "re-export the validated network here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    const Logger log = [&](const std::string& s) {
        if (!quiet) std::cerr << s << '\n';
    };

    try {
        if (*train_cmd) {
            print_manifest_summary(run_experiment(resolve(train_o), Stage::Train, log));
        } else if (*metrics_cmd) {
            print_manifest_summary(run_experiment(resolve(metrics_o), Stage::Metrics, log));
        } else if (*run_cmd) {
            print_manifest_summary(run_experiment(resolve(run_o), Stage::All, log));
        } else if (*compare_cmd) {
            const auto c = compare_experiments(manifest_a, manifest_b, metric, layer, pool_a, pool_b);
            const std::string text = to_json(c).dump(2) + "\n";
            if (!compare_o.out.empty()) write_text(fs::path(compare_o.out) / "comparison.json", text);
            std::cout << text;
        } else if (*export_cmd) {
            fs::path root = export_o.out;
            if (root.empty() && !export_o.config.empty()) root = load_config(export_o.config).output_dir;
            if (root.empty()) return fail("usage", "export needs --out or --config to locate the trained pool", 2);
            const PoolResult pool = read_pool(root, export_pool);
            if (export_member >= pool.members.size())
                return fail("usage", "pool '" + export_pool + "' has " + std::to_string(pool.members.size()) + " members",
                            2);
            const auto& m = pool.members[export_member];
            if (!export_untrained && m.failed)
                return fail("diverged", "member " + std::to_string(export_member) + " diverged: " + m.failure, 1);
            const fs::path dest = export_file.empty()
                                      ? root / (export_pool + "_member_" + std::to_string(export_member) +
                                                (export_untrained ? "_untrained" : "") + ".json")
                                      : fs::path(export_file);
            export_network(export_untrained ? m.untrained : m.trained, dest);
            std::cout << json{{"file", dest.string()}, {"sha256", sha256_file(dest)}}.dump() << '\n';
        } else if (*import_cmd) {
            const Network net = import_network(import_file);
            json s{{"file", import_file},
                   {"kind", to_string(net.spec.kind)},
                   {"activation", to_string(net.spec.activation)},
                   {"depth", net.depth()},
                   {"parameters", net.parameter_count()},
                   {"seed", net.seed},
                   {"trained", net.trained}};
            if (!import_o.config.empty() || !import_o.data_root.empty()) {
                ExperimentConfig c = import_o.config.empty() ? ExperimentConfig{} : load_config(import_o.config);
                if (!import_o.data_root.empty()) c.data_root = import_o.data_root;
                const auto data = load_datasets(c);
                const Dataset test = net.spec.kind == ArchKind::RNN ? as_row_sequence(data.test) : data.test;
                s["test_metric"] = evaluate(net, test);
            }
            if (!import_to.empty()) {
                export_network(net, import_to);
                s["exported"] = import_to;
            }
            std::cout << s.dump() << '\n';
        }
    } catch (const ConfigError& e) {
        return fail("config", e.what(), 2);
    } catch (const DataFileError& e) {
        return fail("data", e.what(), 3);
    } catch (const SchemaError& e) {
        return fail("schema", e.what(), 4);
    } catch (const std::invalid_argument& e) {
        return fail("invalid_argument", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), 1);
    }
    return 0;
}
