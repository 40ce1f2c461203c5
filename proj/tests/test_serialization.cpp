#include "helpers.hpp"

using namespace cntnn;
using namespace cntnn::testing;

namespace {

std::string schema_error(const json& j) {
    try {
        network_from_json(j);
    } catch (const SchemaError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(Serialization, RoundTripIsBitExactForEveryKind) {
    const auto dir = temp_dir("serial");
    for (const auto& spec : {small_fc(Activation::ReLU), small_cnn(Activation::Sigmoid), small_rnn(Activation::Linear),
                             small_ae(Activation::Sigmoid)}) {
        Network net = random_network(spec, 77);
        // awkward values: subnormal, huge, negative zero, many significant digits
        net.params[0].weights(0, 0) = 4.9e-324;
        net.params[0].weights(0, 1) = -1.7976931348623157e308;
        net.params[0].bias(0) = -0.0;
        net.params[0].weights(1, 0) = 0.1 + 0.2;
        const auto path = dir / (to_string(spec.kind) + ".json");
        export_network(net, path);
        const Network back = import_network(path);
        EXPECT_TRUE(back == net) << to_string(spec.kind);
        for (std::size_t l = 0; l < net.params.size(); ++l)
            EXPECT_EQ(std::memcmp(back.params[l].weights.data(), net.params[l].weights.data(),
                                  sizeof(double) * std::size_t(net.params[l].weights.size())),
                      0);
        EXPECT_TRUE(std::signbit(back.params[0].bias(0)));
    }
}

TEST(Serialization, ShapeMismatchNamesLayer) {
    json j = to_json(random_network(small_fc(Activation::ReLU), 1));
    j["layers"][1]["shape"] = {4, 4};
    const auto msg = schema_error(j);
    EXPECT_NE(msg.find("layers[1].shape"), std::string::npos) << msg;
    EXPECT_NE(msg.find("layer 1"), std::string::npos) << msg;
}

TEST(Serialization, FieldLevelDiagnostics) {
    const json good = to_json(random_network(small_rnn(Activation::ReLU), 1));
    json j = good;
    j["layers"][0].erase("recurrent");
    EXPECT_NE(schema_error(j).find("network.layers[0].recurrent: missing field"), std::string::npos);
    j = good;
    j["seed"] = "seven";
    EXPECT_NE(schema_error(j).find("network.seed: wrong type"), std::string::npos);
    j = good;
    j["layers"][1]["bias"] = {1.0};
    EXPECT_NE(schema_error(j).find("layers[1].bias: expected 3 values"), std::string::npos);
    j = good;
    j["spec"]["layers"][1]["fan_in"] = 5;
    EXPECT_NE(schema_error(j).find("layers 0 -> 1"), std::string::npos) << schema_error(j);
    j = good;
    j["spec"]["activation"] = "tanh";
    EXPECT_NE(schema_error(j).find("tanh"), std::string::npos);
    j = good;
    j["layers"].erase(1);
    EXPECT_NE(schema_error(j).find("expected 2 layer entries"), std::string::npos);
}

TEST(Serialization, MalformedFileIsSchemaError) {
    const auto dir = temp_dir("serial_bad");
    write_text(dir / "bad.json", "{ not json");
    EXPECT_THROW(import_network(dir / "bad.json"), SchemaError);
    EXPECT_THROW(import_network(dir / "missing.json"), std::runtime_error);
}

TEST(Serialization, TrainedNetworkKeepsAccuracy) {
    const auto dir = temp_dir("serial_acc");
    const auto ds = synthetic_dataset(1, 200, 6, 3);
    Network net = build_network(small_fc(Activation::ReLU), 0.3, 2);
    TrainConfig c;
    c.epochs = 5;
    c.learning_rate = 0.1;
    train(net, ds, c);
    export_network(net, dir / "net.json");
    const Network back = import_network(dir / "net.json");
    EXPECT_EQ(evaluate(back, ds), evaluate(net, ds));
    EXPECT_TRUE(back.trained);
}
