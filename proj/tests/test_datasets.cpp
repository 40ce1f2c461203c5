#include "helpers.hpp"

#include <fstream>

using namespace cntnn;
using namespace cntnn::testing;
namespace fs = std::filesystem;

namespace {

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back((unsigned char)((v >> s) & 0xFF));
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

std::vector<unsigned char> idx_images(std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                                      std::uint32_t magic = 0x803) {
    std::vector<unsigned char> b;
    put_be32(b, magic);
    put_be32(b, n);
    put_be32(b, rows);
    put_be32(b, cols);
    for (std::uint32_t i = 0; i < n * rows * cols; ++i) b.push_back((unsigned char)(i % 256));
    return b;
}

std::vector<unsigned char> idx_labels(std::uint32_t n, std::uint32_t magic = 0x801) {
    std::vector<unsigned char> b;
    put_be32(b, magic);
    put_be32(b, n);
    for (std::uint32_t i = 0; i < n; ++i) b.push_back((unsigned char)(i % 10));
    return b;
}

std::string load_error(const fs::path& img, const fs::path& lab) {
    try {
        load_mnist(img, lab, Split::Train);
    } catch (const DataFileError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(Mnist, ParsesWellFormedFiles) {
    const auto dir = temp_dir("mnist_ok");
    write_bytes(dir / "img", idx_images(3, 2, 2));
    write_bytes(dir / "lab", idx_labels(3));
    const auto ds = load_mnist(dir / "img", dir / "lab", Split::Test);
    EXPECT_EQ(ds.count(), 3);
    EXPECT_EQ(ds.feature_dim(), 4);
    EXPECT_EQ(ds.geometry, (Geometry{1, 2, 2}));
    EXPECT_DOUBLE_EQ(ds.inputs(1, 1), 5.0 / 255.0);
    EXPECT_EQ(ds.labels, (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(ds.split, Split::Test);
}

TEST(Mnist, BadMagicNamesExpectedAndFound) {
    const auto dir = temp_dir("mnist_magic");
    write_bytes(dir / "img", idx_images(3, 2, 2, 0x801));
    write_bytes(dir / "lab", idx_labels(3));
    const auto msg = load_error(dir / "img", dir / "lab");
    EXPECT_NE(msg.find("0x00000803"), std::string::npos) << msg;
    EXPECT_NE(msg.find("0x00000801"), std::string::npos) << msg;
}

TEST(Mnist, TruncationReportsByteOffset) {
    const auto dir = temp_dir("mnist_trunc");
    auto img = idx_images(3, 2, 2);
    img.resize(img.size() - 5);
    write_bytes(dir / "img", img);
    write_bytes(dir / "lab", idx_labels(3));
    const auto msg = load_error(dir / "img", dir / "lab");
    EXPECT_NE(msg.find("byte offset 23"), std::string::npos) << msg;

    write_bytes(dir / "img", std::vector<unsigned char>{0, 0, 8});
    EXPECT_NE(load_error(dir / "img", dir / "lab").find("truncated header"), std::string::npos);
}

TEST(Mnist, CountMismatch) {
    const auto dir = temp_dir("mnist_count");
    write_bytes(dir / "img", idx_images(3, 2, 2));
    write_bytes(dir / "lab", idx_labels(4));
    EXPECT_NE(load_error(dir / "img", dir / "lab").find("does not match label count"), std::string::npos);
}

TEST(Mnist, MissingDirectoryIsActionable) {
    try {
        load_mnist_dir("/definitely/not/here", Split::Train);
        FAIL();
    } catch (const DataFileError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("train-images-idx3-ubyte"), std::string::npos);
        EXPECT_NE(msg.find("CNTNN_DATA_ROOT"), std::string::npos);
    }
    EXPECT_FALSE(mnist_available("/definitely/not/here"));
}

TEST(Cifar10, ParsesAndValidatesRecordLength) {
    const auto dir = temp_dir("cifar");
    std::vector<unsigned char> b;
    for (int r = 0; r < 2; ++r) {
        b.push_back((unsigned char)(r + 3));
        for (int j = 0; j < 3072; ++j) b.push_back((unsigned char)(j % 256));
    }
    write_bytes(dir / "batch.bin", b);
    const auto ds = load_cifar10({dir / "batch.bin"}, Split::Train);
    EXPECT_EQ(ds.count(), 2);
    EXPECT_EQ(ds.labels, (std::vector<int>{3, 4}));
    EXPECT_EQ(ds.geometry, (Geometry{3, 32, 32}));
    EXPECT_DOUBLE_EQ(ds.inputs(1, 1024 + 1), 1.0 / 255.0);

    b.pop_back();
    write_bytes(dir / "short.bin", b);
    EXPECT_THROW(load_cifar10({dir / "short.bin"}, Split::Train), DataFileError);
    EXPECT_THROW(load_cifar10_dir(dir, Split::Test), DataFileError);
}

TEST(Synthetic, DeterministicAndBounded) {
    const auto a = synthetic_dataset(5, 50, 8, 3), b = synthetic_dataset(5, 50, 8, 3), c = synthetic_dataset(6, 50, 8, 3);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
    EXPECT_GE(a.inputs.minCoeff(), 0.0);
    EXPECT_LE(a.inputs.maxCoeff(), 1.0);
    EXPECT_EQ(a.labels[4], 1);
    EXPECT_THROW(synthetic_dataset(1, 0, 8, 3), std::invalid_argument);
}

TEST(SampleInputs, DistinctDeterministicRows) {
    const auto ds = synthetic_dataset(1, 40, 4, 2);
    const auto a = sample_inputs(ds, 15, 9), b = sample_inputs(ds, 15, 9), c = sample_inputs(ds, 15, 10);
    EXPECT_EQ(a.indices, b.indices);
    EXPECT_NE(a.indices, c.indices);
    std::set<Index> unique(a.indices.begin(), a.indices.end());
    EXPECT_EQ(unique.size(), 15u);
    for (Index i = 0; i < 15; ++i) EXPECT_EQ(a.inputs.row(i), ds.inputs.row(a.indices[i]));
    EXPECT_THROW(sample_inputs(ds, 41, 1), std::invalid_argument);
}

TEST(RowSequence, InterleavesChannelsPerRow) {
    Dataset ds;
    ds.geometry = {2, 2, 3};
    ds.inputs.resize(1, 12);
    for (int i = 0; i < 12; ++i) ds.inputs(0, i) = i;
    const auto seq = as_row_sequence(ds);
    // row 0: channel 0 row 0 | channel 1 row 0
    const std::vector<double> expect{0, 1, 2, 6, 7, 8, 3, 4, 5, 9, 10, 11};
    for (int i = 0; i < 12; ++i) EXPECT_EQ(seq.inputs(0, i), expect[i]);
}

TEST(DatasetFile, RoundTripAndCorruption) {
    const auto dir = temp_dir("cntd");
    const auto ds = synthetic_dataset(3, 20, 6, 3, {1, 2, 3});
    save_dataset(ds, dir / "d.bin");
    EXPECT_TRUE(load_dataset(dir / "d.bin") == ds);
    auto bytes = detail::read_file(dir / "d.bin");
    bytes.resize(bytes.size() / 2);
    write_bytes(dir / "half.bin", bytes);
    EXPECT_THROW(load_dataset(dir / "half.bin"), DataFileError);
    write_bytes(dir / "junk.bin", std::vector<unsigned char>{'X', 'Y', 'Z', 'W', 0, 0});
    EXPECT_THROW(load_dataset(dir / "junk.bin"), DataFileError);
}
