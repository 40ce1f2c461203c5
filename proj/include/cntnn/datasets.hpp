#pragma once

#include "cntnn/architecture.hpp"
#include "cntnn/tensor.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cntnn {

enum class Split { Train, Test };

inline std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

/// Inputs are flattened channel-major images scaled to [0,1].
struct Dataset {
    std::string name;
    Split split = Split::Train;
    Matrix inputs;            // [count x feature-dim]
    std::vector<int> labels;  // empty for unlabeled data
    int class_count = 0;
    Geometry geometry{};

    Index count() const { return inputs.rows(); }
    Index feature_dim() const { return inputs.cols(); }
    bool has_labels() const { return !labels.empty(); }

    bool operator==(const Dataset& o) const {
        return name == o.name && split == o.split && inputs.rows() == o.inputs.rows() &&
               inputs.cols() == o.inputs.cols() && inputs == o.inputs && labels == o.labels &&
               class_count == o.class_count && geometry == o.geometry;
    }
};

struct SampleBatch {
    Matrix inputs;
    std::vector<Index> indices;
    std::uint64_t seed = 0;
    Geometry geometry{};
};

class DataFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataFileError("cannot open '" + path.string() + "'");
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::string& file) {
    if (offset + 4 > buf.size())
        throw DataFileError(file + ": truncated header at byte offset " + std::to_string(offset));
    return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
           (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

inline std::string hex32(std::uint32_t v) {
    char s[11];
    std::snprintf(s, sizeof s, "0x%08X", v);
    return s;
}

} // namespace detail

/// MNIST IDX files: images magic 0x00000803, labels magic 0x00000801, big-endian headers.
inline Dataset load_mnist(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                          Split split) {
    constexpr std::uint32_t kImageMagic = 0x00000803, kLabelMagic = 0x00000801;
    const auto img = detail::read_file(images_path);
    const auto lab = detail::read_file(labels_path);
    const std::string iname = images_path.string(), lname = labels_path.string();

    const auto im = detail::read_be32(img, 0, iname);
    if (im != kImageMagic)
        throw DataFileError(iname + ": bad magic, expected " + detail::hex32(kImageMagic) + ", found " +
                            detail::hex32(im));
    const auto lm = detail::read_be32(lab, 0, lname);
    if (lm != kLabelMagic)
        throw DataFileError(lname + ": bad magic, expected " + detail::hex32(kLabelMagic) + ", found " +
                            detail::hex32(lm));
    const std::uint32_t count = detail::read_be32(img, 4, iname);
    const std::uint32_t rows = detail::read_be32(img, 8, iname);
    const std::uint32_t cols = detail::read_be32(img, 12, iname);
    const std::uint32_t lcount = detail::read_be32(lab, 4, lname);
    if (count != lcount)
        throw DataFileError("image count " + std::to_string(count) + " in " + iname + " does not match label count " +
                            std::to_string(lcount) + " in " + lname);
    const std::size_t dim = std::size_t(rows) * cols;
    const std::size_t need_img = 16 + std::size_t(count) * dim, need_lab = 8 + std::size_t(count);
    if (img.size() < need_img)
        throw DataFileError(iname + ": truncated at byte offset " + std::to_string(img.size()) + ", expected " +
                            std::to_string(need_img) + " bytes");
    if (lab.size() < need_lab)
        throw DataFileError(lname + ": truncated at byte offset " + std::to_string(lab.size()) + ", expected " +
                            std::to_string(need_lab) + " bytes");

    Dataset ds;
    ds.name = "mnist";
    ds.split = split;
    ds.class_count = 10;
    ds.geometry = {1, int(rows), int(cols)};
    ds.inputs.resize(count, Index(dim));
    const unsigned char* px = img.data() + 16;
    for (Index i = 0; i < ds.inputs.size(); ++i) ds.inputs.data()[i] = px[i] / 255.0;
    ds.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        ds.labels[i] = lab[8 + i];
        if (ds.labels[i] >= 10)
            throw DataFileError(lname + ": label " + std::to_string(ds.labels[i]) + " out of range at byte offset " +
                                std::to_string(8 + i));
    }
    return ds;
}

/// CIFAR-10 binary batches: 3073-byte records, label byte then 3x32x32 channel-major pixels.
inline Dataset load_cifar10(const std::vector<std::filesystem::path>& batch_paths, Split split) {
    constexpr std::size_t kRecord = 3073, kPixels = 3072;
    std::vector<std::vector<unsigned char>> blobs;
    std::size_t total = 0;
    for (const auto& p : batch_paths) {
        blobs.push_back(detail::read_file(p));
        if (blobs.back().size() % kRecord != 0)
            throw DataFileError(p.string() + ": length " + std::to_string(blobs.back().size()) +
                                " is not a multiple of " + std::to_string(kRecord));
        total += blobs.back().size() / kRecord;
    }
    Dataset ds;
    ds.name = "cifar10";
    ds.split = split;
    ds.class_count = 10;
    ds.geometry = {3, 32, 32};
    ds.inputs.resize(Index(total), Index(kPixels));
    ds.labels.resize(total);
    Index row = 0;
    for (std::size_t f = 0; f < blobs.size(); ++f) {
        const auto& b = blobs[f];
        for (std::size_t off = 0; off < b.size(); off += kRecord, ++row) {
            if (b[off] >= 10)
                throw DataFileError(batch_paths[f].string() + ": label " + std::to_string(b[off]) +
                                    " out of range at byte offset " + std::to_string(off));
            ds.labels[row] = b[off];
            for (std::size_t j = 0; j < kPixels; ++j) ds.inputs(row, Index(j)) = b[off + 1 + j] / 255.0;
        }
    }
    return ds;
}

/// Resolves the data root: explicit argument, then $CNTNN_DATA_ROOT, then "data".
inline std::filesystem::path resolve_data_root(const std::string& explicit_root = {}) {
    if (!explicit_root.empty()) return explicit_root;
    if (const char* env = std::getenv("CNTNN_DATA_ROOT"); env && *env) return env;
    return "data";
}

inline bool mnist_available(const std::filesystem::path& root) {
    for (const auto& dir : {root / "mnist", root})
        if (std::filesystem::exists(dir / "train-images-idx3-ubyte") &&
            std::filesystem::exists(dir / "t10k-images-idx3-ubyte"))
            return true;
    return false;
}

/// Looks in <root>/mnist then <root>. Never downloads.
inline Dataset load_mnist_dir(const std::filesystem::path& root, Split split) {
    const std::string prefix = split == Split::Train ? "train" : "t10k";
    const std::string images = prefix + "-images-idx3-ubyte", labels = prefix + "-labels-idx1-ubyte";
    for (const auto& dir : {root / "mnist", root})
        if (std::filesystem::exists(dir / images) && std::filesystem::exists(dir / labels))
            return load_mnist(dir / images, dir / labels, split);
    throw DataFileError("MNIST " + to_string(split) + " files not found: place '" + images + "' and '" + labels +
                        "' (uncompressed) in '" + (root / "mnist").string() + "' or '" + root.string() +
                        "', or point --data-root / CNTNN_DATA_ROOT at them");
}

inline bool cifar10_available(const std::filesystem::path& root) {
    for (const auto& dir : {root / "cifar-10-batches-bin", root / "cifar10", root})
        if (std::filesystem::exists(dir / "data_batch_1.bin") && std::filesystem::exists(dir / "test_batch.bin"))
            return true;
    return false;
}

inline Dataset load_cifar10_dir(const std::filesystem::path& root, Split split) {
    std::vector<std::string> names;
    if (split == Split::Train)
        for (int i = 1; i <= 5; ++i) names.push_back("data_batch_" + std::to_string(i) + ".bin");
    else
        names.push_back("test_batch.bin");
    for (const auto& dir : {root / "cifar-10-batches-bin", root / "cifar10", root}) {
        std::vector<std::filesystem::path> paths;
        for (const auto& n : names)
            if (std::filesystem::exists(dir / n)) paths.push_back(dir / n);
        if (paths.size() == names.size()) return load_cifar10(paths, split);
    }
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw DataFileError("CIFAR-10 " + to_string(split) + " files not found: expected " + list + " in '" +
                        (root / "cifar-10-batches-bin").string() + "' or '" + root.string() +
                        "', or point --data-root / CNTNN_DATA_ROOT at them");
}

/// Gaussian class blobs: class c is centred at 0.15 + e_(c mod dim)/sqrt(2),
/// so distinct means (for class_count <= feature_dim) sit at unit distance.
/// Noise std 0.1, values clamped to [0,1]. Labels cycle through the classes.
inline Dataset synthetic_dataset(std::uint64_t seed, int count, int feature_dim, int class_count,
                                 Geometry geometry = {}) {
    if (count <= 0 || feature_dim <= 0 || class_count <= 0)
        throw std::invalid_argument("synthetic_dataset: all sizes must be positive");
    Dataset ds;
    ds.name = "synthetic";
    ds.class_count = class_count;
    ds.geometry = geometry.size() == feature_dim ? geometry : Geometry{1, 1, feature_dim};
    ds.inputs.resize(count, feature_dim);
    ds.labels.resize(count);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    const double offset = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < count; ++i) {
        const int c = i % class_count;
        ds.labels[i] = c;
        for (int j = 0; j < feature_dim; ++j) {
            const double mean = 0.15 + (j == c % feature_dim ? offset : 0.0);
            ds.inputs(i, j) = std::clamp(mean + noise(rng), 0.0, 1.0);
        }
    }
    return ds;
}

/// n distinct rows chosen uniformly without replacement.
inline SampleBatch sample_inputs(const Dataset& ds, Index n, std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("sample_inputs: n must be positive");
    if (n > ds.count())
        throw std::invalid_argument("sample_inputs: requested " + std::to_string(n) + " samples from a dataset of " +
                                    std::to_string(ds.count()));
    std::vector<Index> idx(ds.count());
    std::iota(idx.begin(), idx.end(), Index{0});
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates
    for (Index i = 0; i < n; ++i) {
        std::uniform_int_distribution<Index> pick(i, ds.count() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
    SampleBatch batch;
    batch.indices = idx;
    batch.seed = seed;
    batch.geometry = ds.geometry;
    batch.inputs.resize(n, ds.feature_dim());
    for (Index i = 0; i < n; ++i) batch.inputs.row(i) = ds.inputs.row(idx[i]);
    return batch;
}

inline SampleBatch as_sample_batch(const Matrix& inputs, Geometry geometry = {}) {
    SampleBatch b;
    b.inputs = inputs;
    b.indices.resize(inputs.rows());
    std::iota(b.indices.begin(), b.indices.end(), Index{0});
    b.geometry = geometry;
    return b;
}

/// Reorders channel-major images so each image row is one contiguous time
/// step holding its channels side by side: step t = [c0 row t | c1 row t | ...].
/// Identity for single-channel data.
inline Dataset as_row_sequence(const Dataset& ds) {
    const auto g = ds.geometry;
    if (g.size() != ds.feature_dim())
        throw std::invalid_argument("as_row_sequence: geometry does not match feature dimension");
    if (g.channels == 1) return ds;
    Dataset out = ds;
    for (Index i = 0; i < ds.count(); ++i)
        for (int c = 0; c < g.channels; ++c)
            for (int y = 0; y < g.height; ++y)
                for (int x = 0; x < g.width; ++x)
                    out.inputs(i, y * g.channels * g.width + c * g.width + x) =
                        ds.inputs(i, c * g.height * g.width + y * g.width + x);
    return out;
}

/// First `n` rows (or all, if n <= 0 or n >= count).
inline Dataset head(const Dataset& ds, Index n) {
    if (n <= 0 || n >= ds.count()) return ds;
    Dataset out = ds;
    out.inputs = ds.inputs.topRows(n);
    if (ds.has_labels()) out.labels.assign(ds.labels.begin(), ds.labels.begin() + n);
    return out;
}

// Binary dataset file: "CNTD", u32 version, then little-endian fields; doubles raw.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataFileError("cannot write '" + path.string() + "'");
    auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
    out.write("CNTD", 4);
    put_u64(1);
    put_u64(ds.name.size());
    out.write(ds.name.data(), std::streamsize(ds.name.size()));
    put_u64(ds.split == Split::Train ? 0 : 1);
    put_u64(std::uint64_t(ds.count()));
    put_u64(std::uint64_t(ds.feature_dim()));
    put_u64(std::uint64_t(ds.class_count));
    put_u64(std::uint64_t(ds.geometry.channels));
    put_u64(std::uint64_t(ds.geometry.height));
    put_u64(std::uint64_t(ds.geometry.width));
    put_u64(ds.labels.size());
    for (int l : ds.labels) put_u64(std::uint64_t(l));
    out.write(reinterpret_cast<const char*>(ds.inputs.data()), std::streamsize(ds.inputs.size() * sizeof(double)));
    if (!out) throw DataFileError("failed writing '" + path.string() + "'");
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    const auto buf = detail::read_file(path);
    std::size_t off = 0;
    auto need = [&](std::size_t n) {
        if (off + n > buf.size())
            throw DataFileError(path.string() + ": truncated at byte offset " + std::to_string(off));
    };
    auto get_u64 = [&] {
        need(8);
        std::uint64_t v;
        std::memcpy(&v, buf.data() + off, 8);
        off += 8;
        return v;
    };
    need(4);
    if (std::string(buf.begin(), buf.begin() + 4) != "CNTD") throw DataFileError(path.string() + ": not a dataset file");
    off = 4;
    if (get_u64() != 1) throw DataFileError(path.string() + ": unsupported version");
    Dataset ds;
    const auto name_len = get_u64();
    need(name_len);
    ds.name.assign(reinterpret_cast<const char*>(buf.data() + off), name_len);
    off += name_len;
    ds.split = get_u64() == 0 ? Split::Train : Split::Test;
    const auto count = get_u64(), dim = get_u64();
    ds.class_count = int(get_u64());
    ds.geometry.channels = int(get_u64());
    ds.geometry.height = int(get_u64());
    ds.geometry.width = int(get_u64());
    const auto label_count = get_u64();
    if (label_count > buf.size() / 8) throw DataFileError(path.string() + ": label count exceeds file size");
    ds.labels.resize(label_count);
    for (auto& l : ds.labels) l = int(get_u64());
    if (dim != 0 && count > buf.size() / 8 / dim) throw DataFileError(path.string() + ": input block exceeds file size");
    ds.inputs.resize(Index(count), Index(dim));
    need(ds.inputs.size() * sizeof(double));
    std::memcpy(ds.inputs.data(), buf.data() + off, ds.inputs.size() * sizeof(double));
    return ds;
}

} // namespace cntnn
