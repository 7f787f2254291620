#include "gradsplit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gradsplit {

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::cifar_subset: return "cifar_subset";
        case Provenance::gaussian_noise: return "gaussian_noise";
        case Provenance::mixed: return "mixed";
        case Provenance::synthetic_blobs: return "synthetic_blobs";
    }
    return "?";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "cifar_subset") return Provenance::cifar_subset;
    if (s == "gaussian_noise") return Provenance::gaussian_noise;
    if (s == "mixed") return Provenance::mixed;
    if (s == "synthetic_blobs") return Provenance::synthetic_blobs;
    throw ConfigError("unknown provenance '" + s + "'");
}

const char* to_string(SizeClass s) {
    switch (s) {
        case SizeClass::s2_5k: return "2.5k";
        case SizeClass::s5k: return "5k";
        case SizeClass::s10k: return "10k";
        case SizeClass::custom: return "custom";
    }
    return "?";
}

SizeClass size_class_from_string(const std::string& s) {
    if (s == "2.5k") return SizeClass::s2_5k;
    if (s == "5k") return SizeClass::s5k;
    if (s == "10k") return SizeClass::s10k;
    if (s == "custom") return SizeClass::custom;
    throw ConfigError("unknown size class '" + s + "'");
}

std::int64_t LabeledDataset::label_at(std::int64_t i) const {
    return static_cast<std::int64_t>(std::llround(labels.at(i)));
}

void LabeledDataset::validate() const {
    if (!inputs.defined() || !labels.defined()) throw ConfigError("dataset has undefined tensors");
    if (labels.rank() != 1 || labels.dim(0) != inputs.dim(0)) {
        throw DimensionError("dataset labels " + shape_to_string(labels.shape()) +
                             " do not match inputs " + shape_to_string(inputs.shape()));
    }
    for (std::int64_t i = 0; i < size(); ++i) {
        const std::int64_t y = label_at(i);
        if (y < 0 || y >= class_count) {
            throw DataError("label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(class_count) + ") at row " + std::to_string(i));
        }
    }
    if (!all_finite(inputs)) throw DataError("dataset inputs contain non-finite values");
}

LabeledDataset dataset_slice(const LabeledDataset& ds, std::int64_t begin, std::int64_t end) {
    LabeledDataset out = ds;
    out.inputs = slice_rows(ds.inputs, begin, end);
    out.labels = slice_rows(ds.labels, begin, end);
    return out;
}

// --- CIFAR-10 -----------------------------------------------------------------

namespace {

constexpr std::int64_t kCifarRecordBytes = 3073;  // 1 label + 3 * 1024 pixels
constexpr std::int64_t kCifarPixels = 3072;

void append_cifar_file(const std::string& path, std::vector<double>& inputs,
                       std::vector<double>& labels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open CIFAR-10 file: " + path);
    in.seekg(0, std::ios::end);
    const std::int64_t bytes = static_cast<std::int64_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (bytes % kCifarRecordBytes != 0) {
        throw FormatError("CIFAR-10 file " + path + " has " + std::to_string(bytes) +
                          " bytes, not a multiple of " + std::to_string(kCifarRecordBytes));
    }
    const std::int64_t records = bytes / kCifarRecordBytes;
    std::vector<unsigned char> record(kCifarRecordBytes);
    for (std::int64_t r = 0; r < records; ++r) {
        in.read(reinterpret_cast<char*>(record.data()), kCifarRecordBytes);
        if (!in) throw FormatError("CIFAR-10 file " + path + " truncated at record " + std::to_string(r));
        if (record[0] >= 10) {
            throw DataError("CIFAR-10 label byte " + std::to_string(record[0]) + " >= 10 in " + path);
        }
        labels.push_back(static_cast<double>(record[0]));
        for (std::int64_t i = 0; i < kCifarPixels; ++i) {
            inputs.push_back(static_cast<double>(record[1 + i]) / 255.0);
        }
    }
}

}  // namespace

LabeledDataset load_cifar10(const std::string& path) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".bin") {
                files.push_back(entry.path().string());
            }
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw IoError("no .bin files under " + path);
    } else {
        files.push_back(path);
    }
    std::vector<double> inputs, labels;
    for (const std::string& f : files) append_cifar_file(f, inputs, labels);
    const std::int64_t n = static_cast<std::int64_t>(labels.size());
    LabeledDataset ds;
    ds.inputs = Tensor::from_data({n, 3, 32, 32}, std::move(inputs));
    ds.labels = Tensor::from_data({n}, std::move(labels));
    ds.name = fs::path(path).filename().string();
    ds.provenance = Provenance::cifar_subset;
    ds.class_count = 10;
    return ds;
}

// --- subsets ------------------------------------------------------------------

std::pair<LabeledDataset, LabeledDataset> make_subsets(const LabeledDataset& ds_train,
                                                       const LabeledDataset& ds_test,
                                                       const SplitSpec& spec,
                                                       SizeClass size_class) {
    std::int64_t train_count = spec.train_count;
    std::int64_t test_count = spec.test_count;
    switch (size_class) {
        case SizeClass::s2_5k: train_count = 2560; test_count = 2560; break;
        case SizeClass::s5k: train_count = 5120; test_count = 5120; break;
        case SizeClass::s10k: train_count = 10240; test_count = 10000; break;
        case SizeClass::custom: break;
    }
    if (train_count <= 0) throw ConfigError("subset train_count must be positive");

    if (spec.source == SplitSpec::Source::train_halved) {
        if (train_count % 2 != 0) throw ConfigError("train_halved needs an even train_count");
        if (train_count > ds_train.size()) {
            throw ConfigError("train source has " + std::to_string(ds_train.size()) +
                              " samples, need " + std::to_string(train_count));
        }
        LabeledDataset half_a = dataset_slice(ds_train, 0, train_count / 2);
        LabeledDataset half_b = dataset_slice(ds_train, train_count / 2, train_count);
        half_a.name = ds_train.name + "/half-train";
        half_b.name = ds_train.name + "/half-test";
        return {half_a, half_b};
    }

    if (test_count <= 0) throw ConfigError("subset test_count must be positive");
    if (train_count > ds_train.size() || test_count > ds_test.size()) {
        throw ConfigError("subset sizes (" + std::to_string(train_count) + ", " +
                          std::to_string(test_count) + ") exceed sources (" +
                          std::to_string(ds_train.size()) + ", " + std::to_string(ds_test.size()) + ")");
    }
    return {dataset_slice(ds_train, 0, train_count), dataset_slice(ds_test, 0, test_count)};
}

// --- generated datasets ---------------------------------------------------------

namespace {

Shape with_batch(const Shape& sample_shape, std::int64_t n) {
    Shape s;
    s.push_back(n);
    s.insert(s.end(), sample_shape.begin(), sample_shape.end());
    return s;
}

double clipped_noise_pixel(Rng& rng, double sigma) {
    return std::clamp(normal(rng, 0.5, sigma), 0.0, 1.0);
}

}  // namespace

LabeledDataset gaussian_noise_dataset(const Shape& sample_shape, std::int64_t n,
                                      std::int64_t class_count, double sigma,
                                      std::uint64_t seed) {
    if (sigma < 0.0) throw ConfigError("noise sigma must be nonnegative");
    if (n < class_count) throw ConfigError("need at least one sample per class");
    Rng rng(seed);
    Tensor inputs = Tensor::zeros(with_batch(sample_shape, n));
    for (std::int64_t i = 0; i < inputs.numel(); ++i) {
        inputs.data()[i] = clipped_noise_pixel(rng, sigma);
    }
    Tensor labels = Tensor::zeros({n});
    for (std::int64_t i = 0; i < n; ++i) {
        labels.data()[i] = static_cast<double>(i % class_count);
    }
    LabeledDataset ds;
    ds.inputs = std::move(inputs);
    ds.labels = std::move(labels);
    ds.name = "gaussian-noise";
    ds.provenance = Provenance::gaussian_noise;
    ds.class_count = class_count;
    ds.gen_seed = seed;
    ds.gen_sigma = sigma;
    return ds;
}

LabeledDataset mix_noise(const LabeledDataset& ds, double fraction, double sigma,
                         std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0) throw ConfigError("mix fraction must be in [0, 1]");
    const std::int64_t n = ds.size();
    const std::int64_t replace = static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(n)));
    LabeledDataset out = ds;
    out.inputs = ds.inputs.clone();
    out.labels = ds.labels;
    out.name = ds.name + "+noise";
    out.provenance = replace > 0 ? Provenance::mixed : ds.provenance;
    out.gen_seed = seed;
    out.gen_sigma = sigma;
    if (replace == 0) return out;

    // Partial Fisher-Yates: the first `replace` entries are a uniform draw
    // without replacement. The noise stream is seeded separately so that
    // fraction = 1 reproduces gaussian_noise_dataset(seed) input for input.
    Rng pick(mix_seed(seed, 1));
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = 0; i < replace; ++i) {
        const std::int64_t j = i + static_cast<std::int64_t>(pick() % static_cast<std::uint64_t>(n - i));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<std::int64_t> chosen(order.begin(), order.begin() + replace);
    std::sort(chosen.begin(), chosen.end());

    Rng noise(seed);
    const std::int64_t stride = ds.inputs.numel() / n;
    for (std::int64_t idx : chosen) {
        double* row = out.inputs.data() + idx * stride;
        for (std::int64_t p = 0; p < stride; ++p) row[p] = clipped_noise_pixel(noise, sigma);
    }
    return out;
}

LabeledDataset synthetic_blobs(std::int64_t n, std::int64_t class_count, std::int64_t dim,
                               double separation, std::uint64_t seed, double sigma) {
    if (separation < 0.0) throw ConfigError("blob separation must be nonnegative");
    if (sigma < 0.0) throw ConfigError("blob sigma must be nonnegative");
    if (dim < 1) throw ConfigError("blob dim must be >= 1");
    if (n < class_count) throw ConfigError("need at least one sample per class");

    // Class means: separation along axis c for c < dim, otherwise a random
    // unit direction drawn from the same seed stream.
    Rng rng(mix_seed(seed, 0));
    std::vector<std::vector<double>> means(static_cast<std::size_t>(class_count),
                                           std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    for (std::int64_t c = 0; c < class_count; ++c) {
        auto& m = means[static_cast<std::size_t>(c)];
        if (c < dim) {
            m[static_cast<std::size_t>(c)] = separation;
        } else {
            double norm2 = 0.0;
            for (double& v : m) {
                v = normal(rng);
                norm2 += v * v;
            }
            const double inv = separation / std::sqrt(std::max(norm2, 1e-300));
            for (double& v : m) v *= inv;
        }
    }

    Rng draw(mix_seed(seed, 1));
    Tensor inputs = Tensor::zeros({n, dim});
    Tensor labels = Tensor::zeros({n});
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t c = i % class_count;
        labels.data()[i] = static_cast<double>(c);
        const auto& m = means[static_cast<std::size_t>(c)];
        double* row = inputs.data() + i * dim;
        for (std::int64_t d = 0; d < dim; ++d) {
            row[d] = m[static_cast<std::size_t>(d)] + sigma * normal(draw);
        }
    }
    LabeledDataset ds;
    ds.inputs = std::move(inputs);
    ds.labels = std::move(labels);
    ds.name = "blobs";
    ds.provenance = Provenance::synthetic_blobs;
    ds.class_count = class_count;
    ds.gen_seed = seed;
    ds.gen_sigma = sigma;
    return ds;
}

// --- cache file ------------------------------------------------------------------

namespace {
constexpr const char* kDatasetMagic = "GSDS0001";
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open dataset cache for writing: " + path);
    out << kDatasetMagic << '\n';
    out << "name " << (ds.name.empty() ? "unnamed" : ds.name) << '\n';
    out << "provenance " << to_string(ds.provenance) << '\n';
    out << "class_count " << ds.class_count << '\n';
    out << "seed " << ds.gen_seed << '\n';
    out << "sigma " << ds.gen_sigma << '\n';
    out << "shape";
    for (std::int64_t d : ds.inputs.shape()) out << ' ' << d;
    out << '\n';
    out << "data\n";
    out.write(reinterpret_cast<const char*>(ds.inputs.data()),
              static_cast<std::streamsize>(ds.inputs.numel() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(ds.labels.data()),
              static_cast<std::streamsize>(ds.labels.numel() * sizeof(double)));
    if (!out) throw IoError("short write to dataset cache: " + path);
}

LabeledDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset cache: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kDatasetMagic) {
        throw FormatError("bad dataset cache magic in " + path);
    }
    LabeledDataset ds;
    Shape shape;
    while (std::getline(in, line)) {
        if (line == "data") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "name") {
            ls >> ds.name;
        } else if (key == "provenance") {
            std::string v;
            ls >> v;
            ds.provenance = provenance_from_string(v);
        } else if (key == "class_count") {
            ls >> ds.class_count;
        } else if (key == "seed") {
            ls >> ds.gen_seed;
        } else if (key == "sigma") {
            ls >> ds.gen_sigma;
        } else if (key == "shape") {
            std::int64_t d;
            while (ls >> d) shape.push_back(d);
        } else {
            throw FormatError("unknown dataset cache field '" + key + "' in " + path);
        }
    }
    if (shape.empty()) throw FormatError("dataset cache missing shape in " + path);
    const std::int64_t total = shape_numel(shape);
    std::vector<double> inputs(static_cast<std::size_t>(total));
    in.read(reinterpret_cast<char*>(inputs.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    std::vector<double> labels(static_cast<std::size_t>(shape[0]));
    in.read(reinterpret_cast<char*>(labels.data()),
            static_cast<std::streamsize>(shape[0] * sizeof(double)));
    if (!in) throw FormatError("dataset cache truncated in " + path);
    ds.inputs = Tensor::from_data(shape, std::move(inputs));
    ds.labels = Tensor::from_data({shape[0]}, std::move(labels));
    return ds;
}

}  // namespace gradsplit
