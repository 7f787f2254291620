#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gradsplit/tensor.hpp"

namespace gradsplit {

enum class Provenance { cifar_subset, gaussian_noise, mixed, synthetic_blobs };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

// Immutable labeled dataset. Inputs are [N x ...] with values in [0, 1] for
// image-like data; labels are class indices stored as reals. Generated
// datasets are fixed at creation time: the same bytes every epoch.
struct LabeledDataset {
    Tensor inputs;
    Tensor labels;
    std::string name;
    Provenance provenance = Provenance::synthetic_blobs;
    std::int64_t class_count = 10;

    // Metadata echoed into the cache-file header.
    std::uint64_t gen_seed = 0;
    double gen_sigma = 0.0;

    std::int64_t size() const { return inputs.defined() ? inputs.dim(0) : 0; }
    std::int64_t label_at(std::int64_t i) const;
    void validate() const;
};

LabeledDataset dataset_slice(const LabeledDataset& ds, std::int64_t begin, std::int64_t end);

// --- CIFAR-10 binary batches -------------------------------------------------

// Reads 3073-byte records (1 label byte + 3072 channel-major pixel bytes)
// and scales pixels to [0, 1] by division by 255. `path` may be one .bin
// file or a directory, in which case every *.bin inside is concatenated in
// sorted name order. Record order is preserved.
LabeledDataset load_cifar10(const std::string& path);

// --- subset conventions ------------------------------------------------------

enum class SizeClass { s2_5k, s5k, s10k, custom };

const char* to_string(SizeClass s);
SizeClass size_class_from_string(const std::string& s);

struct SplitSpec {
    std::int64_t train_count = 0;  // used when size_class == custom
    std::int64_t test_count = 0;
    enum class Source { disjoint_train_test, train_halved };
    Source source = Source::disjoint_train_test;
};

// Prefix subsets in stored order. Named sizes: 2.5k = 2,560 train and
// 2,560 test; 5k = 5,120 each; 10k = 10,240 train and 10,000 test.
// With Source::train_halved the train prefix is split into two disjoint
// equal halves (first half -> train, second half -> test) and ds_test is
// ignored.
std::pair<LabeledDataset, LabeledDataset> make_subsets(const LabeledDataset& ds_train,
                                                       const LabeledDataset& ds_test,
                                                       const SplitSpec& spec,
                                                       SizeClass size_class);

// --- generated datasets ------------------------------------------------------

// Fixed scaled Gaussian noise: inputs ~ Normal(0.5, sigma) clipped to [0, 1],
// drawn once from `seed`; labels round-robin so classes stay balanced.
LabeledDataset gaussian_noise_dataset(const Shape& sample_shape, std::int64_t n,
                                      std::int64_t class_count, double sigma,
                                      std::uint64_t seed);

// Replaces a uniformly chosen round(fraction * N) of the inputs with fixed
// Gaussian noise images; labels untouched. The replaced index set is a pure
// function of `seed`.
LabeledDataset mix_noise(const LabeledDataset& ds, double fraction, double sigma,
                         std::uint64_t seed);

// Class-conditional Gaussian clusters. Means sit `separation` apart along
// coordinate axes; per-class spread is `sigma`. Labels round-robin.
LabeledDataset synthetic_blobs(std::int64_t n, std::int64_t class_count, std::int64_t dim,
                               double separation, std::uint64_t seed, double sigma = 1.0);

// --- cache file ---------------------------------------------------------------

// Simple container (text header with name/shape/seed/sigma, then raw
// float64 inputs and labels) so generated datasets replay exactly.
void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

}  // namespace gradsplit
