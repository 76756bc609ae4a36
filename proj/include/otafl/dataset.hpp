#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "otafl/types.hpp"

namespace otafl {

/// Feature/label samples; one row of `features` per sample.
struct Dataset {
    Eigen::MatrixXd features;
    std::vector<int> labels;
    int num_classes = 0;
    int owner = -1;                          ///< device index, -1 for pooled data
    std::vector<std::size_t> source_index;   ///< row index in the pooled dataset

    std::size_t size() const noexcept { return labels.size(); }
    Eigen::Index feature_dim() const noexcept { return features.cols(); }
    /// Rows at the given positions, in order.
    Dataset subset(const std::vector<std::size_t>& rows) const;
    std::vector<int> label_set() const;
};

struct SyntheticSpec {
    int classes = 10;
    int features = 20;
    int samples_per_class = 250;
    /// Standard deviation of class centroids; within-class noise is unit variance.
    double separation = 1.0;
    std::uint64_t seed = 1;
};

/// Gaussian-mixture classification data.
Dataset make_synthetic(const SyntheticSpec& spec);

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

/// Stratified hold-out: round(test_fraction * n_c) samples of every class go to test.
TrainTestSplit split_train_test(const Dataset& data, double test_fraction, std::uint64_t seed);

/// Label-skewed split: every device holds exactly labels_per_device labels, every
/// label is spread over at most two devices, and all devices get equally many samples.
/// Throws std::invalid_argument when the combination is infeasible.
std::vector<Dataset> partition_noniid(const Dataset& data, std::size_t n_devices, int labels_per_device,
                                      std::uint64_t seed);

/// device -> source sample indices, for auditing a partition.
nlohmann::json partition_manifest(const std::vector<Dataset>& parts);

/// CSV rows of `label,f1,f2,...`; a non-numeric first line is treated as a header.
Dataset load_csv(const std::filesystem::path& path);

/// MNIST IDX image/label pair; pixels scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

}  // namespace otafl
