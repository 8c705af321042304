#pragma once
#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mmfl/errors.hpp"
#include "mmfl/masking.hpp"

namespace mmfl {

// Multimodal dataset: one feature matrix per modality (feature_len x n_samples,
// samples are columns), integer class labels, optional availability mask.
struct MultimodalDataset {
    std::vector<std::string> modalities;
    std::vector<Eigen::MatrixXd> features; // features[i]: feature_len_i x n
    std::vector<int> labels;
    int n_classes = 0;
    std::optional<MissingMask> availability;

    size_t n_samples() const { return labels.size(); }
    size_t n_modalities() const { return modalities.size(); }
    std::vector<int> feature_lens() const {
        std::vector<int> out;
        for (const auto& f : features) out.push_back(static_cast<int>(f.rows()));
        return out;
    }

    MultimodalDataset subset(const std::vector<size_t>& indices) const;
    void validate() const;
};

struct Partition {
    std::vector<std::vector<size_t>> assignments; // per client, sample indices
};

MultimodalDataset generate_synthetic(size_t n_samples, size_t n_modalities,
                                     size_t feature_len, size_t n_classes,
                                     double class_separation, uint64_t seed);

// Stratified-by-label random split; per stratum the test side gets
// round(test_fraction * count) samples.
std::pair<MultimodalDataset, MultimodalDataset>
train_test_split(const MultimodalDataset& dataset, double test_fraction, uint64_t seed);

Partition partition_iid(size_t n_samples, size_t n_clients, uint64_t seed);

// Per-class Dirichlet(alpha) proportions with largest-remainder rounding;
// resamples up to 100 times if a client would end up empty, then falls back to
// moving one sample from the largest client.
Partition partition_dirichlet(const std::vector<int>& labels, int n_classes,
                              size_t n_clients, double alpha, uint64_t seed);

// Zeroes masked modality slots and attaches the mask. Unmasked entries are
// copied bit-identically.
MultimodalDataset apply_mask(const MultimodalDataset& dataset, const MissingMask& mask);

// Directory layout: manifest.txt (key=value), labels.csv, <modality>.csv.
void save_dataset(const MultimodalDataset& dataset, const std::string& directory);
MultimodalDataset load_dataset(const std::string& directory);

} // namespace mmfl
