#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "mmfl/errors.hpp"

namespace mmfl {

// Missing statistics (p_m, p_s): p_s = fraction of samples carrying missing
// modalities, p_m = fraction of modalities missing within those samples.
struct MissingStats {
    double p_m = 0.0;
    double p_s = 0.0;

    void validate() const;
    // overall proportion of missing modality slots, p_m * p_s
    double missing_degree() const;
};

// Binary samples x modalities availability matrix.  1 = available, 0 = missing.
class MissingMask {
public:
    MissingMask() = default;
    MissingMask(size_t n_samples, size_t n_modalities, uint8_t fill = 1)
        : n_samples_(n_samples), n_modalities_(n_modalities),
          entries_(n_samples * n_modalities, fill) {}

    size_t n_samples() const { return n_samples_; }
    size_t n_modalities() const { return n_modalities_; }

    uint8_t at(size_t sample, size_t modality) const {
        return entries_[sample * n_modalities_ + modality];
    }
    void set(size_t sample, size_t modality, uint8_t v) {
        entries_[sample * n_modalities_ + modality] = v;
    }
    bool available(size_t sample, size_t modality) const { return at(sample, modality) != 0; }

    size_t zeros_in_row(size_t sample) const;
    size_t rows_with_zeros() const;

    bool operator==(const MissingMask& o) const {
        return n_samples_ == o.n_samples_ && n_modalities_ == o.n_modalities_ && entries_ == o.entries_;
    }

private:
    size_t n_samples_ = 0;
    size_t n_modalities_ = 0;
    std::vector<uint8_t> entries_;
};

// Builds the availability matrix for (p_m, p_s): exactly round(p_s * n) rows are
// affected; each affected row has exactly round(p_m * M) zeros in random column
// positions, capped at M-1 when p_m < 1 so one modality always survives.
MissingMask make_missing_mask(size_t n_samples, size_t n_modalities,
                              const MissingStats& stats, uint64_t seed);

// Headerless CSV of 0/1 values, one sample per row.
void save_mask(const MissingMask& mask, const std::string& path);
MissingMask load_mask(const std::string& path);

} // namespace mmfl
