#include "mmfl/masking.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mmfl/rng.hpp"

namespace mmfl {

namespace {
// round-half-up of a fractional target count
size_t round_count(double frac, size_t total) {
    return static_cast<size_t>(std::floor(frac * static_cast<double>(total) + 0.5));
}
} // namespace

void MissingStats::validate() const {
    if (!(p_m >= 0.0 && p_m <= 1.0) || !(p_s >= 0.0 && p_s <= 1.0))
        throw InvalidStats("missing statistics must lie in [0,1], got p_m=" +
                           std::to_string(p_m) + " p_s=" + std::to_string(p_s));
    if (p_m == 1.0 && p_s == 1.0)
        throw ExcludedConfiguration("p_m = p_s = 1 leaves no modality anywhere");
}

double MissingStats::missing_degree() const {
    validate();
    return p_m * p_s;
}

size_t MissingMask::zeros_in_row(size_t sample) const {
    size_t z = 0;
    for (size_t m = 0; m < n_modalities_; ++m)
        if (!available(sample, m)) ++z;
    return z;
}

size_t MissingMask::rows_with_zeros() const {
    size_t r = 0;
    for (size_t s = 0; s < n_samples_; ++s)
        if (zeros_in_row(s) > 0) ++r;
    return r;
}

MissingMask make_missing_mask(size_t n_samples, size_t n_modalities,
                              const MissingStats& stats, uint64_t seed) {
    stats.validate();
    if (n_samples < 1) throw InvalidStats("make_missing_mask: n_samples must be >= 1");
    if (n_modalities < 2) throw InvalidStats("make_missing_mask: n_modalities must be >= 2");
    if (stats.p_m == 1.0 && stats.p_s == 1.0)
        throw ExcludedConfiguration("p_m = p_s = 1 removes every modality from every sample");

    size_t affected = round_count(stats.p_s, n_samples);
    size_t missing_per_row = round_count(stats.p_m, n_modalities);
    if (stats.p_m < 1.0 && missing_per_row >= n_modalities)
        missing_per_row = n_modalities - 1; // at least one modality survives
    if (missing_per_row == 0) affected = 0;  // nothing to remove in a row
    if (missing_per_row >= n_modalities && affected >= n_samples)
        throw ExcludedConfiguration("requested missingness removes every modality from every sample");

    MissingMask mask(n_samples, n_modalities, 1);
    Rng rng(derive_seed(seed, "mask"));
    auto rows = rng.sample_without_replacement(n_samples, affected);
    for (size_t r : rows) {
        auto cols = rng.sample_without_replacement(n_modalities, missing_per_row);
        for (size_t c : cols) mask.set(r, c, 0);
    }
    return mask;
}

void save_mask(const MissingMask& mask, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IOFailure("cannot open mask file for writing: " + path);
    for (size_t s = 0; s < mask.n_samples(); ++s) {
        for (size_t m = 0; m < mask.n_modalities(); ++m) {
            if (m) out << ',';
            out << int(mask.at(s, m));
        }
        out << '\n';
    }
    if (!out) throw IOFailure("write failed: " + path);
}

MissingMask load_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOFailure("cannot open mask file: " + path);
    std::vector<std::vector<uint8_t>> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<uint8_t> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (cell != "0" && cell != "1")
                throw FormatError(path + ":" + std::to_string(lineno) +
                                  ": mask entries must be 0 or 1, got '" + cell + "'");
            row.push_back(cell == "1" ? 1 : 0);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError(path + ":" + std::to_string(lineno) + ": ragged mask row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(path + ": empty mask file");
    MissingMask mask(rows.size(), rows.front().size());
    for (size_t s = 0; s < rows.size(); ++s)
        for (size_t m = 0; m < rows[s].size(); ++m)
            mask.set(s, m, rows[s][m]);
    return mask;
}

} // namespace mmfl
