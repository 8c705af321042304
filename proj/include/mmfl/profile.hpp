#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mmfl/errors.hpp"

namespace mmfl {

// Learnable pool of embedding controls. Controls are columns of `controls`
// (d_p x tau). selection_counts track per-control usage within the current
// federation round and drive top-p upload compression.
struct DataMissingProfile {
    Eigen::MatrixXd controls;
    std::vector<uint64_t> selection_counts;

    int tau() const { return static_cast<int>(controls.cols()); }
    int d_p() const { return static_cast<int>(controls.rows()); }

    void reset_counts() { selection_counts.assign(static_cast<size_t>(tau()), 0); }
};

// Pool entries drawn uniformly from [-1/sqrt(d_p), 1/sqrt(d_p)].
DataMissingProfile make_profile(int tau, int d_p, uint64_t seed);

// Cosine similarity; returns 0 (and sets *degenerate) when either norm < 1e-12.
double relevance(const Eigen::VectorXd& q, const Eigen::VectorXd& psi,
                 bool* degenerate = nullptr);

// Indices of the kappa controls with largest relevance to q; ties broken by
// smallest index. Does not touch selection counts.
std::vector<int> select_top_kappa(const Eigen::VectorXd& q,
                                  const Eigen::MatrixXd& controls, int kappa);

// Sum of selected top-kappa similarities over all queries (columns of Q).
double relevance_regularizer(const Eigen::MatrixXd& batch_queries,
                             const DataMissingProfile& profile, int kappa);

// Arithmetic mean of the selected control vectors.
Eigen::VectorXd missing_pattern_feature(const DataMissingProfile& profile,
                                        const std::vector<int>& selected);

// Keeps the p most frequently selected controls (ties -> lower index),
// counters preserved.
DataMissingProfile top_p_compress(const DataMissingProfile& profile, int p);

// Header line "tau d_p", one control per line, then one counts line.
void save_profile(const DataMissingProfile& profile, const std::string& path);
DataMissingProfile load_profile(const std::string& path);

} // namespace mmfl
