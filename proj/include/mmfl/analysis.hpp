#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mmfl/model.hpp"

namespace mmfl {

struct BoundEstimate {
    double mean_deviation = 0.0;  // E ||p^S - p^empty||_2
    double mean_lds = 0.0;        // empirical alignment loss under masking
    double lipschitz_mu = 0.0;    // lower-bound estimate for the head
    double rhs_value = 0.0;
};

// Mean l2 distance between softmax outputs with and without masking a random
// size-|S| modality subset; n_patterns subsets per instance. |S| = 0 -> 0.
double output_deviation(ClientModel& model, const MultimodalDataset& data,
                        int missing_size, int n_patterns, uint64_t seed);

// Max ratio ||f(a)-f(b)|| / ||a-b|| over random pairs inside a radius ball.
// A lower bound on the true Lipschitz constant.
double estimate_lipschitz(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& head,
                          int input_dim, int n_pairs, double radius, uint64_t seed);

// mu * |S| * sqrt(mean_lds/(M-|S|)^2 + log(M^2/(M-|S|)^2)); a trend quantity,
// not a literal bound (the big-O constant is unknown). Negative mean_lds is
// clamped to 0 with a note on stderr.
double bound_rhs(double mean_lds, int missing_size, int n_modalities, double mu);

// max(1, round(cbrt(tau / (M_iter * K * d_p))))
int recommended_top_p(int tau, int M_iter, int K, int d_p);

// Empirical mean alignment loss on masked batches (eval-mode forward with the
// contrastive terms forced on).
double mean_alignment_loss(ClientModel& model, const MultimodalDataset& data,
                           int missing_size, int n_patterns, int batch_size,
                           uint64_t seed);

// One bound.csv row worth of measurements for a trained model.
BoundEstimate estimate_bound(ClientModel& model, const MultimodalDataset& data,
                             int missing_size, int n_patterns, uint64_t seed);

// CSV rows (instance_id, modality, pattern_id, c0..): final per-modality
// representations under each explicit missing pattern (modality index lists).
void export_embeddings(ClientModel& model, const MultimodalDataset& data,
                       const std::vector<std::vector<int>>& patterns,
                       const std::string& path);

} // namespace mmfl
