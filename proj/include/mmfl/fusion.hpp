#pragma once
#include "mmfl/autodiff.hpp"

namespace mmfl {

// Similarity-weighted cross-modal fusion for one instance. w_all: 3C x M final
// representations, w_hat: C x M l2-normalized projections. Attention logits are
// pairwise inner products of the projections (self-weight included), softmax
// over modalities at the given temperature.
ad::Var fuse(ad::Tape& tape, ad::Var w_all, ad::Var w_hat, double temperature = 1.0);

struct GateResult {
    ad::Var combined;  // same shape as inputs
    ad::Var alpha;     // 1 x cols, in (0,1)
};

// Batched gate over columns: alpha_j = sigmoid(s^T [w_j ; c_j] + b),
// out_j = alpha_j * c_j + (1 - alpha_j) * w_j.
GateResult gate_combine(ad::Tape& tape, ad::Var w_cols, ad::Var c_cols,
                        ad::Var gate_weight, ad::Var gate_bias);

// L = l_task + lambda * (l_ds + l_rc) - eta * relevance
ad::Var total_loss(ad::Tape& tape, ad::Var l_task, ad::Var l_ds, ad::Var l_rc,
                   ad::Var relevance_r, double lambda, double eta);

} // namespace mmfl
