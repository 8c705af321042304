#include "mmfl/fusion.hpp"

namespace mmfl {

ad::Var fuse(ad::Tape& tape, ad::Var w_all, ad::Var w_hat, double temperature) {
    if (tape.val(w_all).cols() != tape.val(w_hat).cols())
        throw ShapeMismatch("fuse: modality counts differ between w and w_hat");
    ad::Var logits = tape.matmul_tn(w_hat, w_hat);            // M x M
    if (temperature != 1.0) logits = tape.scale(logits, 1.0 / temperature);
    ad::Var attn = tape.softmax_rows(logits);                 // row i: weights over j
    return tape.matmul_nt(w_all, attn);                       // col i = sum_j a_ij w_j
}

GateResult gate_combine(ad::Tape& tape, ad::Var w_cols, ad::Var c_cols,
                        ad::Var gate_weight, ad::Var gate_bias) {
    ad::Var gin = tape.concat_rows({w_cols, c_cols});
    ad::Var logits = tape.add_col_broadcast(tape.matmul_tn(gate_weight, gin), gate_bias);
    ad::Var alpha = tape.sigmoid(logits);
    return {tape.convex_combine_cols(w_cols, c_cols, alpha), alpha};
}

ad::Var total_loss(ad::Tape& tape, ad::Var l_task, ad::Var l_ds, ad::Var l_rc,
                   ad::Var relevance_r, double lambda, double eta) {
    if (lambda < 0.0 || eta < 0.0)
        throw ValidationError("total_loss: lambda and eta must be non-negative");
    return tape.lincomb(0.0, {1.0, lambda, lambda, -eta}, {l_task, l_ds, l_rc, relevance_r});
}

} // namespace mmfl
