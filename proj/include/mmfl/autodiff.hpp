#pragma once
#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "mmfl/errors.hpp"

namespace mmfl::ad {

// Eager tape-based reverse-mode differentiation over dense matrices.
// Values are computed at construction; backward() walks the tape in reverse.
// Children always precede parents on the tape, so index order is topological.

class Tape;

struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
};

class Tape {
public:
    Tape() { nodes_.reserve(4096); }

    Var leaf(Eigen::MatrixXd value);
    Var scalar(double v) { return leaf(Eigen::MatrixXd::Constant(1, 1, v)); }

    const Eigen::MatrixXd& val(Var v) const { return nodes_[static_cast<size_t>(v.i)].val; }
    double sval(Var v) const { return val(v)(0, 0); }
    const Eigen::MatrixXd& grad(Var v) const { return nodes_[static_cast<size_t>(v.i)].grad; }
    bool has_grad(Var v) const { return nodes_[static_cast<size_t>(v.i)].has_grad; }

    // elementwise
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var cmul(Var a, Var b);
    Var scale(Var a, double s);                 // s * a
    Var affine(Var a, double s, double c);      // s * a + c
    Var tanh_(Var a);
    Var sigmoid(Var a);

    // linear algebra
    Var matmul(Var a, Var b);      // A B
    Var matmul_tn(Var a, Var b);   // A^T B
    Var matmul_nt(Var a, Var b);   // A B^T
    Var add_col_broadcast(Var x, Var b);   // X + b 1^T, b is column
    Var dot(Var a, Var b);                 // 1x1

    // structure
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var slice_rows(Var a, Eigen::Index r0, Eigen::Index n);
    Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n);
    Var slice_col(Var a, Eigen::Index c) { return slice_cols(a, c, 1); }
    // X (R x n*group) -> (group*R x n); output col j stacks input cols
    // [j*group, (j+1)*group) on top of each other
    Var stack_col_groups(Var a, Eigen::Index group);
    Var average(const std::vector<Var>& parts);        // elementwise mean
    Var sum_scalars(const std::vector<Var>& parts);    // sum of 1x1 vars
    // c0 + sum_i coeffs[i] * vars[i], all 1x1
    Var lincomb(double c0, const std::vector<double>& coeffs, const std::vector<Var>& vars);

    // normalization
    // Per-row standardization over the columns flagged in col_mask (population
    // variance). Columns outside the mask are standardized with the same
    // statistics. Outputs batch mean/var through the out-params.
    Var batchnorm_train(Var x, const std::vector<uint8_t>& col_mask, double eps,
                        Eigen::VectorXd* batch_mean, Eigen::VectorXd* batch_var);
    // (X - mu 1^T) scaled by inv_std per row; mu/inv_std are constants.
    Var normalize_fixed(Var x, const Eigen::VectorXd& mu, const Eigen::VectorXd& inv_std);
    Var scale_shift(Var x, Var gamma, Var beta);  // per-row gamma * x + beta
    Var colwise_l2_normalize(Var x);
    Var softmax_rows(Var x);

    // compositions with fused backward
    Var cosine(Var a, Var b);  // 1x1; returns 0 with zero grads if a norm < 1e-12
    // out col j = alpha_j * C_j + (1 - alpha_j) * W_j ; alpha is 1 x cols
    Var convex_combine_cols(Var w, Var c, Var alpha);
    // L = sum_{numer} (-G_ij) + |numer| * logsumexp_{denom} (G_ij)
    Var contrastive_from_gram(Var gram,
                              const std::vector<std::pair<int, int>>& numer,
                              const std::vector<std::pair<int, int>>& denom);
    // mean over columns of -log softmax(Z(:,j))[labels[j]]
    Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);

    void backward(Var root);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Eigen::MatrixXd val;
        Eigen::MatrixXd grad;
        bool has_grad = false;
        std::function<void()> back;  // pulls this node's grad into children
    };

    std::vector<Node> nodes_;

    Var push(Eigen::MatrixXd value, std::function<void()> back = nullptr) {
        nodes_.push_back(Node{std::move(value), {}, false, std::move(back)});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    void accum(Var v, const Eigen::MatrixXd& g) {
        Node& n = nodes_[static_cast<size_t>(v.i)];
        if (!n.has_grad) { n.grad = g; n.has_grad = true; }
        else n.grad += g;
    }

    const Eigen::MatrixXd& g(Var v) const { return nodes_[static_cast<size_t>(v.i)].grad; }
};

} // namespace mmfl::ad
