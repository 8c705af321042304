#include "mmfl/autodiff.hpp"

#include <cmath>

namespace mmfl::ad {

namespace {
void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch(std::string(op) + ": operand shapes differ");
}
} // namespace

Var Tape::leaf(Eigen::MatrixXd value) { return push(std::move(value)); }

Var Tape::add(Var a, Var b) {
    check_same_shape(val(a), val(b), "add");
    Var o = push(val(a) + val(b));
    nodes_[o.i].back = [this, o, a, b] { accum(a, g(o)); accum(b, g(o)); };
    return o;
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(val(a), val(b), "sub");
    Var o = push(val(a) - val(b));
    nodes_[o.i].back = [this, o, a, b] { accum(a, g(o)); accum(b, -g(o)); };
    return o;
}

Var Tape::cmul(Var a, Var b) {
    check_same_shape(val(a), val(b), "cmul");
    Var o = push(val(a).cwiseProduct(val(b)));
    nodes_[o.i].back = [this, o, a, b] {
        accum(a, g(o).cwiseProduct(val(b)));
        accum(b, g(o).cwiseProduct(val(a)));
    };
    return o;
}

Var Tape::scale(Var a, double s) {
    Var o = push(s * val(a));
    nodes_[o.i].back = [this, o, a, s] { accum(a, s * g(o)); };
    return o;
}

Var Tape::affine(Var a, double s, double c) {
    Var o = push((s * val(a).array() + c).matrix());
    nodes_[o.i].back = [this, o, a, s] { accum(a, s * g(o)); };
    return o;
}

Var Tape::tanh_(Var a) {
    Var o = push(val(a).array().tanh().matrix());
    nodes_[o.i].back = [this, o, a] {
        accum(a, (g(o).array() * (1.0 - val(o).array().square())).matrix());
    };
    return o;
}

Var Tape::sigmoid(Var a) {
    Var o = push((1.0 / (1.0 + (-val(a).array()).exp())).matrix());
    nodes_[o.i].back = [this, o, a] {
        const auto& y = val(o).array();
        accum(a, (g(o).array() * y * (1.0 - y)).matrix());
    };
    return o;
}

Var Tape::matmul(Var a, Var b) {
    if (val(a).cols() != val(b).rows()) throw ShapeMismatch("matmul: inner dimensions differ");
    Var o = push(val(a) * val(b));
    nodes_[o.i].back = [this, o, a, b] {
        accum(a, g(o) * val(b).transpose());
        accum(b, val(a).transpose() * g(o));
    };
    return o;
}

Var Tape::matmul_tn(Var a, Var b) {
    if (val(a).rows() != val(b).rows()) throw ShapeMismatch("matmul_tn: inner dimensions differ");
    Var o = push(val(a).transpose() * val(b));
    nodes_[o.i].back = [this, o, a, b] {
        accum(a, val(b) * g(o).transpose());
        accum(b, val(a) * g(o));
    };
    return o;
}

Var Tape::matmul_nt(Var a, Var b) {
    if (val(a).cols() != val(b).cols()) throw ShapeMismatch("matmul_nt: inner dimensions differ");
    Var o = push(val(a) * val(b).transpose());
    nodes_[o.i].back = [this, o, a, b] {
        accum(a, g(o) * val(b));
        accum(b, g(o).transpose() * val(a));
    };
    return o;
}

Var Tape::add_col_broadcast(Var x, Var b) {
    if (val(x).rows() != val(b).rows() || val(b).cols() != 1)
        throw ShapeMismatch("add_col_broadcast: bias must be a column matching X rows");
    Var o = push(val(x).colwise() + Eigen::VectorXd(val(b).col(0)));
    nodes_[o.i].back = [this, o, x, b] {
        accum(x, g(o));
        accum(b, g(o).rowwise().sum());
    };
    return o;
}

Var Tape::dot(Var a, Var b) {
    check_same_shape(val(a), val(b), "dot");
    Var o = push(Eigen::MatrixXd::Constant(1, 1, (val(a).array() * val(b).array()).sum()));
    nodes_[o.i].back = [this, o, a, b] {
        double s = g(o)(0, 0);
        accum(a, s * val(b));
        accum(b, s * val(a));
    };
    return o;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_rows: empty input");
    Eigen::Index rows = 0, cols = val(parts[0]).cols();
    for (Var p : parts) {
        if (val(p).cols() != cols) throw ShapeMismatch("concat_rows: column counts differ");
        rows += val(p).rows();
    }
    Eigen::MatrixXd out(rows, cols);
    Eigen::Index r = 0;
    for (Var p : parts) {
        out.middleRows(r, val(p).rows()) = val(p);
        r += val(p).rows();
    }
    Var o = push(std::move(out));
    nodes_[o.i].back = [this, o, parts] {
        Eigen::Index r = 0;
        for (Var p : parts) {
            accum(p, g(o).middleRows(r, val(p).rows()));
            r += val(p).rows();
        }
    };
    return o;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_cols: empty input");
    Eigen::Index cols = 0, rows = val(parts[0]).rows();
    for (Var p : parts) {
        if (val(p).rows() != rows) throw ShapeMismatch("concat_cols: row counts differ");
        cols += val(p).cols();
    }
    Eigen::MatrixXd out(rows, cols);
    Eigen::Index c = 0;
    for (Var p : parts) {
        out.middleCols(c, val(p).cols()) = val(p);
        c += val(p).cols();
    }
    Var o = push(std::move(out));
    nodes_[o.i].back = [this, o, parts] {
        Eigen::Index c = 0;
        for (Var p : parts) {
            accum(p, g(o).middleCols(c, val(p).cols()));
            c += val(p).cols();
        }
    };
    return o;
}

Var Tape::slice_rows(Var a, Eigen::Index r0, Eigen::Index n) {
    if (r0 < 0 || r0 + n > val(a).rows()) throw ShapeMismatch("slice_rows: out of range");
    Var o = push(val(a).middleRows(r0, n));
    nodes_[o.i].back = [this, o, a, r0, n] {
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(val(a).rows(), val(a).cols());
        z.middleRows(r0, n) = g(o);
        accum(a, z);
    };
    return o;
}

Var Tape::slice_cols(Var a, Eigen::Index c0, Eigen::Index n) {
    if (c0 < 0 || c0 + n > val(a).cols()) throw ShapeMismatch("slice_cols: out of range");
    Var o = push(val(a).middleCols(c0, n));
    nodes_[o.i].back = [this, o, a, c0, n] {
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(val(a).rows(), val(a).cols());
        z.middleCols(c0, n) = g(o);
        accum(a, z);
    };
    return o;
}

Var Tape::stack_col_groups(Var a, Eigen::Index group) {
    const Eigen::MatrixXd& X = val(a);
    if (group < 1 || X.cols() % group != 0)
        throw ShapeMismatch("stack_col_groups: column count not divisible by group size");
    Eigen::Index n = X.cols() / group, r = X.rows();
    Eigen::MatrixXd out(group * r, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < group; ++k)
            out.col(j).segment(k * r, r) = X.col(j * group + k);
    Var o = push(std::move(out));
    nodes_[o.i].back = [this, o, a, group, n, r] {
        const Eigen::MatrixXd& G = g(o);
        Eigen::MatrixXd dx(r, n * group);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < group; ++k)
                dx.col(j * group + k) = G.col(j).segment(k * r, r);
        accum(a, dx);
    };
    return o;
}

Var Tape::average(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("average: empty input");
    Eigen::MatrixXd out = val(parts[0]);
    for (size_t i = 1; i < parts.size(); ++i) {
        check_same_shape(out, val(parts[i]), "average");
        out += val(parts[i]);
    }
    out /= static_cast<double>(parts.size());
    Var o = push(std::move(out));
    nodes_[o.i].back = [this, o, parts] {
        Eigen::MatrixXd share = g(o) / static_cast<double>(parts.size());
        for (Var p : parts) accum(p, share);
    };
    return o;
}

Var Tape::sum_scalars(const std::vector<Var>& parts) {
    double s = 0.0;
    for (Var p : parts) s += sval(p);
    Var o = push(Eigen::MatrixXd::Constant(1, 1, s));
    nodes_[o.i].back = [this, o, parts] {
        for (Var p : parts) accum(p, g(o));
    };
    return o;
}

Var Tape::lincomb(double c0, const std::vector<double>& coeffs, const std::vector<Var>& vars) {
    if (coeffs.size() != vars.size()) throw ShapeMismatch("lincomb: size mismatch");
    double s = c0;
    for (size_t i = 0; i < vars.size(); ++i) s += coeffs[i] * sval(vars[i]);
    Var o = push(Eigen::MatrixXd::Constant(1, 1, s));
    nodes_[o.i].back = [this, o, coeffs, vars] {
        for (size_t i = 0; i < vars.size(); ++i) accum(vars[i], coeffs[i] * g(o));
    };
    return o;
}

Var Tape::batchnorm_train(Var x, const std::vector<uint8_t>& col_mask, double eps,
                          Eigen::VectorXd* batch_mean, Eigen::VectorXd* batch_var) {
    const Eigen::MatrixXd& X = val(x);
    if (static_cast<Eigen::Index>(col_mask.size()) != X.cols())
        throw ShapeMismatch("batchnorm_train: mask size does not match column count");
    Eigen::Index n_active = 0;
    for (uint8_t m : col_mask) n_active += (m != 0);
    if (n_active < 1) throw ShapeMismatch("batchnorm_train: no active columns");

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(X.rows());
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        if (col_mask[static_cast<size_t>(j)]) mu += X.col(j);
    mu /= static_cast<double>(n_active);

    Eigen::VectorXd var = Eigen::VectorXd::Zero(X.rows());
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        if (col_mask[static_cast<size_t>(j)]) var += (X.col(j) - mu).array().square().matrix();
    var /= static_cast<double>(n_active);

    Eigen::VectorXd inv_std = (var.array() + eps).sqrt().inverse();
    Eigen::MatrixXd out = (X.colwise() - mu).array().colwise() * inv_std.array();
    if (batch_mean) *batch_mean = mu;
    if (batch_var) *batch_var = var;

    Var o = push(std::move(out));
    nodes_[o.i].back = [this, o, x, col_mask, inv_std, n_active] {
        const Eigen::MatrixXd& G = g(o);
        const Eigen::MatrixXd& Y = val(o);  // the standardized values
        Eigen::VectorXd sum_g = G.rowwise().sum();
        Eigen::VectorXd sum_gy = (G.array() * Y.array()).rowwise().sum();
        double inv_n = 1.0 / static_cast<double>(n_active);
        Eigen::MatrixXd dx(G.rows(), G.cols());
        for (Eigen::Index j = 0; j < G.cols(); ++j) {
            if (col_mask[static_cast<size_t>(j)]) {
                dx.col(j) = (inv_std.array() *
                             (G.col(j).array() - inv_n * sum_g.array() -
                              Y.col(j).array() * inv_n * sum_gy.array()))
                                .matrix();
            } else {
                dx.col(j) = (inv_std.array() * G.col(j).array()).matrix();
            }
        }
        accum(x, dx);
    };
    return o;
}

Var Tape::normalize_fixed(Var x, const Eigen::VectorXd& mu, const Eigen::VectorXd& inv_std) {
    const Eigen::MatrixXd& X = val(x);
    if (mu.size() != X.rows() || inv_std.size() != X.rows())
        throw ShapeMismatch("normalize_fixed: statistics size mismatch");
    Eigen::MatrixXd out = (X.colwise() - mu).array().colwise() * inv_std.array();
    Var o = push(std::move(out));
    nodes_[o.i].back = [this, o, x, inv_std] {
        accum(x, (g(o).array().colwise() * inv_std.array()).matrix());
    };
    return o;
}

Var Tape::scale_shift(Var x, Var gamma, Var beta) {
    const Eigen::MatrixXd& X = val(x);
    if (val(gamma).rows() != X.rows() || val(gamma).cols() != 1 ||
        val(beta).rows() != X.rows() || val(beta).cols() != 1)
        throw ShapeMismatch("scale_shift: gamma/beta must be columns matching X rows");
    Eigen::MatrixXd out =
        (X.array().colwise() * val(gamma).col(0).array()).colwise() + val(beta).col(0).array();
    Var o = push(std::move(out));
    nodes_[o.i].back = [this, o, x, gamma, beta] {
        const Eigen::MatrixXd& G = g(o);
        accum(x, (G.array().colwise() * val(gamma).col(0).array()).matrix());
        accum(gamma, (G.array() * val(x).array()).rowwise().sum().matrix());
        accum(beta, G.rowwise().sum());
    };
    return o;
}

Var Tape::colwise_l2_normalize(Var x) {
    const Eigen::MatrixXd& X = val(x);
    Eigen::MatrixXd out(X.rows(), X.cols());
    Eigen::VectorXd norms(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double n = X.col(j).norm();
        norms[j] = n;
        out.col(j) = n < 1e-12 ? Eigen::VectorXd::Zero(X.rows()) : Eigen::VectorXd(X.col(j) / n);
    }
    Var o = push(std::move(out));
    nodes_[o.i].back = [this, o, x, norms] {
        const Eigen::MatrixXd& G = g(o);
        const Eigen::MatrixXd& Y = val(o);
        Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(G.rows(), G.cols());
        for (Eigen::Index j = 0; j < G.cols(); ++j) {
            if (norms[j] < 1e-12) continue;
            double yg = Y.col(j).dot(G.col(j));
            dx.col(j) = (G.col(j) - yg * Y.col(j)) / norms[j];
        }
        accum(x, dx);
    };
    return o;
}

Var Tape::softmax_rows(Var x) {
    const Eigen::MatrixXd& X = val(x);
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        Eigen::ArrayXd e = (X.row(r).array() - X.row(r).maxCoeff()).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    Var o = push(std::move(out));
    nodes_[o.i].back = [this, o, x] {
        const Eigen::MatrixXd& G = g(o);
        const Eigen::MatrixXd& Y = val(o);
        Eigen::MatrixXd dx(G.rows(), G.cols());
        for (Eigen::Index r = 0; r < G.rows(); ++r) {
            double gy = Y.row(r).dot(G.row(r));
            dx.row(r) = (Y.row(r).array() * (G.row(r).array() - gy)).matrix();
        }
        accum(x, dx);
    };
    return o;
}

Var Tape::cosine(Var a, Var b) {
    check_same_shape(val(a), val(b), "cosine");
    double na = val(a).norm(), nb = val(b).norm();
    if (na < 1e-12 || nb < 1e-12) {
        // degenerate input: similarity 0, no gradient flows
        return push(Eigen::MatrixXd::Zero(1, 1));
    }
    double c = (val(a).array() * val(b).array()).sum() / (na * nb);
    Var o = push(Eigen::MatrixXd::Constant(1, 1, c));
    nodes_[o.i].back = [this, o, a, b, na, nb, c] {
        double s = g(o)(0, 0);
        accum(a, s * (val(b) / (na * nb) - c * val(a) / (na * na)));
        accum(b, s * (val(a) / (na * nb) - c * val(b) / (nb * nb)));
    };
    return o;
}

Var Tape::convex_combine_cols(Var w, Var c, Var alpha) {
    const Eigen::MatrixXd& W = val(w);
    const Eigen::MatrixXd& C = val(c);
    check_same_shape(W, C, "convex_combine_cols");
    if (val(alpha).rows() != 1 || val(alpha).cols() != W.cols())
        throw ShapeMismatch("convex_combine_cols: alpha must be 1 x cols");
    const Eigen::RowVectorXd A = val(alpha).row(0);
    Eigen::MatrixXd out(W.rows(), W.cols());
    for (Eigen::Index j = 0; j < W.cols(); ++j)
        out.col(j) = A[j] * C.col(j) + (1.0 - A[j]) * W.col(j);
    Var o = push(std::move(out));
    nodes_[o.i].back = [this, o, w, c, alpha] {
        const Eigen::MatrixXd& G = g(o);
        const Eigen::RowVectorXd A = val(alpha).row(0);
        Eigen::MatrixXd dw(G.rows(), G.cols()), dc(G.rows(), G.cols());
        Eigen::MatrixXd da(1, G.cols());
        for (Eigen::Index j = 0; j < G.cols(); ++j) {
            dc.col(j) = A[j] * G.col(j);
            dw.col(j) = (1.0 - A[j]) * G.col(j);
            da(0, j) = G.col(j).dot(val(c).col(j) - val(w).col(j));
        }
        accum(w, dw);
        accum(c, dc);
        accum(alpha, da);
    };
    return o;
}

Var Tape::contrastive_from_gram(Var gram,
                                const std::vector<std::pair<int, int>>& numer,
                                const std::vector<std::pair<int, int>>& denom) {
    if (denom.empty()) throw InsufficientBatch("contrastive loss: empty denominator pair set");
    const Eigen::MatrixXd& G = val(gram);
    if (numer.empty()) return push(Eigen::MatrixXd::Zero(1, 1));

    double mx = -std::numeric_limits<double>::infinity();
    for (auto [i, j] : denom) mx = std::max(mx, G(i, j));
    double se = 0.0;
    for (auto [i, j] : denom) se += std::exp(G(i, j) - mx);
    double lse = mx + std::log(se);

    double loss = static_cast<double>(numer.size()) * lse;
    for (auto [i, j] : numer) loss -= G(i, j);

    Var o = push(Eigen::MatrixXd::Constant(1, 1, loss));
    nodes_[o.i].back = [this, o, gram, numer, denom, mx, se] {
        double s = g(o)(0, 0);
        const Eigen::MatrixXd& Gm = val(gram);
        Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(Gm.rows(), Gm.cols());
        double scale = s * static_cast<double>(numer.size()) / se;
        for (auto [i, j] : denom) dg(i, j) += scale * std::exp(Gm(i, j) - mx);
        for (auto [i, j] : numer) dg(i, j) -= s;
        accum(gram, dg);
    };
    return o;
}

Var Tape::softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
    const Eigen::MatrixXd& Z = val(logits);
    if (static_cast<Eigen::Index>(labels.size()) != Z.cols())
        throw ShapeMismatch("softmax_cross_entropy: label count does not match batch");
    double loss = 0.0;
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
        double mx = Z.col(j).maxCoeff();
        double lse = mx + std::log((Z.col(j).array() - mx).exp().sum());
        loss += lse - Z(labels[static_cast<size_t>(j)], j);
    }
    loss /= static_cast<double>(Z.cols());
    Var o = push(Eigen::MatrixXd::Constant(1, 1, loss));
    nodes_[o.i].back = [this, o, logits, labels] {
        const Eigen::MatrixXd& Z = val(logits);
        double s = g(o)(0, 0) / static_cast<double>(Z.cols());
        Eigen::MatrixXd dz(Z.rows(), Z.cols());
        for (Eigen::Index j = 0; j < Z.cols(); ++j) {
            Eigen::ArrayXd e = (Z.col(j).array() - Z.col(j).maxCoeff()).exp();
            dz.col(j) = (e / e.sum()).matrix() * s;
            dz(labels[static_cast<size_t>(j)], j) -= s;
        }
        accum(logits, dz);
    };
    return o;
}

void Tape::backward(Var root) {
    if (!root.valid()) throw ShapeMismatch("backward: invalid root");
    Node& r = nodes_[static_cast<size_t>(root.i)];
    if (r.val.rows() != 1 || r.val.cols() != 1)
        throw ShapeMismatch("backward: root must be scalar");
    r.grad = Eigen::MatrixXd::Constant(1, 1, 1.0);
    r.has_grad = true;
    for (int i = root.i; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.has_grad && n.back) n.back();
    }
}

} // namespace mmfl::ad
