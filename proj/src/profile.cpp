#include "mmfl/profile.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mmfl/rng.hpp"

namespace mmfl {

DataMissingProfile make_profile(int tau, int d_p, uint64_t seed) {
    if (tau < 1 || d_p < 1) throw ValidationError("profile needs tau >= 1 and d_p >= 1");
    DataMissingProfile p;
    p.controls.resize(d_p, tau);
    Rng rng(derive_seed(seed, "profile"));
    double bound = 1.0 / std::sqrt(static_cast<double>(d_p));
    for (int c = 0; c < tau; ++c)
        for (int r = 0; r < d_p; ++r)
            p.controls(r, c) = rng.uniform(-bound, bound);
    p.reset_counts();
    return p;
}

double relevance(const Eigen::VectorXd& q, const Eigen::VectorXd& psi, bool* degenerate) {
    if (q.size() != psi.size()) throw ShapeMismatch("relevance: dimension mismatch");
    double nq = q.norm(), np = psi.norm();
    if (nq < 1e-12 || np < 1e-12) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    if (degenerate) *degenerate = false;
    return q.dot(psi) / (nq * np);
}

std::vector<int> select_top_kappa(const Eigen::VectorXd& q,
                                  const Eigen::MatrixXd& controls, int kappa) {
    int tau = static_cast<int>(controls.cols());
    if (kappa < 1 || kappa > tau)
        throw InvalidKappa("kappa must lie in [1, tau], got " + std::to_string(kappa));
    std::vector<std::pair<double, int>> scored(static_cast<size_t>(tau));
    for (int p = 0; p < tau; ++p)
        scored[static_cast<size_t>(p)] = {relevance(q, controls.col(p)), p};
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> out(static_cast<size_t>(kappa));
    for (int i = 0; i < kappa; ++i) out[static_cast<size_t>(i)] = scored[static_cast<size_t>(i)].second;
    return out;
}

double relevance_regularizer(const Eigen::MatrixXd& batch_queries,
                             const DataMissingProfile& profile, int kappa) {
    if (batch_queries.cols() == 0) return 0.0;
    double r = 0.0;
    for (Eigen::Index j = 0; j < batch_queries.cols(); ++j) {
        Eigen::VectorXd q = batch_queries.col(j);
        for (int p : select_top_kappa(q, profile.controls, kappa))
            r += relevance(q, profile.controls.col(p));
    }
    return r;
}

Eigen::VectorXd missing_pattern_feature(const DataMissingProfile& profile,
                                        const std::vector<int>& selected) {
    if (selected.empty()) throw EmptySelection("missing_pattern_feature: empty selection");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(profile.d_p());
    for (int p : selected) out += profile.controls.col(p);
    return out / static_cast<double>(selected.size());
}

DataMissingProfile top_p_compress(const DataMissingProfile& profile, int p) {
    if (p < 1 || p > profile.tau())
        throw InvalidP("top_p_compress: p must lie in [1, tau], got " + std::to_string(p));
    std::vector<int> order(static_cast<size_t>(profile.tau()));
    for (int i = 0; i < profile.tau(); ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        auto ca = profile.selection_counts[static_cast<size_t>(a)];
        auto cb = profile.selection_counts[static_cast<size_t>(b)];
        if (ca != cb) return ca > cb;
        return a < b;
    });
    DataMissingProfile out;
    out.controls.resize(profile.d_p(), p);
    out.selection_counts.resize(static_cast<size_t>(p));
    for (int i = 0; i < p; ++i) {
        out.controls.col(i) = profile.controls.col(order[static_cast<size_t>(i)]);
        out.selection_counts[static_cast<size_t>(i)] =
            profile.selection_counts[static_cast<size_t>(order[static_cast<size_t>(i)])];
    }
    return out;
}

void save_profile(const DataMissingProfile& profile, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IOFailure("cannot open profile file for writing: " + path);
    out << profile.tau() << ' ' << profile.d_p() << '\n';
    char buf[48];
    for (int c = 0; c < profile.tau(); ++c) {
        for (int r = 0; r < profile.d_p(); ++r) {
            std::snprintf(buf, sizeof(buf), "%.17g", profile.controls(r, c));
            out << (r ? " " : "") << buf;
        }
        out << '\n';
    }
    for (int c = 0; c < profile.tau(); ++c)
        out << (c ? " " : "") << profile.selection_counts[static_cast<size_t>(c)];
    out << '\n';
    if (!out) throw IOFailure("write failed: " + path);
}

DataMissingProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOFailure("cannot open profile file: " + path);
    int tau, d_p;
    if (!(in >> tau >> d_p) || tau < 1 || d_p < 1)
        throw FormatError(path + ": malformed profile header");
    DataMissingProfile p;
    p.controls.resize(d_p, tau);
    for (int c = 0; c < tau; ++c)
        for (int r = 0; r < d_p; ++r)
            if (!(in >> p.controls(r, c)))
                throw FormatError(path + ": truncated control " + std::to_string(c));
    p.selection_counts.resize(static_cast<size_t>(tau));
    for (int c = 0; c < tau; ++c)
        if (!(in >> p.selection_counts[static_cast<size_t>(c)]))
            throw FormatError(path + ": truncated counts line");
    return p;
}

} // namespace mmfl
