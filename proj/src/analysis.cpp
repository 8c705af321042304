#include "mmfl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "mmfl/errors.hpp"
#include "mmfl/rng.hpp"

namespace mmfl {

namespace {

uint64_t binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    uint64_t r = 1;
    for (int i = 0; i < k; ++i) {
        if (r > (1ULL << 40)) return 1ULL << 40;  // saturate, caller only compares
        r = r * static_cast<uint64_t>(n - i) / static_cast<uint64_t>(i + 1);
    }
    return r;
}

// n_patterns distinct size-s subsets of {0..M-1}, canonically sorted within
// each subset. Enumerates exhaustively when the request covers all subsets,
// so small cases match brute-force averages exactly.
std::vector<std::vector<int>> sample_patterns(int M, int s, int n_patterns, uint64_t seed) {
    std::vector<std::vector<int>> out;
    uint64_t total = binom(M, s);
    if (static_cast<uint64_t>(n_patterns) >= total) {
        std::vector<int> comb(static_cast<size_t>(s));
        for (int i = 0; i < s; ++i) comb[static_cast<size_t>(i)] = i;
        for (;;) {
            out.push_back(comb);
            int i = s - 1;
            while (i >= 0 && comb[static_cast<size_t>(i)] == M - s + i) --i;
            if (i < 0) break;
            ++comb[static_cast<size_t>(i)];
            for (int j = i + 1; j < s; ++j)
                comb[static_cast<size_t>(j)] = comb[static_cast<size_t>(j - 1)] + 1;
        }
        return out;
    }
    Rng rng(seed);
    std::set<std::vector<int>> seen;
    while (static_cast<int>(out.size()) < n_patterns) {
        auto picks = rng.sample_without_replacement(static_cast<size_t>(M), static_cast<size_t>(s));
        std::vector<int> subset(picks.begin(), picks.end());
        std::sort(subset.begin(), subset.end());
        if (seen.insert(subset).second) out.push_back(subset);
    }
    return out;
}

// Batch with the given modalities forcibly masked on every sample (features
// zeroed, availability flags cleared); empty pattern leaves the batch as-is.
Batch mask_batch(Batch batch, const std::vector<int>& missing) {
    for (int m : missing) {
        batch.features[static_cast<size_t>(m)].setZero();
        for (auto& av : batch.available) av[static_cast<size_t>(m)] = 0;
    }
    return batch;
}

Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p = logits;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        Eigen::VectorXd c = p.col(j);
        double mx = c.maxCoeff();
        c = (c.array() - mx).exp();
        p.col(j) = c / c.sum();
    }
    return p;
}

std::vector<size_t> all_indices(const MultimodalDataset& data) {
    std::vector<size_t> idx(data.n_samples());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

} // namespace

double output_deviation(ClientModel& model, const MultimodalDataset& data,
                        int missing_size, int n_patterns, uint64_t seed) {
    const int M = static_cast<int>(data.n_modalities());
    if (missing_size < 0 || missing_size >= M)
        throw InvalidSize("output_deviation: missing_size must lie in [0, M-1]");
    if (n_patterns < 1) throw ValidationError("output_deviation: n_patterns must be >= 1");
    if (data.n_samples() == 0) throw EmptyInput("output_deviation: empty dataset");
    if (missing_size == 0) return 0.0;

    auto patterns = sample_patterns(M, missing_size, n_patterns,
                                    derive_seed(seed, "deviation_patterns"));
    const size_t chunk = 256;
    const auto idx = all_indices(data);
    double sum = 0.0;
    size_t count = 0;
    for (size_t start = 0; start < idx.size(); start += chunk) {
        size_t stop = std::min(idx.size(), start + chunk);
        std::vector<size_t> part(idx.begin() + static_cast<long>(start),
                                 idx.begin() + static_cast<long>(stop));
        Batch full = make_batch(data, part);
        Eigen::MatrixXd p_full = softmax_cols(predict_logits(model, full));
        for (const auto& pat : patterns) {
            Batch masked = mask_batch(full, pat);
            Eigen::MatrixXd p_masked = softmax_cols(predict_logits(model, masked));
            for (Eigen::Index j = 0; j < p_full.cols(); ++j) {
                sum += (p_masked.col(j) - p_full.col(j)).norm();
                ++count;
            }
        }
    }
    return sum / static_cast<double>(count);
}

double estimate_lipschitz(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& head,
                          int input_dim, int n_pairs, double radius, uint64_t seed) {
    if (n_pairs < 1) throw ValidationError("estimate_lipschitz: n_pairs must be >= 1");
    if (input_dim < 1) throw ValidationError("estimate_lipschitz: input_dim must be >= 1");
    Rng rng(derive_seed(seed, "lipschitz"));
    auto draw = [&]() {
        Eigen::VectorXd v(input_dim);
        for (int i = 0; i < input_dim; ++i) v[i] = rng.normal();
        double n = v.norm();
        if (n > 0.0) v *= radius * std::pow(rng.uniform(), 1.0 / input_dim) / n;
        return v;
    };
    double best = 0.0;
    for (int k = 0; k < n_pairs; ++k) {
        Eigen::VectorXd a = draw(), b = draw();
        double d = (a - b).norm();
        if (d < 1e-12) continue;
        double r = (head(a) - head(b)).norm() / d;
        if (r > best) best = r;
    }
    return best;
}

double bound_rhs(double mean_lds, int missing_size, int n_modalities, double mu) {
    if (missing_size < 0 || missing_size >= n_modalities)
        throw InvalidSize("bound_rhs: missing_size must lie in [0, n_modalities)");
    if (missing_size == 0) return 0.0;
    if (mean_lds < 0.0) {
        std::fprintf(stderr, "bound_rhs: clamping negative mean_lds %g to 0\n", mean_lds);
        mean_lds = 0.0;
    }
    double rem = static_cast<double>(n_modalities - missing_size);
    double m = static_cast<double>(n_modalities);
    return mu * static_cast<double>(missing_size) *
           std::sqrt(mean_lds / (rem * rem) + std::log(m * m / (rem * rem)));
}

int recommended_top_p(int tau, int M_iter, int K, int d_p) {
    if (tau < 1 || M_iter < 1 || K < 1 || d_p < 1)
        throw ValidationError("recommended_top_p: all arguments must be >= 1");
    double val = std::cbrt(static_cast<double>(tau) /
                           (static_cast<double>(M_iter) * K * d_p));
    return std::max(1, static_cast<int>(std::floor(val + 0.5)));
}

double mean_alignment_loss(ClientModel& model, const MultimodalDataset& data,
                           int missing_size, int n_patterns, int batch_size,
                           uint64_t seed) {
    const int M = static_cast<int>(data.n_modalities());
    if (missing_size < 0 || missing_size >= M)
        throw InvalidSize("mean_alignment_loss: missing_size must lie in [0, M-1]");
    if (batch_size < 2) throw InsufficientBatch("mean_alignment_loss: batch_size must be >= 2");
    auto patterns = missing_size == 0
                        ? std::vector<std::vector<int>>{{}}
                        : sample_patterns(M, missing_size, n_patterns,
                                          derive_seed(seed, "lds_patterns"));
    const auto idx = all_indices(data);
    double sum = 0.0;
    size_t count = 0;
    for (size_t start = 0; start + 1 < idx.size(); start += static_cast<size_t>(batch_size)) {
        size_t stop = std::min(idx.size(), start + static_cast<size_t>(batch_size));
        if (stop - start < 2) break;
        std::vector<size_t> part(idx.begin() + static_cast<long>(start),
                                 idx.begin() + static_cast<long>(stop));
        Batch base = make_batch(data, part);
        for (const auto& pat : patterns) {
            Batch masked = mask_batch(base, pat);
            ad::Tape tape;
            ForwardOptions opts;
            opts.force_contrastive = true;
            ForwardResult res = forward(tape, model, masked, opts);
            if (!res.contrastive_active) continue;
            sum += tape.val(res.l_ds)(0, 0);
            ++count;
        }
    }
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

BoundEstimate estimate_bound(ClientModel& model, const MultimodalDataset& data,
                             int missing_size, int n_patterns, uint64_t seed) {
    BoundEstimate est;
    est.mean_deviation = output_deviation(model, data, missing_size, n_patterns, seed);
    est.mean_lds = mean_alignment_loss(model, data, missing_size, n_patterns, 64,
                                       derive_seed(seed, "bound_lds"));

    const Eigen::MatrixXd& W = model.params.at("head.w");
    const Eigen::MatrixXd& b = model.params.at("head.b");
    auto head = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd logits = W * x + b.col(0);
        return softmax_cols(logits);
    };
    est.lipschitz_mu = estimate_lipschitz(head, static_cast<int>(W.cols()), 2000, 1.0,
                                          derive_seed(seed, "bound_mu"));
    est.rhs_value = bound_rhs(est.mean_lds, missing_size,
                              static_cast<int>(data.n_modalities()), est.lipschitz_mu);
    return est;
}

void export_embeddings(ClientModel& model, const MultimodalDataset& data,
                       const std::vector<std::vector<int>>& patterns,
                       const std::string& path) {
    if (data.n_samples() == 0) throw EmptyInput("export_embeddings: empty dataset");
    if (model.cfg.method == Method::fedavg_plain || model.cfg.method == Method::fedprox)
        throw ValidationError("export_embeddings: per-modality representations are only "
                              "defined for the pepsy-family methods");
    const int M = static_cast<int>(data.n_modalities());
    for (const auto& pat : patterns)
        for (int m : pat)
            if (m < 0 || m >= M) throw InvalidSize("export_embeddings: modality index out of range");

    std::ofstream out(path);
    if (!out) throw IOFailure("export_embeddings: cannot open '" + path + "'");
    const int rep_dim = 2 * model.cfg.embed_dim + model.cfg.d_p;
    out << "instance_id,modality,pattern_id";
    for (int c = 0; c < rep_dim; ++c) out << ",c" << c;
    out << "\n";

    char buf[32];
    const size_t chunk = 256;
    const auto idx = all_indices(data);
    for (size_t p = 0; p < patterns.size(); ++p) {
        for (size_t start = 0; start < idx.size(); start += chunk) {
            size_t stop = std::min(idx.size(), start + chunk);
            std::vector<size_t> part(idx.begin() + static_cast<long>(start),
                                     idx.begin() + static_cast<long>(stop));
            Batch batch = mask_batch(make_batch(data, part), patterns[p]);
            ad::Tape tape;
            ForwardOptions opts;
            opts.want_representations = true;
            ForwardResult res = forward(tape, model, batch, opts);
            for (size_t d = 0; d < part.size(); ++d) {
                for (int m = 0; m < M; ++m) {
                    out << part[d] << ',' << data.modalities[static_cast<size_t>(m)] << ',' << p;
                    Eigen::Index col = static_cast<Eigen::Index>(d) * M + m;
                    for (int c = 0; c < rep_dim; ++c) {
                        std::snprintf(buf, sizeof buf, "%.10g", res.c_reps(c, col));
                        out << ',' << buf;
                    }
                    out << '\n';
                }
            }
        }
    }
    if (!out) throw IOFailure("export_embeddings: write to '" + path + "' failed");
}

} // namespace mmfl
