#include "mmfl/model.hpp"

#include <cmath>

#include "mmfl/fusion.hpp"
#include "mmfl/representation.hpp"
#include "mmfl/rng.hpp"

namespace mmfl {

Method parse_method(const std::string& name) {
    if (name == "pepsy") return Method::pepsy;
    if (name == "pepsy_np") return Method::pepsy_np;
    if (name == "pepsy_nr") return Method::pepsy_nr;
    if (name == "fedavg_plain") return Method::fedavg_plain;
    if (name == "fedprox") return Method::fedprox;
    throw ValidationError("unknown method '" + name +
                          "' (expected pepsy, pepsy_np, pepsy_nr, fedavg_plain, fedprox)");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::pepsy: return "pepsy";
        case Method::pepsy_np: return "pepsy_np";
        case Method::pepsy_nr: return "pepsy_nr";
        case Method::fedavg_plain: return "fedavg_plain";
        case Method::fedprox: return "fedprox";
    }
    return "?";
}

bool method_uses_profile(Method m) {
    return m == Method::pepsy || m == Method::pepsy_nr;
}

void ModelConfig::validate() const {
    if (feature_lens.size() < 2) throw ValidationError("model needs at least 2 modalities");
    for (int l : feature_lens)
        if (l < 1) throw ValidationError("feature lengths must be >= 1");
    if (n_classes < 1) throw ValidationError("n_classes must be >= 1");
    if (embed_dim < 1 || d_p < 1) throw ValidationError("embed_dim and d_p must be >= 1");
    if (tau < 1 || kappa < 1 || kappa > tau)
        throw InvalidKappa("need 1 <= kappa <= tau");
}

Batch make_batch(const MultimodalDataset& ds, const std::vector<size_t>& indices) {
    Batch b;
    const size_t m_count = ds.n_modalities();
    b.features.reserve(m_count);
    for (size_t m = 0; m < m_count; ++m) {
        Eigen::MatrixXd f(ds.features[m].rows(), static_cast<Eigen::Index>(indices.size()));
        for (size_t j = 0; j < indices.size(); ++j)
            f.col(static_cast<Eigen::Index>(j)) = ds.features[m].col(static_cast<Eigen::Index>(indices[j]));
        b.features.push_back(std::move(f));
    }
    b.labels.reserve(indices.size());
    b.available.reserve(indices.size());
    for (size_t j : indices) {
        b.labels.push_back(ds.labels.at(j));
        std::vector<uint8_t> av(m_count, 1);
        if (ds.availability)
            for (size_t m = 0; m < m_count; ++m) av[m] = ds.availability->at(j, m);
        b.available.push_back(std::move(av));
    }
    return b;
}

namespace {

Eigen::MatrixXd init_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
    return m;
}

} // namespace

void ClientModel::init(uint64_t seed) {
    cfg.validate();
    params.clear();
    buffers.clear();
    Rng rng(derive_seed(seed, "model_init"));
    const int C = cfg.embed_dim;
    const int M = cfg.n_modalities();
    const bool plain = cfg.method == Method::fedavg_plain || cfg.method == Method::fedprox;

    for (int i = 0; i < M; ++i) {
        const std::string p = "enc" + std::to_string(i) + ".";
        const int L = cfg.feature_lens[static_cast<size_t>(i)];
        params[p + "w1"] = init_matrix(rng, 2 * C, L, L);
        params[p + "b1"] = Eigen::MatrixXd::Zero(2 * C, 1);
        params[p + "w2"] = init_matrix(rng, C, 2 * C, 2 * C);
        params[p + "b2"] = Eigen::MatrixXd::Zero(C, 1);
        params[p + "gamma"] = Eigen::MatrixXd::Ones(C, 1);
        params[p + "beta"] = Eigen::MatrixXd::Zero(C, 1);
        buffers[p + "running_mean"] = Eigen::MatrixXd::Zero(C, 1);
        buffers[p + "running_var"] = Eigen::MatrixXd::Ones(C, 1);
    }

    if (plain) {
        params["head.w"] = init_matrix(rng, cfg.n_classes, M * C, M * C);
        params["head.b"] = Eigen::MatrixXd::Zero(cfg.n_classes, 1);
        profile = DataMissingProfile{};
        return;
    }

    const int rep_dim = 2 * C + cfg.d_p;  // [w_mod ; w_ins ; w_mis]
    params["wmod"] = init_matrix(rng, C, M, C);
    if (cfg.method != Method::pepsy_np) {
        params["query.w"] = init_matrix(rng, cfg.d_p, 2 * C, 2 * C);
        params["query.b"] = Eigen::MatrixXd::Zero(cfg.d_p, 1);
    }
    if (cfg.method != Method::pepsy_nr) {
        params["recon.w"] = init_matrix(rng, C, rep_dim, rep_dim);
        params["recon.b"] = Eigen::MatrixXd::Zero(C, 1);
        params["gate.w"] = init_matrix(rng, 2 * rep_dim, 1, 2 * rep_dim);
        params["gate.b"] = Eigen::MatrixXd::Zero(1, 1);
    }
    params["head.w"] = init_matrix(rng, cfg.n_classes, M * rep_dim, M * rep_dim);
    params["head.b"] = Eigen::MatrixXd::Zero(cfg.n_classes, 1);

    if (method_uses_profile(cfg.method))
        profile = make_profile(cfg.tau, cfg.d_p, derive_seed(seed, "pool"));
    else
        profile = DataMissingProfile{};
}

void ClientModel::adopt_global_profile(const DataMissingProfile& global, uint64_t pad_seed) {
    if (!method_uses_profile(cfg.method)) return;
    if (global.d_p() != cfg.d_p)
        throw DimensionMismatch("global profile d_p does not match model");
    int keep = global.tau();
    int local_tau = std::max(cfg.tau, keep);
    DataMissingProfile fresh = make_profile(local_tau, cfg.d_p, derive_seed(pad_seed, "pool_pad"));
    fresh.controls.leftCols(keep) = global.controls;
    fresh.reset_counts();
    profile = std::move(fresh);
}

namespace {

struct EncodeOut {
    ad::Var h;  // C x B
};

EncodeOut encode_modality(ad::Tape& tape, ClientModel& model,
                          std::map<std::string, ad::Var>& pv, int i,
                          const Eigen::MatrixXd& x, const std::vector<uint8_t>& col_mask,
                          bool training) {
    const std::string p = "enc" + std::to_string(i) + ".";
    ad::Var X = tape.leaf(x);
    ad::Var z1 = tape.tanh_(tape.add_col_broadcast(tape.matmul(pv[p + "w1"], X), pv[p + "b1"]));
    ad::Var pre = tape.add_col_broadcast(tape.matmul(pv[p + "w2"], z1), pv[p + "b2"]);

    Eigen::VectorXd run_mu = model.buffers[p + "running_mean"].col(0);
    Eigen::VectorXd run_var = model.buffers[p + "running_var"].col(0);
    size_t n_active = 0;
    for (uint8_t m : col_mask) n_active += (m != 0);

    ad::Var bn;
    if (training && n_active >= 1) {
        Eigen::VectorXd mu, var;
        bn = tape.batchnorm_train(pre, col_mask, model.cfg.bn_eps, &mu, &var);
        const double mom = model.cfg.bn_momentum;
        model.buffers[p + "running_mean"].col(0) = (1.0 - mom) * run_mu + mom * mu;
        model.buffers[p + "running_var"].col(0) = (1.0 - mom) * run_var + mom * var;
    } else {
        Eigen::VectorXd inv_std = (run_var.array() + model.cfg.bn_eps).sqrt().inverse();
        bn = tape.normalize_fixed(pre, run_mu, inv_std);
    }
    return {tape.scale_shift(bn, pv[p + "gamma"], pv[p + "beta"])};
}

void check_batch(const ClientModel& model, const Batch& batch) {
    const int M = model.cfg.n_modalities();
    if (static_cast<int>(batch.features.size()) != M)
        throw ShapeMismatch("batch modality count does not match model");
    if (batch.size() == 0) throw InsufficientBatch("empty batch");
    for (int i = 0; i < M; ++i) {
        if (batch.features[static_cast<size_t>(i)].rows() !=
            model.cfg.feature_lens[static_cast<size_t>(i)])
            throw ShapeMismatch("modality " + std::to_string(i) + " feature length mismatch");
        if (batch.features[static_cast<size_t>(i)].cols() !=
            static_cast<Eigen::Index>(batch.size()))
            throw ShapeMismatch("batch column count mismatch");
    }
    for (const auto& av : batch.available)
        if (static_cast<int>(av.size()) != M)
            throw ShapeMismatch("availability row length mismatch");
}

} // namespace

ForwardResult forward(ad::Tape& tape, ClientModel& model, const Batch& batch,
                      const ForwardOptions& opts) {
    check_batch(model, batch);
    const int M = model.cfg.n_modalities();
    const int B = static_cast<int>(batch.size());
    const int C = model.cfg.embed_dim;
    const bool plain =
        model.cfg.method == Method::fedavg_plain || model.cfg.method == Method::fedprox;

    ForwardResult res;
    for (const auto& [name, m] : model.params) res.param_vars[name] = tape.leaf(m);
    auto& pv = res.param_vars;

    // Per-modality availability column masks. The plain baselines are
    // missing-unaware by design: they see zero-filled inputs as regular data
    // and never consult the availability flags.
    std::vector<std::vector<uint8_t>> col_mask(static_cast<size_t>(M),
                                               std::vector<uint8_t>(static_cast<size_t>(B), 1));
    if (!plain)
        for (int d = 0; d < B; ++d)
            for (int i = 0; i < M; ++i)
                col_mask[static_cast<size_t>(i)][static_cast<size_t>(d)] =
                    batch.available[static_cast<size_t>(d)][static_cast<size_t>(i)];

    std::vector<ad::Var> H(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i)
        H[static_cast<size_t>(i)] =
            encode_modality(tape, model, pv, i, batch.features[static_cast<size_t>(i)],
                            col_mask[static_cast<size_t>(i)], opts.training)
                .h;

    ad::Var zero = tape.scalar(0.0);
    res.l_ds = zero;
    res.l_rc = zero;
    res.relevance = zero;

    if (plain) {
        ad::Var hin = tape.concat_rows(H);
        ad::Var logits = tape.add_col_broadcast(tape.matmul(pv["head.w"], hin), pv["head.b"]);
        res.l_task = tape.softmax_cross_entropy(logits, batch.labels);
        res.loss = res.l_task;
        res.logits = tape.val(logits);
        return res;
    }

    // data-specific contrastive loss over available encoder outputs
    ad::Var hcat = tape.concat_cols(H);  // C x (M*B); col index = i*B + d
    if ((opts.training || opts.force_contrastive) && B >= 2) {
        std::vector<std::pair<int, int>> numer, denom;
        std::vector<int> avail_cols;
        for (int i = 0; i < M; ++i)
            for (int d = 0; d < B; ++d)
                if (col_mask[static_cast<size_t>(i)][static_cast<size_t>(d)])
                    avail_cols.push_back(i * B + d);
        for (int a : avail_cols) {
            for (int b : avail_cols) {
                if (a == b) continue;
                if (a % B == b % B) numer.emplace_back(a, b);
                else denom.emplace_back(a, b);
            }
        }
        if (!denom.empty()) {
            ad::Var tilde = tape.colwise_l2_normalize(hcat);
            res.l_ds = tape.contrastive_from_gram(tape.matmul_tn(tilde, tilde), numer, denom);
            res.contrastive_active = true;
        }
    }

    // data-specific features w_ins per (instance, modality)
    std::vector<std::vector<ad::Var>> h_slice(static_cast<size_t>(B),
                                              std::vector<ad::Var>(static_cast<size_t>(M)));
    std::vector<std::vector<ad::Var>> w_ins(static_cast<size_t>(B),
                                            std::vector<ad::Var>(static_cast<size_t>(M)));
    for (int d = 0; d < B; ++d) {
        std::vector<ad::Var> present;
        for (int i = 0; i < M; ++i) {
            if (col_mask[static_cast<size_t>(i)][static_cast<size_t>(d)]) {
                h_slice[static_cast<size_t>(d)][static_cast<size_t>(i)] =
                    tape.slice_col(H[static_cast<size_t>(i)], d);
                present.push_back(h_slice[static_cast<size_t>(d)][static_cast<size_t>(i)]);
            }
        }
        ad::Var mean;
        for (int i = 0; i < M; ++i) {
            if (col_mask[static_cast<size_t>(i)][static_cast<size_t>(d)]) {
                w_ins[static_cast<size_t>(d)][static_cast<size_t>(i)] =
                    h_slice[static_cast<size_t>(d)][static_cast<size_t>(i)];
            } else if (!present.empty()) {
                if (!mean.valid()) mean = tape.average(present);
                w_ins[static_cast<size_t>(d)][static_cast<size_t>(i)] = mean;
            } else {
                // every modality of this instance is missing: fall back to the
                // encoded zero-input features so the pipeline stays defined
                w_ins[static_cast<size_t>(d)][static_cast<size_t>(i)] =
                    tape.slice_col(H[static_cast<size_t>(i)], d);
            }
        }
    }

    std::vector<ad::Var> w_mod(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) w_mod[static_cast<size_t>(i)] = tape.slice_col(pv["wmod"], i);

    // missing-pattern features via the profile
    const bool use_profile = method_uses_profile(model.cfg.method);
    std::vector<std::vector<ad::Var>> w_mis(static_cast<size_t>(B),
                                            std::vector<ad::Var>(static_cast<size_t>(M)));
    res.selections.assign(static_cast<size_t>(B), std::vector<std::vector<int>>(static_cast<size_t>(M)));

    if (use_profile) {
        res.profile_var = tape.leaf(model.profile.controls);
        std::vector<ad::Var> psi_slice(static_cast<size_t>(model.profile.tau()));
        auto psi = [&](int p) {
            if (!psi_slice[static_cast<size_t>(p)].valid())
                psi_slice[static_cast<size_t>(p)] = tape.slice_col(res.profile_var, p);
            return psi_slice[static_cast<size_t>(p)];
        };

        std::vector<ad::Var> qin;
        qin.reserve(static_cast<size_t>(B * M));
        for (int d = 0; d < B; ++d)
            for (int i = 0; i < M; ++i)
                qin.push_back(tape.concat_rows({w_mod[static_cast<size_t>(i)],
                                                w_ins[static_cast<size_t>(d)][static_cast<size_t>(i)]}));
        ad::Var Q = tape.add_col_broadcast(tape.matmul(pv["query.w"], tape.concat_cols(qin)),
                                           pv["query.b"]);

        std::vector<ad::Var> cos_terms;
        cos_terms.reserve(static_cast<size_t>(B * M * model.cfg.kappa));
        for (int d = 0; d < B; ++d) {
            for (int i = 0; i < M; ++i) {
                const int idx = d * M + i;
                std::vector<int> sel;
                if (opts.frozen_selections) {
                    sel = (*opts.frozen_selections)[static_cast<size_t>(d)][static_cast<size_t>(i)];
                } else {
                    sel = select_top_kappa(tape.val(Q).col(idx), model.profile.controls,
                                           model.cfg.kappa);
                }
                if (opts.update_selection_counts)
                    for (int p : sel) model.profile.selection_counts[static_cast<size_t>(p)]++;
                res.selections[static_cast<size_t>(d)][static_cast<size_t>(i)] = sel;

                ad::Var q = tape.slice_col(Q, idx);
                std::vector<ad::Var> chosen;
                chosen.reserve(sel.size());
                for (int p : sel) {
                    chosen.push_back(psi(p));
                    cos_terms.push_back(tape.cosine(q, chosen.back()));
                }
                w_mis[static_cast<size_t>(d)][static_cast<size_t>(i)] = tape.average(chosen);
            }
        }
        res.relevance = cos_terms.empty() ? zero : tape.sum_scalars(cos_terms);
    } else {
        // pepsy_np: no profile; w_mis is a zero block and R stays 0
        ad::Var zero_mis = tape.leaf(Eigen::MatrixXd::Zero(model.cfg.d_p, 1));
        for (int d = 0; d < B; ++d)
            for (int i = 0; i < M; ++i) w_mis[static_cast<size_t>(d)][static_cast<size_t>(i)] = zero_mis;
    }

    // final per-(instance, modality) representations, instance-major columns
    std::vector<ad::Var> w_cols;
    w_cols.reserve(static_cast<size_t>(B * M));
    for (int d = 0; d < B; ++d)
        for (int i = 0; i < M; ++i)
            w_cols.push_back(tape.concat_rows({w_mod[static_cast<size_t>(i)],
                                               w_ins[static_cast<size_t>(d)][static_cast<size_t>(i)],
                                               w_mis[static_cast<size_t>(d)][static_cast<size_t>(i)]}));
    ad::Var w_all = tape.concat_cols(w_cols);  // (2C + d_p) x (B*M)

    ad::Var c_final;
    if (model.cfg.method == Method::pepsy_nr) {
        c_final = w_all;  // reconfiguration signal omitted: fusion and gate bypassed
    } else {
        ad::Var w_hat = tape.colwise_l2_normalize(
            tape.add_col_broadcast(tape.matmul(pv["recon.w"], w_all), pv["recon.b"]));
        if ((opts.training || opts.force_contrastive) && B >= 2) {
            std::vector<std::pair<int, int>> numer, denom;
            for (int a = 0; a < B * M; ++a) {
                for (int b = 0; b < B * M; ++b) {
                    if (a == b) continue;
                    if (a / M == b / M) numer.emplace_back(a, b);
                    else denom.emplace_back(a, b);
                }
            }
            res.l_rc = tape.contrastive_from_gram(tape.matmul_tn(w_hat, w_hat), numer, denom);
        }
        std::vector<ad::Var> fused;
        fused.reserve(static_cast<size_t>(B));
        for (int d = 0; d < B; ++d) {
            ad::Var wd = tape.slice_cols(w_all, d * M, M);
            ad::Var whatd = tape.slice_cols(w_hat, d * M, M);
            fused.push_back(fuse(tape, wd, whatd, model.cfg.fusion_temperature));
        }
        ad::Var c_hat = tape.concat_cols(fused);
        c_final = gate_combine(tape, w_all, c_hat, pv["gate.w"], pv["gate.b"]).combined;
    }

    ad::Var hin = tape.stack_col_groups(c_final, M);
    ad::Var logits = tape.add_col_broadcast(tape.matmul(pv["head.w"], hin), pv["head.b"]);
    res.l_task = tape.softmax_cross_entropy(logits, batch.labels);
    res.loss = total_loss(tape, res.l_task, res.l_ds, res.l_rc, res.relevance,
                          opts.lambda, opts.eta);
    res.logits = tape.val(logits);
    if (opts.want_representations) res.c_reps = tape.val(c_final);
    return res;
}

Eigen::MatrixXd predict_logits(ClientModel& model, const Batch& batch) {
    ad::Tape tape;
    ForwardOptions opts;
    opts.training = false;
    return forward(tape, model, batch, opts).logits;
}

} // namespace mmfl
