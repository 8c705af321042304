#include "mmfl/federation.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mmfl/rng.hpp"

namespace mmfl {

void FederationConfig::validate(int tau) const {
    if (n_clients < 1) throw ValidationError("n_clients must be >= 1");
    if (clients_per_round < 1 || clients_per_round > n_clients)
        throw InvalidM("clients_per_round must lie in [1, n_clients]");
    if (rounds < 0) throw ValidationError("rounds must be >= 0");
    if (local_epochs < 1) throw ValidationError("local_epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (lambda < 0.0 || eta < 0.0) throw ValidationError("lambda and eta must be >= 0");
    if (!(merge_threshold > -1.0 && merge_threshold < 1.0))
        throw ValidationError("merge_threshold must lie in (-1, 1)");
    if (top_p < 0 || (top_p > 0 && top_p > tau))
        throw InvalidP("top_p must lie in [1, tau] (or 0 to disable)");
    if (workers < 1) throw ValidationError("workers must be >= 1");
    if (method == Method::fedprox && fedprox_mu < 0.0)
        throw ValidationError("fedprox_mu must be >= 0");
    test_stats.validate();
}

ClientModel GlobalState::instantiate() const {
    ClientModel m;
    m.cfg = model_cfg;
    m.params = params;
    m.buffers = buffers;
    m.profile = profile;
    return m;
}

std::vector<int> sample_clients(int total, int m, int round_index, uint64_t seed) {
    if (m < 1 || m > total) throw InvalidM("sample_clients: m must lie in [1, total]");
    Rng rng(derive_seed(seed, "client_sample", static_cast<uint64_t>(round_index)));
    auto picks = rng.sample_without_replacement(static_cast<size_t>(total), static_cast<size_t>(m));
    std::vector<int> out(picks.begin(), picks.end());
    std::sort(out.begin(), out.end());
    return out;
}

ParamMap fedavg(const std::vector<ParamMap>& param_sets, const std::vector<double>& weights) {
    if (param_sets.empty()) throw EmptyInput("fedavg: no parameter sets");
    if (param_sets.size() != weights.size())
        throw ShapeMismatch("fedavg: weight count does not match archive count");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ZeroWeights("fedavg: weights must be non-negative");
        total += w;
    }
    if (total <= 0.0) throw ZeroWeights("fedavg: weights must not all be zero");

    const ParamMap& first = param_sets.front();
    for (const auto& ps : param_sets) {
        if (ps.size() != first.size()) throw NameMismatch("fedavg: tensor name sets differ");
        for (const auto& [name, m] : ps) {
            auto it = first.find(name);
            if (it == first.end()) throw NameMismatch("fedavg: unknown tensor '" + name + "'");
            if (it->second.rows() != m.rows() || it->second.cols() != m.cols())
                throw ShapeMismatch("fedavg: shape mismatch for tensor '" + name + "'");
        }
    }

    ParamMap out;
    for (const auto& [name, m] : first)
        out[name] = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    for (size_t k = 0; k < param_sets.size(); ++k) {
        double w = weights[k] / total;
        if (w == 0.0) continue;
        for (const auto& [name, m] : param_sets[k]) out[name] += w * m;
    }
    return out;
}

double fedprox_local_loss(double base_loss, const ParamMap& local_params,
                          const ParamMap& global_params, double mu_prox) {
    if (local_params.size() != global_params.size())
        throw NameMismatch("fedprox_local_loss: parameter name sets differ");
    double penalty = 0.0;
    for (const auto& [name, m] : local_params) {
        auto it = global_params.find(name);
        if (it == global_params.end())
            throw NameMismatch("fedprox_local_loss: missing global tensor '" + name + "'");
        penalty += (m - it->second).squaredNorm();
    }
    return base_loss + 0.5 * mu_prox * penalty;
}

namespace {

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}

double centroid_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double na = a.norm(), nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return a.dot(b) / (na * nb);
}

} // namespace

DataMissingProfile aggregate_profiles(const std::vector<DataMissingProfile>& client_profiles,
                                      double merge_threshold, int tau_max) {
    if (client_profiles.empty()) throw EmptyInput("aggregate_profiles: no profiles uploaded");
    if (tau_max < 1) throw ValidationError("aggregate_profiles: tau_max must be >= 1");
    const int d_p = client_profiles.front().d_p();
    for (const auto& p : client_profiles)
        if (p.d_p() != d_p)
            throw DimensionMismatch("aggregate_profiles: control dimensions differ across clients");

    struct Cluster {
        Eigen::VectorXd centroid;
        double count;
    };
    std::vector<Cluster> clusters;
    for (const auto& p : client_profiles)
        for (int c = 0; c < p.tau(); ++c)
            clusters.push_back({p.controls.col(c), 1.0});

    // canonical order makes the greedy merge independent of client ordering
    std::sort(clusters.begin(), clusters.end(),
              [](const Cluster& a, const Cluster& b) { return lex_less(a.centroid, b.centroid); });

    for (;;) {
        double best = -2.0;
        size_t bi = 0, bj = 0;
        for (size_t i = 0; i < clusters.size(); ++i) {
            for (size_t j = i + 1; j < clusters.size(); ++j) {
                double c = centroid_cosine(clusters[i].centroid, clusters[j].centroid);
                if (c > best) { best = c; bi = i; bj = j; }
            }
        }
        if (clusters.size() < 2 || best < merge_threshold) break;
        double w = clusters[bi].count + clusters[bj].count;
        clusters[bi].centroid =
            (clusters[bi].count * clusters[bi].centroid + clusters[bj].count * clusters[bj].centroid) / w;
        clusters[bi].count = w;
        clusters.erase(clusters.begin() + static_cast<long>(bj));
    }

    if (static_cast<int>(clusters.size()) > tau_max) {
        std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
            if (a.count != b.count) return a.count > b.count;
            return lex_less(a.centroid, b.centroid);
        });
        clusters.resize(static_cast<size_t>(tau_max));
    }
    std::sort(clusters.begin(), clusters.end(),
              [](const Cluster& a, const Cluster& b) { return lex_less(a.centroid, b.centroid); });

    DataMissingProfile out;
    out.controls.resize(d_p, static_cast<Eigen::Index>(clusters.size()));
    for (size_t i = 0; i < clusters.size(); ++i)
        out.controls.col(static_cast<Eigen::Index>(i)) = clusters[i].centroid;
    out.reset_counts();
    return out;
}

GlobalState init_global(const ModelConfig& model_cfg, uint64_t seed) {
    GlobalState st;
    st.model_cfg = model_cfg;
    ClientModel proto;
    proto.cfg = model_cfg;
    proto.init(derive_seed(seed, "global_init"));
    st.params = std::move(proto.params);
    st.buffers = std::move(proto.buffers);
    st.profile = std::move(proto.profile);
    return st;
}

double evaluate_global(const GlobalState& state, const MultimodalDataset& test_set,
                       const MissingStats& test_stats, uint64_t seed, int workers) {
    if (test_set.n_samples() == 0) throw EmptyTestSet("evaluate_global: empty test set");
    MissingMask mask = make_missing_mask(test_set.n_samples(), test_set.n_modalities(),
                                         test_stats, derive_seed(seed, "eval_mask"));
    MultimodalDataset masked = apply_mask(test_set, mask);

    const size_t n = masked.n_samples();
    const size_t chunk = 256;
    const size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<size_t> correct_per_chunk(n_chunks, 0);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(workers) if (workers > 1)
#endif
    for (size_t c = 0; c < n_chunks; ++c) {
        ClientModel model = state.instantiate();  // eval touches running stats copies only
        size_t start = c * chunk, stop = std::min(n, start + chunk);
        std::vector<size_t> idx;
        for (size_t i = start; i < stop; ++i) idx.push_back(i);
        Batch batch = make_batch(masked, idx);
        Eigen::MatrixXd logits = predict_logits(model, batch);
        size_t correct = 0;
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            Eigen::Index best = 0;
            for (Eigen::Index r = 1; r < logits.rows(); ++r)
                if (logits(r, j) > logits(best, j)) best = r;  // ties -> lowest index
            if (static_cast<int>(best) == batch.labels[static_cast<size_t>(j)]) ++correct;
        }
        correct_per_chunk[c] = correct;
    }
    size_t correct = 0;
    for (size_t c : correct_per_chunk) correct += c;
    return static_cast<double>(correct) / static_cast<double>(n);
}

RoundRecord run_round(GlobalState& state, const std::vector<MultimodalDataset>& client_data,
                      const FederationConfig& config, const MultimodalDataset& test_set,
                      const FederationHooks* hooks) {
    const int round = state.round;
    std::vector<int> sampled =
        sample_clients(config.n_clients, config.clients_per_round, round, config.seed);

    const size_t m = sampled.size();
    std::vector<ParamMap> uploads(m);
    std::vector<double> weights(m);
    std::vector<DataMissingProfile> profile_uploads(m);
    std::vector<TrainReport> reports(m);
    const bool use_profile = method_uses_profile(config.method);

    // Clients are independent; any execution order yields identical uploads,
    // and aggregation below walks them in sorted client order.
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(config.workers) if (config.workers > 1)
#endif
    for (size_t s = 0; s < m; ++s) {
        const int k = sampled[s];
        const MultimodalDataset& shard = client_data.at(static_cast<size_t>(k));

        ClientModel model = state.instantiate();
        if (use_profile)
            model.adopt_global_profile(
                state.profile,
                derive_seed(config.seed, "profile_pad", static_cast<uint64_t>(round),
                            static_cast<uint64_t>(k)));
        if (use_profile) model.profile.reset_counts();

        TrainOptions to;
        to.epochs = config.local_epochs;
        to.batch_size = config.batch_size;
        to.learning_rate = config.learning_rate;
        to.lambda = config.lambda;
        to.eta = config.eta;
        to.seed = derive_seed(config.seed, "local_train", static_cast<uint64_t>(round),
                              static_cast<uint64_t>(k));
        if (config.method == Method::fedprox) {
            to.fedprox_mu = config.fedprox_mu;
            to.global_params = &state.params;
        }
        reports[s] = local_train(model, shard, to);

        ParamMap archive = model.params;
        for (const auto& [name, v] : model.buffers) archive[name] = v;
        uploads[s] = std::move(archive);
        weights[s] = config.uniform_weights ? 1.0 : static_cast<double>(shard.n_samples());
        if (use_profile) {
            if (config.top_p > 0 && config.top_p < model.profile.tau())
                profile_uploads[s] = top_p_compress(model.profile, config.top_p);
            else
                profile_uploads[s] = model.profile;
        }
    }

    if (hooks && hooks->on_epoch) {
        for (size_t s = 0; s < m; ++s)
            for (size_t e = 0; e < reports[s].per_epoch.size(); ++e)
                hooks->on_epoch(round, sampled[s], static_cast<int>(e), reports[s].per_epoch[e]);
    }

    ParamMap merged = fedavg(uploads, weights);
    for (auto& [name, v] : state.buffers) { v = merged.at(name); merged.erase(name); }
    state.params = std::move(merged);
    if (use_profile) {
        int tau_max = config.tau_max > 0 ? config.tau_max : 4 * state.model_cfg.tau;
        state.profile = aggregate_profiles(profile_uploads, config.merge_threshold, tau_max);
    }
    state.round = round + 1;

    RoundRecord rec;
    rec.round = round;
    rec.sampled = sampled;
    rec.profile_size = use_profile ? state.profile.tau() : 0;
    double n_entries = 0.0;
    for (const auto& rep : reports) {
        for (const auto& e : rep.per_epoch) {
            rec.mean_l_task += e.l_task;
            rec.mean_l_ds += e.l_ds;
            rec.mean_l_rc += e.l_rc;
            rec.mean_relevance += e.relevance;
            n_entries += 1.0;
        }
    }
    if (n_entries > 0) {
        rec.mean_l_task /= n_entries;
        rec.mean_l_ds /= n_entries;
        rec.mean_l_rc /= n_entries;
        rec.mean_relevance /= n_entries;
    }
    rec.accuracy = evaluate_global(state, test_set, config.test_stats,
                                   derive_seed(config.seed, "eval", static_cast<uint64_t>(round)),
                                   config.workers);
    return rec;
}

std::vector<RoundRecord> run_federation(GlobalState& state,
                                        const std::vector<MultimodalDataset>& client_data,
                                        const FederationConfig& config,
                                        const MultimodalDataset& test_set,
                                        const FederationHooks* hooks) {
    config.validate(state.model_cfg.tau);
    if (static_cast<int>(client_data.size()) != config.n_clients)
        throw ValidationError("run_federation: client shard count does not match n_clients");

    std::vector<RoundRecord> records;
    records.reserve(static_cast<size_t>(config.rounds));
    for (int t = 0; t < config.rounds; ++t) {
        records.push_back(run_round(state, client_data, config, test_set, hooks));
        if (hooks && hooks->on_checkpoint && config.checkpoint_every > 0 &&
            (t + 1) % config.checkpoint_every == 0)
            hooks->on_checkpoint(t, state);
    }
    return records;
}

} // namespace mmfl
