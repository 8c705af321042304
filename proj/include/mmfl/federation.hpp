#pragma once
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "mmfl/masking.hpp"
#include "mmfl/model.hpp"
#include "mmfl/train.hpp"

namespace mmfl {

struct FederationConfig {
    int n_clients = 8;          // K
    int clients_per_round = 8;  // m
    int rounds = 10;            // T
    int local_epochs = 3;       // E
    int batch_size = 32;        // B
    double learning_rate = 0.01;
    double lambda = 0.1;
    double eta = 0.1;
    Method method = Method::pepsy;
    double fedprox_mu = 0.01;
    double merge_threshold = 0.8;
    int tau_max = 0;            // 0 -> 4 * tau
    int top_p = 0;              // 0 -> upload full profiles
    bool uniform_weights = false;
    int checkpoint_every = 0;   // 0 -> final checkpoint only (via CLI)
    int workers = 1;
    uint64_t seed = 0;
    MissingStats test_stats;

    void validate(int tau) const;
};

struct RoundRecord {
    int round = 0;
    double accuracy = 0.0;
    double mean_l_task = 0.0, mean_l_ds = 0.0, mean_l_rc = 0.0, mean_relevance = 0.0;
    int profile_size = 0;
    std::vector<int> sampled;
};

struct GlobalState {
    ModelConfig model_cfg;
    ParamMap params;   // trainable tensors
    ParamMap buffers;  // batch-norm running statistics
    DataMissingProfile profile;
    int round = 0;

    ClientModel instantiate() const;
};

// Uniform sample without replacement, deterministic given (seed, round_index).
std::vector<int> sample_clients(int total, int m, int round_index, uint64_t seed);

// Per-tensor weighted average, weights normalized to sum 1.
ParamMap fedavg(const std::vector<ParamMap>& param_sets, const std::vector<double>& weights);

double fedprox_local_loss(double base_loss, const ParamMap& local_params,
                          const ParamMap& global_params, double mu_prox);

// Greedy agglomerative surrogate for the paper's non-parametric profile
// aggregation: pool uploaded controls, repeatedly merge the most cosine-similar
// centroid pair while similarity >= merge_threshold (count-weighted means),
// then keep the tau_max largest clusters. Controls are canonically sorted
// first, so the result is invariant to client ordering.
DataMissingProfile aggregate_profiles(const std::vector<DataMissingProfile>& client_profiles,
                                      double merge_threshold, int tau_max);

GlobalState init_global(const ModelConfig& model_cfg, uint64_t seed);

// Masks the test set with fresh seed-derived masks, runs inference in eval
// mode, returns top-1 accuracy (argmax ties -> lowest class index).
double evaluate_global(const GlobalState& state, const MultimodalDataset& test_set,
                       const MissingStats& test_stats, uint64_t seed, int workers = 1);

struct FederationHooks {
    // (round, client, epoch, losses)
    std::function<void(int, int, int, const LossBreakdown&)> on_epoch;
    std::function<void(int, const GlobalState&)> on_checkpoint;
};

RoundRecord run_round(GlobalState& state, const std::vector<MultimodalDataset>& client_data,
                      const FederationConfig& config, const MultimodalDataset& test_set,
                      const FederationHooks* hooks = nullptr);

// Executes T rounds over pre-masked client shards. Fully deterministic given
// the config seed; independent of client completion order.
std::vector<RoundRecord> run_federation(GlobalState& state,
                                        const std::vector<MultimodalDataset>& client_data,
                                        const FederationConfig& config,
                                        const MultimodalDataset& test_set,
                                        const FederationHooks* hooks = nullptr);

} // namespace mmfl
