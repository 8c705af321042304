#pragma once
#include <cstdint>
#include <vector>

#include "mmfl/model.hpp"

namespace mmfl {

struct LossBreakdown {
    double l_task = 0.0;
    double l_ds = 0.0;
    double l_rc = 0.0;
    double relevance = 0.0;
    double total = 0.0;
};

struct TrainOptions {
    int epochs = 3;
    int batch_size = 32;
    double learning_rate = 0.01;
    double lambda = 0.1;
    double eta = 0.1;
    uint64_t seed = 0;
    // FedProx proximal pull toward the last broadcast parameters (0 = off)
    double fedprox_mu = 0.0;
    const ParamMap* global_params = nullptr;
};

struct TrainReport {
    std::vector<LossBreakdown> per_epoch;  // mean over that epoch's batches
    int skipped_contrastive_batches = 0;   // batches too small for L_ds / L_rc
};

// Mini-batch SGD over the full pipeline on one client's masked shard.
// Deterministic given opts.seed. Updates model parameters, buffers, profile
// controls and selection counts in place.
TrainReport local_train(ClientModel& model, const MultimodalDataset& data,
                        const TrainOptions& opts);

} // namespace mmfl
