// Compares wall-clock time of one federated round with serial vs parallel
// client training. Clients are independent within a round, so the parallel
// path distributes them across OpenMP workers; results must match bit for bit.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "mmfl/dataset.hpp"
#include "mmfl/federation.hpp"
#include "mmfl/rng.hpp"

using namespace mmfl;
using clock_type = std::chrono::steady_clock;

namespace {

double run_once(int workers, int n_clients, int rounds,
                const std::vector<MultimodalDataset>& shards,
                const MultimodalDataset& test_set, GlobalState state) {
    FederationConfig fc;
    fc.n_clients = n_clients;
    fc.clients_per_round = n_clients;
    fc.rounds = rounds;
    fc.local_epochs = 2;
    fc.batch_size = 32;
    fc.lambda = 0.01;
    fc.eta = 0.01;
    fc.seed = 7;
    fc.workers = workers;
    fc.test_stats = MissingStats{0.5, 0.5};
    auto t0 = clock_type::now();
    run_federation(state, shards, fc, test_set);
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

} // namespace

int main(int argc, char** argv) {
    const int n_clients = argc > 1 ? std::atoi(argv[1]) : 8;
    const int rounds = argc > 2 ? std::atoi(argv[2]) : 3;
    const int max_workers = argc > 3 ? std::atoi(argv[3]) : 4;

    ModelConfig cfg;
    cfg.feature_lens = {32, 32, 32, 32};
    cfg.n_classes = 5;
    cfg.embed_dim = 16;
    cfg.d_p = 16;
    cfg.tau = 16;
    cfg.kappa = 4;

    auto full = generate_synthetic(2000, 4, 32, 5, 1.0, 11);
    auto [train, test] = train_test_split(full, 0.2, 13);
    auto part = partition_iid(train.n_samples(), static_cast<size_t>(n_clients), 17);
    std::vector<MultimodalDataset> shards;
    for (int k = 0; k < n_clients; ++k) {
        auto shard = train.subset(part.assignments[static_cast<size_t>(k)]);
        auto mask = make_missing_mask(shard.n_samples(), shard.n_modalities(),
                                      MissingStats{0.5, 0.5},
                                      derive_seed(19, "bench_mask", static_cast<uint64_t>(k)));
        shards.push_back(apply_mask(shard, mask));
    }

    auto state = init_global(cfg, 23);
    std::printf("clients=%d rounds=%d\n", n_clients, rounds);
    double serial = run_once(1, n_clients, rounds, shards, test, state);
    std::printf("workers=1  %8.3f s (baseline)\n", serial);
    for (int w = 2; w <= max_workers; w *= 2) {
        double t = run_once(w, n_clients, rounds, shards, test, state);
        std::printf("workers=%-2d %8.3f s (speedup %.2fx)\n", w, t, serial / t);
    }
    return 0;
}
