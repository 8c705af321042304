#include "mmfl/train.hpp"

#include "mmfl/rng.hpp"

namespace mmfl {

TrainReport local_train(ClientModel& model, const MultimodalDataset& data,
                        const TrainOptions& opts) {
    if (data.n_samples() == 0) throw EmptyClient("local_train: client has no data");
    if (opts.epochs < 1) throw ValidationError("local_train: epochs must be >= 1");
    if (opts.batch_size < 1) throw ValidationError("local_train: batch_size must be >= 1");

    const bool prox = opts.fedprox_mu > 0.0 && opts.global_params != nullptr;
    TrainReport report;
    std::vector<size_t> order(data.n_samples());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        Rng rng(derive_seed(opts.seed, "epoch_shuffle", static_cast<uint64_t>(epoch)));
        rng.shuffle(order);

        LossBreakdown acc;
        int n_batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opts.batch_size)) {
            size_t stop = std::min(order.size(), start + static_cast<size_t>(opts.batch_size));
            std::vector<size_t> idx(order.begin() + static_cast<long>(start),
                                    order.begin() + static_cast<long>(stop));
            Batch batch = make_batch(data, idx);

            ad::Tape tape;
            ForwardOptions fo;
            fo.training = true;
            fo.lambda = opts.lambda;
            fo.eta = opts.eta;
            fo.update_selection_counts = true;
            ForwardResult res = forward(tape, model, batch, fo);
            const bool plain = model.cfg.method == Method::fedavg_plain ||
                               model.cfg.method == Method::fedprox;
            if (!plain && !res.contrastive_active) ++report.skipped_contrastive_batches;

            acc.l_task += tape.sval(res.l_task);
            acc.l_ds += tape.sval(res.l_ds);
            acc.l_rc += tape.sval(res.l_rc);
            acc.relevance += tape.sval(res.relevance);
            acc.total += tape.sval(res.loss);
            ++n_batches;

            if (opts.learning_rate == 0.0) continue;  // keep parameters bit-identical
            tape.backward(res.loss);
            for (auto& [name, value] : model.params) {
                ad::Var v = res.param_vars.at(name);
                if (tape.has_grad(v)) value.noalias() -= opts.learning_rate * tape.grad(v);
                if (prox) {
                    auto it = opts.global_params->find(name);
                    if (it == opts.global_params->end())
                        throw NameMismatch("fedprox: global parameters miss tensor '" + name + "'");
                    value.noalias() -=
                        (opts.learning_rate * opts.fedprox_mu) * (value - it->second);
                }
            }
            if (res.profile_var.valid() && tape.has_grad(res.profile_var))
                model.profile.controls.noalias() -= opts.learning_rate * tape.grad(res.profile_var);
        }
        if (n_batches > 0) {
            acc.l_task /= n_batches;
            acc.l_ds /= n_batches;
            acc.l_rc /= n_batches;
            acc.relevance /= n_batches;
            acc.total /= n_batches;
        }
        report.per_epoch.push_back(acc);
    }
    return report;
}

} // namespace mmfl
