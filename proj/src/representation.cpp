#include "mmfl/representation.hpp"

#include <set>

namespace mmfl {

std::vector<ad::Var> impute(ad::Tape& tape, const std::vector<ad::Var>& features,
                            const std::vector<uint8_t>& available) {
    if (features.size() != available.size())
        throw ShapeMismatch("impute: feature / availability size mismatch");
    std::vector<ad::Var> present;
    for (size_t i = 0; i < features.size(); ++i)
        if (available[i]) present.push_back(features[i]);
    if (present.empty()) throw AllMissing("impute: every modality is missing");

    std::vector<ad::Var> out(features.size());
    ad::Var mean;  // built lazily, shared by all missing slots
    for (size_t i = 0; i < features.size(); ++i) {
        if (available[i]) {
            out[i] = features[i];
        } else {
            if (!mean.valid()) mean = tape.average(present);
            out[i] = mean;
        }
    }
    return out;
}

ad::Var contrastive_alignment_loss(ad::Tape& tape, ad::Var stacked,
                                   const std::vector<int>& instance_ids) {
    const Eigen::Index n = tape.val(stacked).cols();
    if (static_cast<size_t>(n) != instance_ids.size())
        throw ShapeMismatch("contrastive_alignment_loss: id count mismatch");
    std::set<int> distinct(instance_ids.begin(), instance_ids.end());
    if (distinct.size() < 2)
        throw InsufficientBatch("contrastive loss needs at least 2 instances in the batch");

    ad::Var tilde = tape.colwise_l2_normalize(stacked);
    ad::Var gram = tape.matmul_tn(tilde, tilde);

    std::vector<std::pair<int, int>> numer, denom;
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            if (instance_ids[static_cast<size_t>(a)] == instance_ids[static_cast<size_t>(b)])
                numer.emplace_back(a, b);
            else
                denom.emplace_back(a, b);
        }
    }
    return tape.contrastive_from_gram(gram, numer, denom);
}

} // namespace mmfl
