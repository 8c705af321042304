#pragma once
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmfl/autodiff.hpp"
#include "mmfl/dataset.hpp"
#include "mmfl/params.hpp"
#include "mmfl/profile.hpp"

namespace mmfl {

enum class Method { pepsy, pepsy_np, pepsy_nr, fedavg_plain, fedprox };

Method parse_method(const std::string& name);
std::string method_name(Method m);
bool method_uses_profile(Method m);

struct ModelConfig {
    std::vector<int> feature_lens;  // per modality
    int n_classes = 2;
    int embed_dim = 16;      // C
    int d_p = 16;            // control dimension (defaults to C)
    int tau = 16;
    int kappa = 4;
    Method method = Method::pepsy;
    double bn_eps = 1e-8;
    double bn_momentum = 0.1;
    double fusion_temperature = 1.0;

    int n_modalities() const { return static_cast<int>(feature_lens.size()); }
    void validate() const;
};

// One mini-batch, columns are samples. Masked modality entries are zero and the
// availability flags (not the zeros) drive the method logic.
struct Batch {
    std::vector<Eigen::MatrixXd> features;        // per modality: feat_len x B
    std::vector<int> labels;                      // size B
    std::vector<std::vector<uint8_t>> available;  // [sample][modality]

    size_t size() const { return labels.size(); }
};

Batch make_batch(const MultimodalDataset& ds, const std::vector<size_t>& indices);

// frozen top-kappa choices: [sample][modality] -> control indices
using Selections = std::vector<std::vector<std::vector<int>>>;

struct ClientModel {
    ModelConfig cfg;
    ParamMap params;   // trainable tensors
    ParamMap buffers;  // batch-norm running statistics, aggregated but not trained
    DataMissingProfile profile;

    void init(uint64_t seed);

    // Grows the pool to the broadcast global profile: keeps all global controls,
    // pads with fresh random controls up to the configured tau if fewer.
    void adopt_global_profile(const DataMissingProfile& global, uint64_t pad_seed);
};

struct ForwardResult {
    ad::Var loss, l_task, l_ds, l_rc, relevance;
    Eigen::MatrixXd logits;   // n_classes x B
    Selections selections;
    Eigen::MatrixXd c_reps;   // 3C x (B*M) instance-major final representations (profile methods)
    std::map<std::string, ad::Var> param_vars;  // leaves for the trainable tensors
    ad::Var profile_var;                        // leaf for the control pool
    bool contrastive_active = false;
};

struct ForwardOptions {
    bool training = false;
    double lambda = 0.0;
    double eta = 0.0;
    const Selections* frozen_selections = nullptr;  // bypass top-kappa search
    bool update_selection_counts = false;
    bool want_representations = false;
    bool force_contrastive = false;  // compute L_ds / L_rc even in eval mode
};

// Builds the full differentiable pipeline for one batch:
// encode -> impute -> query/select -> assemble -> project -> fuse -> gate -> predict.
// In training mode batch-norm uses masked batch statistics and updates the
// running buffers; contrastive terms are skipped (zero) for batches < 2.
ForwardResult forward(ad::Tape& tape, ClientModel& model, const Batch& batch,
                      const ForwardOptions& opts);

// Convenience numeric inference: logits for a dataset slice in eval mode.
Eigen::MatrixXd predict_logits(ClientModel& model, const Batch& batch);

} // namespace mmfl
