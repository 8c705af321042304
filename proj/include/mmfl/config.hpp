#pragma once
#include <string>
#include <vector>

#include "mmfl/federation.hpp"
#include "mmfl/masking.hpp"

namespace mmfl {

// Full experiment description, loaded from a key=value config file plus
// dotted-path overrides. Unknown keys are rejected with the offending key and
// line named.
struct ExperimentConfig {
    uint64_t seed = 0;

    // dataset
    int n_samples = 2000;
    int n_modalities = 4;
    int feature_len = 32;
    int n_classes = 5;
    double class_separation = 1.0;
    double test_fraction = 0.2;
    std::string dataset_dir;  // load from disk when set, else generate

    // partitioning
    std::string partition = "iid";  // iid | dirichlet
    double dirichlet_alpha = 0.5;

    // model
    int embed_dim = 16;
    int d_p = 0;  // 0 -> embed_dim
    int tau = 16;
    int kappa = 4;
    double fusion_temperature = 1.0;

    // federation (method/lambda/eta/... live here)
    FederationConfig fed;

    // masking
    MissingStats train_stats{0.0, 0.0};
    MissingStats test_stats{0.0, 0.0};

    // grid command: "pm/ps" pairs, comma separated
    std::vector<MissingStats> grid_train_stats;
    std::vector<MissingStats> grid_test_stats;

    // analyze command
    std::vector<double> analyze_lambdas;
    std::vector<std::string> analyze_checkpoints;  // paired with analyze_lambdas
    std::vector<int> analyze_missing_sizes;
    int analyze_n_patterns = 8;
    // embeddings.csv patterns: ';' between patterns, ',' within, '-' = full
    std::string embed_patterns = "-";

    ModelConfig model_config(const std::vector<int>& feature_lens, int classes) const;
    void validate() const;
};

// Parses a key=value file ('#' comments, blank lines allowed). Throws
// FormatError naming the key and line on unknown keys or bad values.
ExperimentConfig load_config(const std::string& path);

// Applies one "key=value" override (same keys as the file).
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Every recognized config key, sorted (for --help and diagnostics).
std::vector<std::string> config_keys();

std::vector<std::vector<int>> parse_embed_patterns(const std::string& text,
                                                   int n_modalities);

} // namespace mmfl
