#include "mmfl/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mmfl/errors.hpp"

namespace mmfl {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw FormatError("config: invalid value '" + value + "' for key '" + key + "'");
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        long long r = std::stoll(v, &pos);
        if (pos != v.size()) bad_value(key, v);
        return r;
    } catch (const FormatError&) {
        throw;
    } catch (...) {
        bad_value(key, v);
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) bad_value(key, v);
        return r;
    } catch (const FormatError&) {
        throw;
    } catch (...) {
        bad_value(key, v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v);
}

// "pm/ps" pair lists, e.g. "0.0/0.0, 0.8/0.8"
std::vector<MissingStats> to_stats_list(const std::string& key, const std::string& v) {
    std::vector<MissingStats> out;
    for (const auto& item : split(v, ',')) {
        if (item.empty()) continue;
        auto parts = split(item, '/');
        if (parts.size() != 2) bad_value(key, item);
        out.push_back({to_double(key, parts[0]), to_double(key, parts[1])});
    }
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
    static const std::map<std::string, Setter> table = {
        {"seed", [](auto& c, auto& k, auto& v) { c.seed = static_cast<uint64_t>(to_int(k, v)); }},
        {"dataset.n_samples", [](auto& c, auto& k, auto& v) { c.n_samples = static_cast<int>(to_int(k, v)); }},
        {"dataset.n_modalities", [](auto& c, auto& k, auto& v) { c.n_modalities = static_cast<int>(to_int(k, v)); }},
        {"dataset.feature_len", [](auto& c, auto& k, auto& v) { c.feature_len = static_cast<int>(to_int(k, v)); }},
        {"dataset.n_classes", [](auto& c, auto& k, auto& v) { c.n_classes = static_cast<int>(to_int(k, v)); }},
        {"dataset.class_separation", [](auto& c, auto& k, auto& v) { c.class_separation = to_double(k, v); }},
        {"dataset.test_fraction", [](auto& c, auto& k, auto& v) { c.test_fraction = to_double(k, v); }},
        {"dataset.dir", [](auto& c, auto&, auto& v) { c.dataset_dir = v; }},
        {"partition.scheme", [](auto& c, auto& k, auto& v) {
             if (v != "iid" && v != "dirichlet") bad_value(k, v);
             c.partition = v;
         }},
        {"partition.alpha", [](auto& c, auto& k, auto& v) { c.dirichlet_alpha = to_double(k, v); }},
        {"model.embed_dim", [](auto& c, auto& k, auto& v) { c.embed_dim = static_cast<int>(to_int(k, v)); }},
        {"model.d_p", [](auto& c, auto& k, auto& v) { c.d_p = static_cast<int>(to_int(k, v)); }},
        {"model.tau", [](auto& c, auto& k, auto& v) { c.tau = static_cast<int>(to_int(k, v)); }},
        {"model.kappa", [](auto& c, auto& k, auto& v) { c.kappa = static_cast<int>(to_int(k, v)); }},
        {"model.fusion_temperature", [](auto& c, auto& k, auto& v) { c.fusion_temperature = to_double(k, v); }},
        {"federation.n_clients", [](auto& c, auto& k, auto& v) { c.fed.n_clients = static_cast<int>(to_int(k, v)); }},
        {"federation.clients_per_round", [](auto& c, auto& k, auto& v) { c.fed.clients_per_round = static_cast<int>(to_int(k, v)); }},
        {"federation.rounds", [](auto& c, auto& k, auto& v) { c.fed.rounds = static_cast<int>(to_int(k, v)); }},
        {"federation.local_epochs", [](auto& c, auto& k, auto& v) { c.fed.local_epochs = static_cast<int>(to_int(k, v)); }},
        {"federation.batch_size", [](auto& c, auto& k, auto& v) { c.fed.batch_size = static_cast<int>(to_int(k, v)); }},
        {"federation.learning_rate", [](auto& c, auto& k, auto& v) { c.fed.learning_rate = to_double(k, v); }},
        {"federation.lambda", [](auto& c, auto& k, auto& v) { c.fed.lambda = to_double(k, v); }},
        {"federation.eta", [](auto& c, auto& k, auto& v) { c.fed.eta = to_double(k, v); }},
        {"federation.method", [](auto& c, auto& k, auto& v) {
             try { c.fed.method = parse_method(v); } catch (const ValidationError&) { bad_value(k, v); }
         }},
        {"federation.fedprox_mu", [](auto& c, auto& k, auto& v) { c.fed.fedprox_mu = to_double(k, v); }},
        {"federation.merge_threshold", [](auto& c, auto& k, auto& v) { c.fed.merge_threshold = to_double(k, v); }},
        {"federation.tau_max", [](auto& c, auto& k, auto& v) { c.fed.tau_max = static_cast<int>(to_int(k, v)); }},
        {"federation.top_p", [](auto& c, auto& k, auto& v) { c.fed.top_p = static_cast<int>(to_int(k, v)); }},
        {"federation.uniform_weights", [](auto& c, auto& k, auto& v) { c.fed.uniform_weights = to_bool(k, v); }},
        {"federation.checkpoint_every", [](auto& c, auto& k, auto& v) { c.fed.checkpoint_every = static_cast<int>(to_int(k, v)); }},
        {"federation.workers", [](auto& c, auto& k, auto& v) { c.fed.workers = static_cast<int>(to_int(k, v)); }},
        {"mask.train_pm", [](auto& c, auto& k, auto& v) { c.train_stats.p_m = to_double(k, v); }},
        {"mask.train_ps", [](auto& c, auto& k, auto& v) { c.train_stats.p_s = to_double(k, v); }},
        {"mask.test_pm", [](auto& c, auto& k, auto& v) { c.test_stats.p_m = to_double(k, v); }},
        {"mask.test_ps", [](auto& c, auto& k, auto& v) { c.test_stats.p_s = to_double(k, v); }},
        {"grid.train_stats", [](auto& c, auto& k, auto& v) { c.grid_train_stats = to_stats_list(k, v); }},
        {"grid.test_stats", [](auto& c, auto& k, auto& v) { c.grid_test_stats = to_stats_list(k, v); }},
        {"analyze.lambdas", [](auto& c, auto& k, auto& v) {
             c.analyze_lambdas.clear();
             for (const auto& item : split(v, ','))
                 if (!item.empty()) c.analyze_lambdas.push_back(to_double(k, item));
         }},
        {"analyze.checkpoints", [](auto& c, auto&, auto& v) {
             c.analyze_checkpoints.clear();
             for (const auto& item : split(v, ','))
                 if (!item.empty()) c.analyze_checkpoints.push_back(item);
         }},
        {"analyze.missing_sizes", [](auto& c, auto& k, auto& v) {
             c.analyze_missing_sizes.clear();
             for (const auto& item : split(v, ','))
                 if (!item.empty()) c.analyze_missing_sizes.push_back(static_cast<int>(to_int(k, item)));
         }},
        {"analyze.n_patterns", [](auto& c, auto& k, auto& v) { c.analyze_n_patterns = static_cast<int>(to_int(k, v)); }},
        {"analyze.embed_patterns", [](auto& c, auto&, auto& v) { c.embed_patterns = v; }},
    };
    return table;
}

void apply_pair(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                const std::string& where) {
    const auto& table = key_table();
    auto it = table.find(key);
    if (it == table.end())
        throw FormatError("config: unknown key '" + key + "'" + where);
    it->second(cfg, key, value);
}

} // namespace

ModelConfig ExperimentConfig::model_config(const std::vector<int>& feature_lens,
                                           int classes) const {
    ModelConfig mc;
    mc.feature_lens = feature_lens;
    mc.n_classes = classes;
    mc.embed_dim = embed_dim;
    mc.d_p = d_p > 0 ? d_p : embed_dim;
    mc.tau = tau;
    mc.kappa = kappa;
    mc.method = fed.method;
    mc.fusion_temperature = fusion_temperature;
    mc.validate();
    return mc;
}

void ExperimentConfig::validate() const {
    if (n_samples < 1) throw ValidationError("dataset.n_samples must be >= 1");
    if (n_modalities < 1) throw ValidationError("dataset.n_modalities must be >= 1");
    if (feature_len < 1) throw ValidationError("dataset.feature_len must be >= 1");
    if (n_classes < 1) throw ValidationError("dataset.n_classes must be >= 1");
    if (class_separation <= 0.0) throw ValidationError("dataset.class_separation must be > 0");
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw ValidationError("dataset.test_fraction must lie in [0, 1)");
    if (dirichlet_alpha <= 0.0) throw ValidationError("partition.alpha must be > 0");
    if (analyze_n_patterns < 1) throw ValidationError("analyze.n_patterns must be >= 1");
    train_stats.validate();
    test_stats.validate();
    fed.validate(tau);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("config: cannot open '" + path + "'");
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = line;
        size_t hash = s.find('#');
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw FormatError("config: missing '=' at " + path + ":" + std::to_string(lineno));
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        apply_pair(cfg, key, value, " at " + path + ":" + std::to_string(lineno));
    }
    return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw FormatError("override '" + assignment + "' is not of the form key=value");
    apply_pair(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)),
               " (command-line override)");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [key, setter] : key_table()) keys.push_back(key);
    return keys;  // std::map iteration is already sorted
}

std::vector<std::vector<int>> parse_embed_patterns(const std::string& text,
                                                   int n_modalities) {
    std::vector<std::vector<int>> out;
    for (const auto& group : split(text, ';')) {
        if (group.empty()) continue;
        std::vector<int> pat;
        if (group != "-") {
            for (const auto& item : split(group, ',')) {
                if (item.empty()) continue;
                int m = static_cast<int>(to_int("analyze.embed_patterns", item));
                if (m < 0 || m >= n_modalities)
                    throw FormatError("analyze.embed_patterns: modality index " + item +
                                      " out of range");
                pat.push_back(m);
            }
        }
        out.push_back(std::move(pat));
    }
    if (out.empty()) out.push_back({});
    return out;
}

} // namespace mmfl
