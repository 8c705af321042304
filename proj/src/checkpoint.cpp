#include "mmfl/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmfl/errors.hpp"

namespace fs = std::filesystem;

namespace mmfl {

void save_checkpoint(const Checkpoint& ckpt, const std::string& directory) {
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw IOFailure("checkpoint: cannot create '" + directory + "': " + ec.message());

    ParamMap archive = ckpt.state.params;
    for (const auto& [name, m] : ckpt.state.buffers) archive[name] = m;
    save_params(archive, directory + "/params.txt");
    if (method_uses_profile(ckpt.state.model_cfg.method))
        save_profile(ckpt.state.profile, directory + "/profile.txt");

    const ModelConfig& mc = ckpt.state.model_cfg;
    std::ofstream meta(directory + "/meta.txt");
    if (!meta) throw IOFailure("checkpoint: cannot write '" + directory + "/meta.txt'");
    meta << "method=" << method_name(mc.method) << "\n";
    meta << "feature_lens=";
    for (size_t i = 0; i < mc.feature_lens.size(); ++i)
        meta << (i ? "," : "") << mc.feature_lens[i];
    meta << "\n";
    meta << "n_classes=" << mc.n_classes << "\n";
    meta << "embed_dim=" << mc.embed_dim << "\n";
    meta << "d_p=" << mc.d_p << "\n";
    meta << "tau=" << mc.tau << "\n";
    meta << "kappa=" << mc.kappa << "\n";
    meta << "fusion_temperature=" << mc.fusion_temperature << "\n";
    meta << "round=" << ckpt.state.round << "\n";
    meta << "lambda=" << ckpt.lambda << "\n";
    meta << "eta=" << ckpt.eta << "\n";
    if (!meta) throw IOFailure("checkpoint: write to '" + directory + "/meta.txt' failed");
}

Checkpoint load_checkpoint(const std::string& directory) {
    if (!fs::exists(directory + "/meta.txt"))
        throw ValidationError("checkpoint: missing '" + directory + "/meta.txt'");

    Checkpoint ckpt;
    ModelConfig mc;
    std::ifstream meta(directory + "/meta.txt");
    std::string line;
    int lineno = 0;
    while (std::getline(meta, line)) {
        ++lineno;
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("checkpoint: bad meta line " + std::to_string(lineno) +
                              " in '" + directory + "'");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        try {
            if (key == "method") mc.method = parse_method(value);
            else if (key == "feature_lens") {
                std::stringstream ss(value);
                std::string item;
                while (std::getline(ss, item, ',')) mc.feature_lens.push_back(std::stoi(item));
            }
            else if (key == "n_classes") mc.n_classes = std::stoi(value);
            else if (key == "embed_dim") mc.embed_dim = std::stoi(value);
            else if (key == "d_p") mc.d_p = std::stoi(value);
            else if (key == "tau") mc.tau = std::stoi(value);
            else if (key == "kappa") mc.kappa = std::stoi(value);
            else if (key == "fusion_temperature") mc.fusion_temperature = std::stod(value);
            else if (key == "round") ckpt.state.round = std::stoi(value);
            else if (key == "lambda") ckpt.lambda = std::stod(value);
            else if (key == "eta") ckpt.eta = std::stod(value);
            else throw FormatError("checkpoint: unknown meta key '" + key + "'");
        } catch (const FormatError&) {
            throw;
        } catch (...) {
            throw FormatError("checkpoint: bad value for '" + key + "' in '" + directory + "'");
        }
    }
    mc.validate();
    ckpt.state.model_cfg = mc;

    // split the flat archive back into trainable tensors and buffers using a
    // freshly initialized model's name sets
    ClientModel proto;
    proto.cfg = mc;
    proto.init(0);
    ParamMap archive = load_params(directory + "/params.txt");
    for (const auto& [name, m] : proto.params) {
        auto it = archive.find(name);
        if (it == archive.end())
            throw NameMismatch("checkpoint: archive misses tensor '" + name + "'");
        ckpt.state.params[name] = it->second;
    }
    for (const auto& [name, m] : proto.buffers) {
        auto it = archive.find(name);
        if (it == archive.end())
            throw NameMismatch("checkpoint: archive misses buffer '" + name + "'");
        ckpt.state.buffers[name] = it->second;
    }
    if (method_uses_profile(mc.method))
        ckpt.state.profile = load_profile(directory + "/profile.txt");
    return ckpt;
}

} // namespace mmfl
