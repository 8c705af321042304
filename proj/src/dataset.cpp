#include "mmfl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mmfl/rng.hpp"

namespace fs = std::filesystem;

namespace mmfl {

namespace {

size_t round_count(double frac, size_t total) {
    return static_cast<size_t>(std::floor(frac * static_cast<double>(total) + 0.5));
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void MultimodalDataset::validate() const {
    if (modalities.size() != features.size())
        throw InvalidShape("modality name count does not match feature matrix count");
    for (const auto& f : features)
        if (static_cast<size_t>(f.cols()) != labels.size())
            throw InvalidShape("modality sample count does not match label count");
    for (int y : labels)
        if (y < 0 || y >= n_classes)
            throw InvalidShape("label out of range [0, n_classes)");
}

MultimodalDataset MultimodalDataset::subset(const std::vector<size_t>& indices) const {
    MultimodalDataset out;
    out.modalities = modalities;
    out.n_classes = n_classes;
    out.labels.reserve(indices.size());
    for (size_t i : indices) out.labels.push_back(labels.at(i));
    for (const auto& f : features) {
        Eigen::MatrixXd m(f.rows(), static_cast<Eigen::Index>(indices.size()));
        for (size_t j = 0; j < indices.size(); ++j)
            m.col(static_cast<Eigen::Index>(j)) = f.col(static_cast<Eigen::Index>(indices[j]));
        out.features.push_back(std::move(m));
    }
    if (availability) {
        MissingMask mask(indices.size(), availability->n_modalities());
        for (size_t j = 0; j < indices.size(); ++j)
            for (size_t m = 0; m < availability->n_modalities(); ++m)
                mask.set(j, m, availability->at(indices[j], m));
        out.availability = std::move(mask);
    }
    return out;
}

MultimodalDataset generate_synthetic(size_t n_samples, size_t n_modalities,
                                     size_t feature_len, size_t n_classes,
                                     double class_separation, uint64_t seed) {
    if (n_samples < 1 || n_modalities < 2 || feature_len < 1 || n_classes < 1)
        throw InvalidShape("generate_synthetic: counts must be >= 1 and n_modalities >= 2");
    if (!(class_separation > 0.0))
        throw InvalidShape("generate_synthetic: class_separation must be positive");

    const size_t latent = feature_len;
    Rng rng(derive_seed(seed, "synthetic"));

    // Latent prototype per class, sharing a common nonzero offset. Raw
    // signals in practice are not zero-centered, so zero-filling a missing
    // modality must land off the data manifold rather than at its mean.
    Eigen::VectorXd offset(static_cast<Eigen::Index>(latent));
    for (Eigen::Index i = 0; i < offset.size(); ++i) offset[i] = 2.0 * rng.normal();
    std::vector<Eigen::VectorXd> protos(n_classes);
    for (auto& p : protos) {
        p.resize(static_cast<Eigen::Index>(latent));
        for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = rng.normal();
        p += offset;
    }

    // one fixed random linear view per modality
    std::vector<Eigen::MatrixXd> views(n_modalities);
    for (auto& a : views) {
        a.resize(static_cast<Eigen::Index>(feature_len), static_cast<Eigen::Index>(latent));
        for (Eigen::Index r = 0; r < a.rows(); ++r)
            for (Eigen::Index c = 0; c < a.cols(); ++c)
                a(r, c) = rng.normal() / std::sqrt(static_cast<double>(latent));
    }

    MultimodalDataset ds;
    ds.n_classes = static_cast<int>(n_classes);
    ds.labels.resize(n_samples);
    for (size_t d = 0; d < n_samples; ++d) ds.labels[d] = static_cast<int>(d % n_classes);

    const double noise_scale = 1.0 / class_separation;
    for (size_t m = 0; m < n_modalities; ++m) {
        ds.modalities.push_back("mod" + std::to_string(m));
        Eigen::MatrixXd f(static_cast<Eigen::Index>(feature_len),
                          static_cast<Eigen::Index>(n_samples));
        for (size_t d = 0; d < n_samples; ++d) {
            Eigen::VectorXd x = views[m] * protos[static_cast<size_t>(ds.labels[d])];
            for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += noise_scale * rng.normal();
            f.col(static_cast<Eigen::Index>(d)) = x;
        }
        ds.features.push_back(std::move(f));
    }
    ds.validate();
    return ds;
}

std::pair<MultimodalDataset, MultimodalDataset>
train_test_split(const MultimodalDataset& dataset, double test_fraction, uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("test_fraction must lie in (0,1)");
    Rng rng(derive_seed(seed, "split"));

    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < dataset.n_samples(); ++i) by_class[dataset.labels[i]].push_back(i);

    std::vector<size_t> train_idx, test_idx;
    for (auto& [cls, idx] : by_class) {
        (void)cls;
        rng.shuffle(idx);
        size_t n_test = round_count(test_fraction, idx.size());
        for (size_t j = 0; j < idx.size(); ++j)
            (j < n_test ? test_idx : train_idx).push_back(idx[j]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {dataset.subset(train_idx), dataset.subset(test_idx)};
}

Partition partition_iid(size_t n_samples, size_t n_clients, uint64_t seed) {
    if (n_clients < 1) throw ValidationError("partition_iid: need at least one client");
    Rng rng(derive_seed(seed, "partition_iid"));
    std::vector<size_t> idx(n_samples);
    for (size_t i = 0; i < n_samples; ++i) idx[i] = i;
    rng.shuffle(idx);

    Partition p;
    p.assignments.resize(n_clients);
    size_t base = n_samples / n_clients, rem = n_samples % n_clients, pos = 0;
    for (size_t k = 0; k < n_clients; ++k) {
        size_t take = base + (k < rem ? 1 : 0);
        for (size_t j = 0; j < take; ++j) p.assignments[k].push_back(idx[pos++]);
        std::sort(p.assignments[k].begin(), p.assignments[k].end());
    }
    return p;
}

namespace {

// largest-remainder apportionment of `total` into shares proportional to props
std::vector<size_t> apportion(const std::vector<double>& props, size_t total) {
    size_t k = props.size();
    std::vector<size_t> counts(k);
    std::vector<std::pair<double, size_t>> rema(k);
    size_t assigned = 0;
    for (size_t i = 0; i < k; ++i) {
        double exact = props[i] * static_cast<double>(total);
        counts[i] = static_cast<size_t>(std::floor(exact));
        assigned += counts[i];
        rema[i] = {exact - std::floor(exact), i};
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t j = 0; assigned < total; ++j, ++assigned) counts[rema[j % k].second]++;
    return counts;
}

} // namespace

Partition partition_dirichlet(const std::vector<int>& labels, int n_classes,
                              size_t n_clients, double alpha, uint64_t seed) {
    if (n_clients < 1) throw ValidationError("partition_dirichlet: need at least one client");
    if (!(alpha > 0.0)) throw ValidationError("partition_dirichlet: alpha must be positive");
    if (labels.size() < n_clients)
        throw Degenerate("partition_dirichlet: fewer samples than clients");

    Rng rng(derive_seed(seed, "partition_dirichlet"));

    std::vector<std::vector<size_t>> by_class(static_cast<size_t>(n_classes));
    for (size_t i = 0; i < labels.size(); ++i) by_class[static_cast<size_t>(labels[i])].push_back(i);

    Partition p;
    for (int attempt = 0; attempt < 100; ++attempt) {
        p.assignments.assign(n_clients, {});
        for (auto& idx : by_class) {
            if (idx.empty()) continue;
            std::vector<size_t> shuffled = idx;
            rng.shuffle(shuffled);
            auto props = rng.dirichlet(alpha, n_clients);
            auto counts = apportion(props, shuffled.size());
            size_t pos = 0;
            for (size_t k = 0; k < n_clients; ++k)
                for (size_t j = 0; j < counts[k]; ++j)
                    p.assignments[k].push_back(shuffled[pos++]);
        }
        bool ok = true;
        for (const auto& a : p.assignments)
            if (a.empty()) { ok = false; break; }
        if (ok) {
            for (auto& a : p.assignments) std::sort(a.begin(), a.end());
            return p;
        }
    }
    // fallback: donate one sample from the largest client to each empty one
    for (auto& a : p.assignments) {
        if (!a.empty()) continue;
        auto largest = std::max_element(
            p.assignments.begin(), p.assignments.end(),
            [](const auto& x, const auto& y) { return x.size() < y.size(); });
        a.push_back(largest->back());
        largest->pop_back();
    }
    for (auto& a : p.assignments) std::sort(a.begin(), a.end());
    return p;
}

MultimodalDataset apply_mask(const MultimodalDataset& dataset, const MissingMask& mask) {
    if (mask.n_samples() != dataset.n_samples() || mask.n_modalities() != dataset.n_modalities())
        throw ShapeMismatch("apply_mask: mask shape does not match dataset");
    MultimodalDataset out = dataset;
    for (size_t m = 0; m < out.n_modalities(); ++m)
        for (size_t s = 0; s < out.n_samples(); ++s)
            if (!mask.available(s, m))
                out.features[m].col(static_cast<Eigen::Index>(s)).setZero();
    out.availability = mask;
    return out;
}

void save_dataset(const MultimodalDataset& dataset, const std::string& directory) {
    dataset.validate();
    fs::create_directories(directory);
    {
        std::ofstream manifest(fs::path(directory) / "manifest.txt");
        if (!manifest) throw IOFailure("cannot write manifest in " + directory);
        manifest << "modalities=";
        for (size_t i = 0; i < dataset.modalities.size(); ++i)
            manifest << (i ? "," : "") << dataset.modalities[i];
        manifest << '\n';
        for (size_t i = 0; i < dataset.modalities.size(); ++i)
            manifest << "feature_len." << dataset.modalities[i] << '='
                     << dataset.features[i].rows() << '\n';
        manifest << "n_classes=" << dataset.n_classes << '\n';
    }
    {
        std::ofstream lf(fs::path(directory) / "labels.csv");
        if (!lf) throw IOFailure("cannot write labels.csv in " + directory);
        for (int y : dataset.labels) lf << y << '\n';
    }
    for (size_t m = 0; m < dataset.n_modalities(); ++m) {
        std::ofstream f(fs::path(directory) / (dataset.modalities[m] + ".csv"));
        if (!f) throw IOFailure("cannot write modality file in " + directory);
        const auto& mat = dataset.features[m];
        for (Eigen::Index s = 0; s < mat.cols(); ++s) {
            for (Eigen::Index r = 0; r < mat.rows(); ++r)
                f << (r ? "," : "") << fmt_double(mat(r, s));
            f << '\n';
        }
    }
}

namespace {

std::vector<std::string> split_string(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) out.push_back(tok);
    return out;
}

} // namespace

MultimodalDataset load_dataset(const std::string& directory) {
    const fs::path dir(directory);
    std::ifstream manifest(dir / "manifest.txt");
    if (!manifest) throw FormatError("missing manifest.txt in " + directory);

    MultimodalDataset ds;
    std::map<std::string, int> feat_lens;
    std::string line;
    size_t lineno = 0;
    while (std::getline(manifest, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("manifest.txt:" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "modalities") {
            ds.modalities = split_string(value, ',');
        } else if (key.rfind("feature_len.", 0) == 0) {
            feat_lens[key.substr(12)] = std::stoi(value);
        } else if (key == "n_classes") {
            ds.n_classes = std::stoi(value);
        } else {
            throw FormatError("manifest.txt:" + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (ds.modalities.empty()) throw FormatError("manifest.txt: no modalities listed");
    if (ds.n_classes < 1) throw FormatError("manifest.txt: n_classes missing or invalid");

    // labels
    {
        std::ifstream lf(dir / "labels.csv");
        if (!lf) throw FormatError("missing labels.csv in " + directory);
        size_t ln = 0;
        while (std::getline(lf, line)) {
            ++ln;
            if (line.empty()) continue;
            try {
                ds.labels.push_back(std::stoi(line));
            } catch (const std::exception&) {
                throw FormatError("labels.csv:" + std::to_string(ln) + ": not an integer");
            }
        }
        if (ds.labels.empty()) throw FormatError("labels.csv: no labels in " + directory);
    }

    for (const auto& mod : ds.modalities) {
        auto it = feat_lens.find(mod);
        if (it == feat_lens.end())
            throw FormatError("manifest.txt: missing feature_len for modality '" + mod + "'");
        const fs::path file = dir / (mod + ".csv");
        std::ifstream f(file);
        if (!f) throw FormatError("manifest lists modality '" + mod + "' but " +
                                  file.string() + " is absent");
        Eigen::MatrixXd mat(it->second, static_cast<Eigen::Index>(ds.labels.size()));
        size_t ln = 0;
        Eigen::Index col = 0;
        while (std::getline(f, line)) {
            ++ln;
            if (line.empty()) continue;
            if (col >= mat.cols())
                throw FormatError(file.string() + ":" + std::to_string(ln) + ": more rows than labels");
            auto cells = split_string(line, ',');
            if (static_cast<Eigen::Index>(cells.size()) != mat.rows())
                throw FormatError(file.string() + ":" + std::to_string(ln) + ": expected " +
                                  std::to_string(mat.rows()) + " values, got " +
                                  std::to_string(cells.size()));
            for (Eigen::Index r = 0; r < mat.rows(); ++r) {
                try {
                    mat(r, col) = std::stod(cells[static_cast<size_t>(r)]);
                } catch (const std::exception&) {
                    throw FormatError(file.string() + ":" + std::to_string(ln) + ": not a number");
                }
            }
            ++col;
        }
        if (col != mat.cols())
            throw FormatError(file.string() + ": expected " + std::to_string(mat.cols()) +
                              " samples, got " + std::to_string(col));
        ds.features.push_back(std::move(mat));
    }
    ds.validate();
    return ds;
}

} // namespace mmfl
