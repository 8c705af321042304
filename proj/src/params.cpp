#include "mmfl/params.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mmfl {

void save_params(const ParamMap& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IOFailure("cannot open parameter archive for writing: " + path);
    char buf[48];
    for (const auto& [name, m] : params) {
        out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
                out << (c ? " " : "") << buf;
            }
            out << '\n';
        }
    }
    if (!out) throw IOFailure("write failed: " + path);
}

ParamMap load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOFailure("cannot open parameter archive: " + path);
    ParamMap params;
    std::string name;
    Eigen::Index rows, cols;
    while (in >> name >> rows >> cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                if (!(in >> m(r, c)))
                    throw FormatError(path + ": truncated tensor '" + name + "'");
        params[name] = std::move(m);
    }
    return params;
}

} // namespace mmfl
