#pragma once
#include <Eigen/Dense>
#include <map>
#include <string>

#include "mmfl/errors.hpp"

namespace mmfl {

// Flat named-tensor archive. std::map keeps iteration order stable across
// runs, which FedAvg and the serialized format rely on.
using ParamMap = std::map<std::string, Eigen::MatrixXd>;

void save_params(const ParamMap& params, const std::string& path);
ParamMap load_params(const std::string& path);

} // namespace mmfl
