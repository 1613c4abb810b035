#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace gwshm {

/// Dense-vector and dense-matrix JSON encodings shared by every module that
/// serializes models, bases, or libraries: a vector is a flat array, a
/// matrix a row-major array of row arrays.

nlohmann::json to_json_array(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

nlohmann::json to_json_rows(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace gwshm
