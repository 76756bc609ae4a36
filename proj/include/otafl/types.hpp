#pragma once

#include <Eigen/Dense>

namespace otafl {

using Vector = Eigen::VectorXd;
/// One row per device.
using GradMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace otafl
