#pragma once

#include <Eigen/Dense>

namespace affext {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

}  // namespace affext
