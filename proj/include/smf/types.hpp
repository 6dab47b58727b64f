#pragma once

#include <Eigen/Dense>

namespace smf {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Vector>;

}  // namespace smf
