#pragma once

#include <Eigen/Dense>

namespace divker {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace divker
