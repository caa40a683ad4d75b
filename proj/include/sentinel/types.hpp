#pragma once

#include <Eigen/Dense>

namespace sentinel {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using AdjMat = Eigen::MatrixXi; // entries in {0,1}; A(i,j)=1 means j sends to i

} // namespace sentinel
