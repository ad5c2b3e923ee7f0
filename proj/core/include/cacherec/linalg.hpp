#pragma once

#include <Eigen/Dense>

namespace cacherec {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
// Row-major: recommendation matrices are processed row by row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace cacherec
