#pragma once

#include <Eigen/Dense>

namespace epijoint {

// Territories along rows, days along columns.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// C x T reproduction numbers, one row per territory.
using ReproMatrix = Matrix;

} // namespace epijoint
