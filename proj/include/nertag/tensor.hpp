#pragma once

#include <Eigen/Core>

namespace nertag {

// Row-major so that row i of a sequence matrix is token i and serialized
// buffers follow reading order.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace nertag
