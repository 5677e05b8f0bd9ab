#pragma once

#include <Eigen/Dense>
#include <complex>

namespace stapsdr {

using cxd = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Numeric-rank threshold relative to the largest singular value, shared by
// every rank/nullspace decision in the library.
inline constexpr double kRankTol = 1e-8;

}  // namespace stapsdr
