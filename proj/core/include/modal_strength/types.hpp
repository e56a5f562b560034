#pragma once

#include <Eigen/Core>

#include <complex>
#include <numbers>

namespace modal_strength {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

using BusId = int;

inline constexpr double kDefaultOmega0 = 2.0 * std::numbers::pi * 50.0;

/// Which half of the decoupled closed loop is being analysed.
enum class Side { Frequency, Voltage };

}  // namespace modal_strength
