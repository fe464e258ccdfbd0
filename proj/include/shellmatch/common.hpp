#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace shellmatch {

using Index = std::ptrdiff_t;

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

/// Nodal scalar coefficients, one per degree of freedom.
using ScalarField = Eigen::VectorXd;

/// Nodal vector coefficients, one column per degree of freedom.
template <int Dim>
using VectorField = Eigen::Matrix<double, Dim, Eigen::Dynamic>;

/// Raised for malformed or unsupported geometry input.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid parameter combinations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical precondition cannot be met (rank deficiency,
/// non-SPD input, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <int Dim>
Mat<Dim> tangent_projector(const Vec<Dim>& e) {
  return Mat<Dim>::Identity() - e * e.transpose();
}

}  // namespace shellmatch
