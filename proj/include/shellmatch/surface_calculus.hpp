#pragma once

#include "shellmatch/adaptive_grid.hpp"

#include <limits>
#include <memory>
#include <vector>

namespace shellmatch {

template <int Dim>
using MatrixField = std::vector<Mat<Dim>>;

/// k-nearest-neighbor queries over the DOF positions of a grid.
template <int Dim>
class NodeNeighborhoods {
 public:
  explicit NodeNeighborhoods(const AdaptiveGrid<Dim>& grid);
  ~NodeNeighborhoods();
  NodeNeighborhoods(NodeNeighborhoods&&) noexcept;

  /// The k DOFs closest to `dof`, including `dof` itself, nearest first.
  std::vector<Index> nearest(Index dof, int k) const;

 private:
  struct Impl;
  const AdaptiveGrid<Dim>* grid_;
  std::unique_ptr<Impl> impl_;
};

template <int Dim>
struct QuadraticFit {
  double value = 0.0;
  Vec<Dim> gradient = Vec<Dim>::Zero();
  Mat<Dim> hessian = Mat<Dim>::Zero();
};

template <int Dim>
constexpr int default_fit_neighbors() {
  return Dim == 2 ? 12 : 26;
}

/// Least-squares quadratic through the values at `dof` and its r nearest
/// DOFs, expanded at the position of `dof`. A rank-deficient system is
/// retried once with 2r neighbors; NumericalError if that fails as well.
template <int Dim>
QuadraticFit<Dim> fit_quadratic(const AdaptiveGrid<Dim>& grid, const NodeNeighborhoods<Dim>& hood,
                                const ScalarField& values, Index dof, int r = default_fit_neighbors<Dim>());

/// Lumped L2 projection of the elementwise gradient, normalized per node.
/// Zero vectors become the last unit vector and are reported as a warning.
template <int Dim>
VectorField<Dim> compute_normals(const AdaptiveGrid<Dim>& grid, const ScalarField& d);

/// Symmetrized Hessian of the local quadratic fit at each DOF. Nodes with
/// |d| > band_radius get a zero matrix.
template <int Dim>
MatrixField<Dim> compute_shape_operator(const AdaptiveGrid<Dim>& grid, const ScalarField& d,
                                        int r = default_fit_neighbors<Dim>(),
                                        double band_radius = std::numeric_limits<double>::infinity());

/// P S P + n n^T with P = I - n n^T.
template <int Dim>
Mat<Dim> extend_shape_operator(const Mat<Dim>& S, const Vec<Dim>& n) {
  const Mat<Dim> P = tangent_projector<Dim>(n);
  return P * S * P + n * n.transpose();
}

struct Classification {
  enum class Kind { Shift, TruncatedAbs };
  Kind kind = Kind::TruncatedAbs;
  /// Shift amount for Kind::Shift, truncation level for Kind::TruncatedAbs.
  double parameter = 1.0;

  static Classification shift(double mu) { return {Kind::Shift, mu}; }
  static Classification truncated_abs(double tau) { return {Kind::TruncatedAbs, tau}; }
};

/// SPD surrogate of a symmetric matrix. NumericalError when the shifted
/// matrix is not positive definite.
template <int Dim>
Mat<Dim> classify(const Mat<Dim>& S_ext, const Classification& kind);

template <int Dim>
struct SpdRoot {
  Mat<Dim> sqrt;
  Mat<Dim> inv_sqrt;
  bool floored = false;
};

inline constexpr double kSpdFloor = 1e-6;

/// Square root and inverse square root with eigenvalues floored at `floor`.
/// NumericalError for non-symmetric input.
template <int Dim>
SpdRoot<Dim> spd_sqrt(const Mat<Dim>& M, double floor = kSpdFloor);

/// Everything the energy needs from one signed distance field.
template <int Dim>
struct SurfaceCoefficients {
  VectorField<Dim> normals;
  MatrixField<Dim> shape;       // S
  MatrixField<Dim> classified;  // C(S_ext)
  MatrixField<Dim> sqrt;        // C^{1/2}
  MatrixField<Dim> inv_sqrt;    // C^{-1/2}
  Index floored = 0;
};

template <int Dim>
SurfaceCoefficients<Dim> compute_coefficients(const AdaptiveGrid<Dim>& grid, const ScalarField& d,
                                              const Classification& kind,
                                              int r = default_fit_neighbors<Dim>(),
                                              double band_radius = std::numeric_limits<double>::infinity());

}  // namespace shellmatch
