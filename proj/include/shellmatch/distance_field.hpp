#pragma once

#include "shellmatch/adaptive_grid.hpp"
#include "shellmatch/geometry.hpp"

#include <limits>
#include <vector>

namespace shellmatch {

/// Nodes with exact unsigned distances that seed the marching.
struct BandSeed {
  std::vector<Index> dofs;
  std::vector<double> distances;
};

/// Exact unsigned distances at all DOF corners of leaves whose closed box
/// meets the surface, plus leaves up to `margin_cells` leaf widths away from
/// those. GeometryError when no leaf meets the surface.
template <int Dim>
BandSeed initialize_band(const Surface<Dim>& surface, const AdaptiveGrid<Dim>& grid, int margin_cells = 0);

/// First-order upwind Eikonal solve over the axis-neighbor graph. If
/// `acceptance_order` is given it receives the DOFs in the order they were
/// accepted.
template <int Dim>
ScalarField fast_march(const AdaptiveGrid<Dim>& grid, const BandSeed& seed,
                       std::vector<Index>* acceptance_order = nullptr);

/// True when x lies inside the closed surface (ray parity).
class InsideTest2 {
 public:
  explicit InsideTest2(const PolylineSet& s);
  bool inside(const Vec<2>& x) const;

 private:
  std::vector<std::array<Vec<2>, 2>> segments_;
  double y0_ = 0.0, dy_ = 1.0;
  std::vector<std::vector<int>> buckets_;
};

class InsideTest3 {
 public:
  /// GeometryError when the mesh is not watertight.
  explicit InsideTest3(const TriangleMesh& m);
  bool inside(const Vec<3>& x) const;

 private:
  std::vector<std::array<Vec<3>, 3>> triangles_;
  int res_ = 1;
  Vec<2> lo_, cell_;
  std::vector<std::vector<int>> buckets_;
};

template <int Dim>
using InsideTest = std::conditional_t<Dim == 2, InsideTest2, InsideTest3>;

/// Negates the values at DOFs inside the surface.
template <int Dim>
ScalarField apply_sign(const AdaptiveGrid<Dim>& grid, const ScalarField& unsigned_distance,
                       const Surface<Dim>& surface);

/// Smallest |d| over DOFs with |d| <= search_radius whose fitted Hessian has
/// an eigenvalue above 1/(2h), h the local node spacing. Infinity when none.
template <int Dim>
double singularity_clearance(const AdaptiveGrid<Dim>& grid, const ScalarField& d,
                             double search_radius = std::numeric_limits<double>::infinity());

struct DistanceOptions {
  int margin_cells = 3;
  /// Radius for the clearance estimate; zero skips it.
  double clearance_radius = 0.0;
};

template <int Dim>
struct SignedDistanceField {
  ScalarField values;
  double clearance = std::numeric_limits<double>::infinity();
};

template <int Dim>
SignedDistanceField<Dim> signed_distance(const Surface<Dim>& surface, const AdaptiveGrid<Dim>& grid,
                                         const DistanceOptions& options = {});

}  // namespace shellmatch
