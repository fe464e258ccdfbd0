#pragma once

#include "shellmatch/common.hpp"
#include "shellmatch/node_key.hpp"

#include <array>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace shellmatch {

/// One term of a point evaluation: coefficient weight and physical gradient
/// weight of a degree of freedom at the evaluation point.
template <int Dim>
struct BasisTerm {
  Index dof;
  double value;
  Vec<Dim> grad;
};

/// Basis functions with nonzero value at a point, with hanging nodes already
/// expanded through their constraint stencils.
template <int Dim>
struct BasisEval {
  Index leaf = -1;
  std::vector<BasisTerm<Dim>> terms;

  double eval(const ScalarField& f) const {
    double v = 0.0;
    for (const auto& t : terms) v += t.value * f[t.dof];
    return v;
  }
  Vec<Dim> eval_gradient(const ScalarField& f) const {
    Vec<Dim> g = Vec<Dim>::Zero();
    for (const auto& t : terms) g += t.grad * f[t.dof];
    return g;
  }
  Vec<Dim> eval(const VectorField<Dim>& f) const {
    Vec<Dim> v = Vec<Dim>::Zero();
    for (const auto& t : terms) v += t.value * f.col(t.dof);
    return v;
  }
  /// Jacobian of a vector field: rows are components, columns directions.
  Mat<Dim> eval_jacobian(const VectorField<Dim>& f) const {
    Mat<Dim> J = Mat<Dim>::Zero();
    for (const auto& t : terms) J += f.col(t.dof) * t.grad.transpose();
    return J;
  }
};

/// Quadtree (Dim = 2) or octree (Dim = 3) over the unit box with multilinear
/// elements, facet 2:1 balance and hanging-node constraints.
///
/// Node and cell indices live in hash maps keyed by level and integer
/// coordinates. Degree-of-freedom indices are assigned on first sight and are
/// never reused, so coefficient vectors stay valid across refinement (they
/// only grow).
template <int Dim>
class AdaptiveGrid {
 public:
  static constexpr int kCorners = 1 << Dim;
  using Coord = std::array<std::uint32_t, Dim>;

  struct Cell {
    int level = 0;
    Coord anchor{};  // in units of 2^-level
    Index first_child = -1;
    Index parent = -1;
    bool is_leaf() const { return first_child < 0; }
  };

  struct StencilEntry {
    Index dof;
    double weight;
  };

  /// Nearest non-hanging node along +/- each axis. Slot 2a is the negative
  /// side of axis a, slot 2a+1 the positive side.
  struct AxisNeighbor {
    Index dof = -1;
    double spacing = 0.0;
  };

  explicit AdaptiveGrid(int uniform_level = 0, int max_level = 12);

  int max_level() const { return max_level_; }
  Index num_cells() const { return static_cast<Index>(cells_.size()); }
  Index num_leaves() const { return static_cast<Index>(leaves_.size()); }
  Index num_dofs() const { return static_cast<Index>(dof_keys_.size()); }
  Index num_hanging() const { return static_cast<Index>(hanging_.size()); }
  int finest_level() const { return finest_level_; }

  const Cell& cell(Index c) const { return cells_[c]; }
  Index leaf_cell(Index leaf) const { return leaves_[leaf]; }
  const std::vector<Index>& leaves() const { return leaves_; }
  std::optional<Index> find_cell(const CellKey<Dim>& key) const;

  int leaf_level(Index leaf) const { return cells_[leaves_[leaf]].level; }
  double leaf_size(Index leaf) const { return std::ldexp(1.0, -leaf_level(leaf)); }
  Vec<Dim> leaf_origin(Index leaf) const;

  /// Constraint stencil of a leaf corner in terms of degrees of freedom.
  /// Corner bit a set means the upper side along axis a.
  std::span<const StencilEntry> corner_stencil(Index leaf, int corner) const {
    const auto slot = leaf * kCorners + corner;
    return {corner_entries_.data() + corner_offsets_[slot],
            corner_entries_.data() + corner_offsets_[slot + 1]};
  }

  const NodeKey<Dim>& dof_key(Index dof) const { return dof_keys_[dof]; }
  Vec<Dim> dof_position(Index dof) const { return dof_keys_[dof].position(); }
  std::optional<Index> find_dof(const NodeKey<Dim>& key) const;
  /// Stencil of a hanging node, or nullptr when the key is not hanging.
  const std::vector<StencilEntry>* find_hanging(const NodeKey<Dim>& key) const;
  const std::unordered_map<NodeKey<Dim>, std::vector<StencilEntry>, KeyHash>& hanging_nodes() const {
    return hanging_;
  }
  bool is_boundary_dof(Index dof) const;

  const std::array<AxisNeighbor, 2 * Dim>& axis_neighbors(Index dof) const { return neighbors_[dof]; }
  /// Side length of the smallest leaf having the DOF as a corner.
  double node_size(Index dof) const { return node_size_[dof]; }

  /// Integral of each conforming basis function (lumped mass).
  const Eigen::VectorXd& lumped_mass() const { return lumped_mass_; }

  /// Projects x onto the unit box and returns the leaf whose half-open box
  /// contains it. Points on the upper domain boundary map to the adjacent
  /// interior leaf.
  Index locate(const Vec<Dim>& x) const;

  /// Basis functions at x (after projection onto the unit box).
  void basis_at(const Vec<Dim>& x, BasisEval<Dim>& out) const;

  double evaluate(const ScalarField& f, const Vec<Dim>& x) const;
  Vec<Dim> evaluate_gradient(const ScalarField& f, const Vec<Dim>& x) const;
  Vec<Dim> evaluate(const VectorField<Dim>& f, const Vec<Dim>& x) const;

  /// Value of a nodal field at any grid node (DOF or hanging).
  double node_value(const ScalarField& f, const NodeKey<Dim>& key) const;

  /// Splits the marked leaves and any further leaves needed to keep facet
  /// neighbors within one level. Returns the newly created DOF indices.
  /// Throws std::length_error when refinement would exceed max_level.
  std::vector<Index> refine(std::span<const Index> marked_leaves);

  /// Refines every leaf until the grid is uniform at `level`.
  void refine_uniform(int level);

  /// Exhaustive facet-neighbor scan; true when every pair of facet-adjacent
  /// leaves differs by at most one level.
  bool is_balanced() const;

 private:
  using FineCoord = std::array<std::int64_t, Dim>;

  Index find_leaf_fine(const FineCoord& q) const;
  Index descend_to(int level, const Coord& anchor) const;
  void split(Index c);
  void split_balanced(Index c);
  std::vector<Index> rebuild();
  NodeKey<Dim> key_of_fine(const FineCoord& p) const;
  FineCoord corner_fine(Index c, int corner) const;

  struct NodeInfo {
    bool hanging = false;
    std::vector<StencilEntry> stencil;  // for hanging nodes
  };
  const NodeInfo& classify(const FineCoord& p,
                           std::unordered_map<NodeKey<Dim>, NodeInfo, KeyHash>& memo,
                           std::vector<Index>& new_dofs);

  int max_level_;
  int finest_level_ = 0;
  std::vector<Cell> cells_;
  std::unordered_map<CellKey<Dim>, Index, KeyHash> cell_index_;
  std::vector<Index> leaves_;
  std::vector<Index> leaf_id_;  // per cell, -1 for interior cells
  std::vector<NodeKey<Dim>> dof_keys_;
  std::unordered_map<NodeKey<Dim>, Index, KeyHash> dof_index_;
  std::unordered_map<NodeKey<Dim>, std::vector<StencilEntry>, KeyHash> hanging_;
  std::vector<Index> corner_offsets_;
  std::vector<StencilEntry> corner_entries_;
  std::vector<std::array<AxisNeighbor, 2 * Dim>> neighbors_;
  Eigen::VectorXd lumped_mass_;
  std::vector<double> node_size_;
};

/// Coefficients on `fine` reproducing the function `values` on `coarse`.
/// Shared DOFs copy their values; new DOFs interpolate multilinearly.
template <int Dim>
ScalarField prolongate(const AdaptiveGrid<Dim>& coarse, const AdaptiveGrid<Dim>& fine, const ScalarField& values);
template <int Dim>
VectorField<Dim> prolongate(const AdaptiveGrid<Dim>& coarse, const AdaptiveGrid<Dim>& fine,
                            const VectorField<Dim>& values);

/// Nodal interpolant of the identity map.
template <int Dim>
VectorField<Dim> identity_field(const AdaptiveGrid<Dim>& grid) {
  VectorField<Dim> phi(Dim, grid.num_dofs());
  for (Index i = 0; i < grid.num_dofs(); ++i) phi.col(i) = grid.dof_position(i);
  return phi;
}

/// 2-point-per-axis tensor Gauss rule on the reference cell [0,1]^Dim.
template <int Dim>
struct GaussRule {
  static constexpr int kPoints = 1 << Dim;
  std::array<Vec<Dim>, kPoints> points;
  std::array<double, kPoints> weights;
  GaussRule();
};

/// Multilinear reference basis on [0,1]^Dim: values and reference gradients.
template <int Dim>
void reference_basis(const Vec<Dim>& xi, std::array<double, 1 << Dim>& values,
                     std::array<Vec<Dim>, 1 << Dim>& grads);

}  // namespace shellmatch
