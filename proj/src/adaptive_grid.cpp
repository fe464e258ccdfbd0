#include "shellmatch/adaptive_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace shellmatch {

template <int Dim>
void reference_basis(const Vec<Dim>& xi, std::array<double, 1 << Dim>& values,
                     std::array<Vec<Dim>, 1 << Dim>& grads) {
  for (int c = 0; c < (1 << Dim); ++c) {
    double v = 1.0;
    Vec<Dim> g = Vec<Dim>::Ones();
    for (int a = 0; a < Dim; ++a) {
      const bool upper = (c >> a) & 1;
      const double f = upper ? xi[a] : 1.0 - xi[a];
      const double df = upper ? 1.0 : -1.0;
      v *= f;
      for (int b = 0; b < Dim; ++b) g[b] *= (b == a) ? df : f;
    }
    values[c] = v;
    grads[c] = g;
  }
}

template <int Dim>
GaussRule<Dim>::GaussRule() {
  const double off = 0.5 / std::sqrt(3.0);
  const double pts[2] = {0.5 - off, 0.5 + off};
  for (int q = 0; q < kPoints; ++q) {
    for (int a = 0; a < Dim; ++a) points[q][a] = pts[(q >> a) & 1];
    weights[q] = 1.0 / kPoints;
  }
}

template <int Dim>
AdaptiveGrid<Dim>::AdaptiveGrid(int uniform_level, int max_level) : max_level_(max_level) {
  if (max_level < 1 || max_level > 30) throw std::invalid_argument("max_level must be in [1, 30]");
  if (uniform_level < 0 || uniform_level > max_level) {
    throw std::invalid_argument("uniform level outside [0, max_level]");
  }
  cells_.push_back(Cell{});
  cell_index_.emplace(CellKey<Dim>{}, 0);
  rebuild();
  refine_uniform(uniform_level);
}

template <int Dim>
std::optional<Index> AdaptiveGrid<Dim>::find_cell(const CellKey<Dim>& key) const {
  auto it = cell_index_.find(key);
  if (it == cell_index_.end()) return std::nullopt;
  return it->second;
}

template <int Dim>
Vec<Dim> AdaptiveGrid<Dim>::leaf_origin(Index leaf) const {
  const Cell& c = cells_[leaves_[leaf]];
  const double h = std::ldexp(1.0, -c.level);
  Vec<Dim> x;
  for (int a = 0; a < Dim; ++a) x[a] = c.anchor[a] * h;
  return x;
}

template <int Dim>
std::optional<Index> AdaptiveGrid<Dim>::find_dof(const NodeKey<Dim>& key) const {
  auto it = dof_index_.find(key);
  if (it == dof_index_.end()) return std::nullopt;
  return it->second;
}

template <int Dim>
const std::vector<typename AdaptiveGrid<Dim>::StencilEntry>* AdaptiveGrid<Dim>::find_hanging(
    const NodeKey<Dim>& key) const {
  auto it = hanging_.find(key);
  return it == hanging_.end() ? nullptr : &it->second;
}

template <int Dim>
bool AdaptiveGrid<Dim>::is_boundary_dof(Index dof) const {
  const auto& k = dof_keys_[dof];
  const std::uint32_t extent = 1u << k.level;
  for (auto c : k.coords) {
    if (c == 0 || c == extent) return true;
  }
  return false;
}

template <int Dim>
Index AdaptiveGrid<Dim>::descend_to(int level, const Coord& anchor) const {
  Index c = 0;
  while (!cells_[c].is_leaf() && cells_[c].level < level) {
    const int shift = level - cells_[c].level - 1;
    int child = 0;
    for (int a = 0; a < Dim; ++a) child |= static_cast<int>((anchor[a] >> shift) & 1u) << a;
    c = cells_[c].first_child + child;
  }
  return c;
}

template <int Dim>
Index AdaptiveGrid<Dim>::find_leaf_fine(const FineCoord& q) const {
  Coord anchor;
  for (int a = 0; a < Dim; ++a) anchor[a] = static_cast<std::uint32_t>(q[a]);
  return descend_to(max_level_, anchor);
}

template <int Dim>
Index AdaptiveGrid<Dim>::locate(const Vec<Dim>& x) const {
  const std::int64_t extent = std::int64_t{1} << max_level_;
  FineCoord q;
  for (int a = 0; a < Dim; ++a) {
    const double xa = std::clamp(x[a], 0.0, 1.0);
    auto v = static_cast<std::int64_t>(std::floor(xa * static_cast<double>(extent)));
    q[a] = std::clamp<std::int64_t>(v, 0, extent - 1);
  }
  const Index c = find_leaf_fine(q);
  return leaf_id_[c];
}

template <int Dim>
void AdaptiveGrid<Dim>::basis_at(const Vec<Dim>& x, BasisEval<Dim>& out) const {
  out.terms.clear();
  out.leaf = locate(x);
  const double h = leaf_size(out.leaf);
  const Vec<Dim> origin = leaf_origin(out.leaf);
  Vec<Dim> xi;
  for (int a = 0; a < Dim; ++a) xi[a] = (std::clamp(x[a], 0.0, 1.0) - origin[a]) / h;
  std::array<double, kCorners> values;
  std::array<Vec<Dim>, kCorners> grads;
  reference_basis<Dim>(xi, values, grads);
  for (int c = 0; c < kCorners; ++c) {
    for (const auto& e : corner_stencil(out.leaf, c)) {
      out.terms.push_back({e.dof, e.weight * values[c], (e.weight / h) * grads[c]});
    }
  }
}

template <int Dim>
double AdaptiveGrid<Dim>::evaluate(const ScalarField& f, const Vec<Dim>& x) const {
  BasisEval<Dim> b;
  basis_at(x, b);
  return b.eval(f);
}

template <int Dim>
Vec<Dim> AdaptiveGrid<Dim>::evaluate_gradient(const ScalarField& f, const Vec<Dim>& x) const {
  BasisEval<Dim> b;
  basis_at(x, b);
  return b.eval_gradient(f);
}

template <int Dim>
Vec<Dim> AdaptiveGrid<Dim>::evaluate(const VectorField<Dim>& f, const Vec<Dim>& x) const {
  BasisEval<Dim> b;
  basis_at(x, b);
  return b.eval(f);
}

template <int Dim>
double AdaptiveGrid<Dim>::node_value(const ScalarField& f, const NodeKey<Dim>& key) const {
  if (auto dof = find_dof(key)) return f[*dof];
  if (const auto* st = find_hanging(key)) {
    double v = 0.0;
    for (const auto& e : *st) v += e.weight * f[e.dof];
    return v;
  }
  throw std::out_of_range("node key is not a grid node");
}

template <int Dim>
void AdaptiveGrid<Dim>::split(Index c) {
  const int level = cells_[c].level + 1;
  const Coord anchor = cells_[c].anchor;
  const Index first = num_cells();
  cells_[c].first_child = first;
  for (int child = 0; child < kCorners; ++child) {
    Cell k;
    k.level = level;
    k.parent = c;
    for (int a = 0; a < Dim; ++a) k.anchor[a] = 2 * anchor[a] + ((child >> a) & 1);
    cell_index_.emplace(CellKey<Dim>{k.level, k.anchor}, num_cells());
    cells_.push_back(k);
  }
}

template <int Dim>
void AdaptiveGrid<Dim>::split_balanced(Index c) {
  if (!cells_[c].is_leaf()) return;
  const int level = cells_[c].level;
  if (level >= max_level_) {
    throw std::length_error("refinement beyond maximum level " + std::to_string(max_level_));
  }
  const std::int64_t extent = std::int64_t{1} << level;
  for (int a = 0; a < Dim; ++a) {
    for (int side : {-1, 1}) {
      const std::int64_t nb = static_cast<std::int64_t>(cells_[c].anchor[a]) + side;
      if (nb < 0 || nb >= extent) continue;
      Coord na = cells_[c].anchor;
      na[a] = static_cast<std::uint32_t>(nb);
      for (;;) {
        const Index n = descend_to(level, na);
        if (cells_[n].level >= level) break;
        split_balanced(n);
      }
    }
  }
  split(c);
}

template <int Dim>
std::vector<Index> AdaptiveGrid<Dim>::refine(std::span<const Index> marked_leaves) {
  std::vector<Index> cells;
  cells.reserve(marked_leaves.size());
  for (Index leaf : marked_leaves) {
    if (leaf < 0 || leaf >= num_leaves()) throw std::out_of_range("marked leaf index out of range");
    cells.push_back(leaves_[leaf]);
  }
  for (Index c : cells) split_balanced(c);
  return rebuild();
}

template <int Dim>
void AdaptiveGrid<Dim>::refine_uniform(int level) {
  for (;;) {
    std::vector<Index> marked;
    for (Index l = 0; l < num_leaves(); ++l) {
      if (leaf_level(l) < level) marked.push_back(l);
    }
    if (marked.empty()) return;
    refine(marked);
  }
}

template <int Dim>
bool AdaptiveGrid<Dim>::is_balanced() const {
  for (Index c : leaves_) {
    const int level = cells_[c].level;
    const std::int64_t extent = std::int64_t{1} << level;
    for (int a = 0; a < Dim; ++a) {
      for (int side : {-1, 1}) {
        const std::int64_t nb = static_cast<std::int64_t>(cells_[c].anchor[a]) + side;
        if (nb < 0 || nb >= extent) continue;
        Coord na = cells_[c].anchor;
        na[a] = static_cast<std::uint32_t>(nb);
        const Index n = descend_to(level, na);
        if (cells_[n].is_leaf() && cells_[n].level < level - 1) return false;
      }
    }
  }
  return true;
}

template <int Dim>
NodeKey<Dim> AdaptiveGrid<Dim>::key_of_fine(const FineCoord& p) const {
  return canonical_key<Dim>(max_level_, p);
}

template <int Dim>
typename AdaptiveGrid<Dim>::FineCoord AdaptiveGrid<Dim>::corner_fine(Index c, int corner) const {
  const Cell& cell = cells_[c];
  const int shift = max_level_ - cell.level;
  FineCoord p;
  for (int a = 0; a < Dim; ++a) {
    p[a] = (static_cast<std::int64_t>(cell.anchor[a]) + ((corner >> a) & 1)) << shift;
  }
  return p;
}

template <int Dim>
const typename AdaptiveGrid<Dim>::NodeInfo& AdaptiveGrid<Dim>::classify(
    const FineCoord& p, std::unordered_map<NodeKey<Dim>, NodeInfo, KeyHash>& memo,
    std::vector<Index>& new_dofs) {
  const NodeKey<Dim> key = key_of_fine(p);
  if (auto it = memo.find(key); it != memo.end()) return it->second;

  // The coarsest leaf touching p decides: p is a vertex of every finer one.
  const std::int64_t extent = std::int64_t{1} << max_level_;
  Index coarsest = -1;
  for (int o = 0; o < kCorners; ++o) {
    FineCoord q;
    bool inside = true;
    for (int a = 0; a < Dim; ++a) {
      q[a] = p[a] - ((o >> a) & 1);
      inside = inside && q[a] >= 0 && q[a] < extent;
    }
    if (!inside) continue;
    const Index c = find_leaf_fine(q);
    if (coarsest < 0 || cells_[c].level < cells_[coarsest].level) coarsest = c;
  }

  const Cell& cell = cells_[coarsest];
  const int shift = max_level_ - cell.level;
  const std::int64_t size = std::int64_t{1} << shift;
  Vec<Dim> xi;
  bool vertex = true;
  for (int a = 0; a < Dim; ++a) {
    const std::int64_t rel = p[a] - (static_cast<std::int64_t>(cell.anchor[a]) << shift);
    xi[a] = static_cast<double>(rel) / static_cast<double>(size);
    vertex = vertex && (rel == 0 || rel == size);
  }

  NodeInfo info;
  if (vertex) {
    auto it = dof_index_.find(key);
    Index dof;
    if (it == dof_index_.end()) {
      dof = num_dofs();
      dof_index_.emplace(key, dof);
      dof_keys_.push_back(key);
      new_dofs.push_back(dof);
    } else {
      dof = it->second;
    }
    info.stencil.push_back({dof, 1.0});
  } else {
    if (dof_index_.count(key)) throw std::logic_error("degree of freedom turned into a hanging node");
    info.hanging = true;
    const Index cell_index = coarsest;
    std::array<double, kCorners> w;
    std::array<Vec<Dim>, kCorners> unused;
    reference_basis<Dim>(xi, w, unused);
    for (int c = 0; c < kCorners; ++c) {
      if (w[c] == 0.0) continue;
      const NodeInfo& corner = classify(corner_fine(cell_index, c), memo, new_dofs);
      for (const auto& e : corner.stencil) {
        auto hit = std::find_if(info.stencil.begin(), info.stencil.end(),
                                [&](const StencilEntry& s) { return s.dof == e.dof; });
        if (hit == info.stencil.end()) {
          info.stencil.push_back({e.dof, w[c] * e.weight});
        } else {
          hit->weight += w[c] * e.weight;
        }
      }
    }
  }
  return memo.emplace(key, std::move(info)).first->second;
}

template <int Dim>
std::vector<Index> AdaptiveGrid<Dim>::rebuild() {
  // Depth-first leaf order keeps spatially close leaves close in memory.
  leaves_.clear();
  leaf_id_.assign(cells_.size(), -1);
  finest_level_ = 0;
  std::vector<Index> stack{0};
  while (!stack.empty()) {
    const Index c = stack.back();
    stack.pop_back();
    if (cells_[c].is_leaf()) {
      leaf_id_[c] = num_leaves();
      leaves_.push_back(c);
      finest_level_ = std::max(finest_level_, cells_[c].level);
    } else {
      for (int k = kCorners - 1; k >= 0; --k) stack.push_back(cells_[c].first_child + k);
    }
  }

  std::unordered_map<NodeKey<Dim>, NodeInfo, KeyHash> memo;
  memo.reserve(leaves_.size() * 2);
  std::vector<Index> new_dofs;
  corner_offsets_.assign(leaves_.size() * kCorners + 1, 0);
  corner_entries_.clear();
  for (Index l = 0; l < num_leaves(); ++l) {
    for (int c = 0; c < kCorners; ++c) {
      const NodeInfo& info = classify(corner_fine(leaves_[l], c), memo, new_dofs);
      corner_entries_.insert(corner_entries_.end(), info.stencil.begin(), info.stencil.end());
      corner_offsets_[l * kCorners + c + 1] = static_cast<Index>(corner_entries_.size());
    }
  }

  hanging_.clear();
  for (auto& [key, info] : memo) {
    if (info.hanging) hanging_.emplace(key, std::move(info.stencil));
  }

  neighbors_.assign(dof_keys_.size(), {});
  lumped_mass_ = Eigen::VectorXd::Zero(num_dofs());
  node_size_.assign(dof_keys_.size(), 1.0);
  for (Index l = 0; l < num_leaves(); ++l) {
    const double h = leaf_size(l);
    const double corner_mass = std::pow(h, Dim) / kCorners;
    for (int c = 0; c < kCorners; ++c) {
      const auto st = corner_stencil(l, c);
      for (const auto& e : st) lumped_mass_[e.dof] += corner_mass * e.weight;
      if (st.size() != 1 || st[0].weight != 1.0) continue;
      const Index dof = st[0].dof;
      node_size_[dof] = std::min(node_size_[dof], h);
      for (int a = 0; a < Dim; ++a) {
        const auto other = corner_stencil(l, c ^ (1 << a));
        if (other.size() != 1 || other[0].weight != 1.0) continue;
        const int slot = 2 * a + ((c >> a) & 1 ? 0 : 1);
        auto& nb = neighbors_[dof][slot];
        if (nb.dof < 0 || h < nb.spacing) nb = {other[0].dof, h};
      }
    }
  }
  return new_dofs;
}

template <int Dim>
ScalarField prolongate(const AdaptiveGrid<Dim>& coarse, const AdaptiveGrid<Dim>& fine,
                       const ScalarField& values) {
  if (values.size() != coarse.num_dofs() || fine.num_dofs() < coarse.num_dofs()) {
    throw std::invalid_argument("prolongate: grids or field sizes do not match");
  }
  ScalarField out(fine.num_dofs());
  out.head(coarse.num_dofs()) = values;
  for (Index i = coarse.num_dofs(); i < fine.num_dofs(); ++i) {
    out[i] = coarse.evaluate(values, fine.dof_position(i));
  }
  return out;
}

template <int Dim>
VectorField<Dim> prolongate(const AdaptiveGrid<Dim>& coarse, const AdaptiveGrid<Dim>& fine,
                            const VectorField<Dim>& values) {
  if (values.cols() != coarse.num_dofs() || fine.num_dofs() < coarse.num_dofs()) {
    throw std::invalid_argument("prolongate: grids or field sizes do not match");
  }
  VectorField<Dim> out(Dim, fine.num_dofs());
  out.leftCols(coarse.num_dofs()) = values;
  for (Index i = coarse.num_dofs(); i < fine.num_dofs(); ++i) {
    out.col(i) = coarse.evaluate(values, fine.dof_position(i));
  }
  return out;
}

template class AdaptiveGrid<2>;
template class AdaptiveGrid<3>;
template struct GaussRule<2>;
template struct GaussRule<3>;
template void reference_basis<2>(const Vec<2>&, std::array<double, 4>&, std::array<Vec<2>, 4>&);
template void reference_basis<3>(const Vec<3>&, std::array<double, 8>&, std::array<Vec<3>, 8>&);
template ScalarField prolongate<2>(const AdaptiveGrid<2>&, const AdaptiveGrid<2>&, const ScalarField&);
template ScalarField prolongate<3>(const AdaptiveGrid<3>&, const AdaptiveGrid<3>&, const ScalarField&);
template VectorField<2> prolongate<2>(const AdaptiveGrid<2>&, const AdaptiveGrid<2>&, const VectorField<2>&);
template VectorField<3> prolongate<3>(const AdaptiveGrid<3>&, const AdaptiveGrid<3>&, const VectorField<3>&);

}  // namespace shellmatch
