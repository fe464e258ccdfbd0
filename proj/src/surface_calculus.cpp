#include "shellmatch/surface_calculus.hpp"

#include "shellmatch/log.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <tbb/parallel_for.h>

#include <Eigen/Eigenvalues>

#include <atomic>

namespace shellmatch {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

template <int Dim>
struct NodeNeighborhoods<Dim>::Impl {
  using Point = bg::model::point<double, Dim, bg::cs::cartesian>;
  using Value = std::pair<Point, Index>;
  bgi::rtree<Value, bgi::quadratic<16>> tree;

  static Point to_point(const Vec<Dim>& x) {
    Point p;
    bg::set<0>(p, x[0]);
    bg::set<1>(p, x[1]);
    if constexpr (Dim == 3) bg::set<2>(p, x[2]);
    return p;
  }
};

template <int Dim>
NodeNeighborhoods<Dim>::NodeNeighborhoods(const AdaptiveGrid<Dim>& grid) : grid_(&grid), impl_(new Impl) {
  std::vector<typename Impl::Value> values;
  values.reserve(grid.num_dofs());
  for (Index i = 0; i < grid.num_dofs(); ++i) values.emplace_back(Impl::to_point(grid.dof_position(i)), i);
  impl_->tree = decltype(impl_->tree)(values.begin(), values.end());
}

template <int Dim>
NodeNeighborhoods<Dim>::~NodeNeighborhoods() = default;
template <int Dim>
NodeNeighborhoods<Dim>::NodeNeighborhoods(NodeNeighborhoods&&) noexcept = default;

template <int Dim>
std::vector<Index> NodeNeighborhoods<Dim>::nearest(Index dof, int k) const {
  const Vec<Dim> x = grid_->dof_position(dof);
  std::vector<typename Impl::Value> hits;
  impl_->tree.query(bgi::nearest(Impl::to_point(x), static_cast<unsigned>(k)), std::back_inserter(hits));
  std::vector<std::pair<double, Index>> sorted;
  sorted.reserve(hits.size());
  for (const auto& h : hits) sorted.emplace_back((grid_->dof_position(h.second) - x).squaredNorm(), h.second);
  std::sort(sorted.begin(), sorted.end());
  std::vector<Index> out;
  out.reserve(sorted.size());
  for (const auto& s : sorted) out.push_back(s.second);
  return out;
}

namespace {

template <int Dim>
constexpr int quadratic_terms() {
  return 1 + Dim + Dim * (Dim + 1) / 2;
}

template <int Dim>
bool try_fit(const AdaptiveGrid<Dim>& grid, const std::vector<Index>& nodes, const ScalarField& values,
             const Vec<Dim>& center, QuadraticFit<Dim>& out) {
  constexpr int kTerms = quadratic_terms<Dim>();
  double scale = 0.0;
  for (Index j : nodes) scale = std::max(scale, (grid.dof_position(j) - center).norm());
  if (scale == 0.0) return false;
  Eigen::MatrixXd A(nodes.size(), kTerms);
  Eigen::VectorXd b(nodes.size());
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const Vec<Dim> z = (grid.dof_position(nodes[r]) - center) / scale;
    int col = 0;
    A(r, col++) = 1.0;
    for (int a = 0; a < Dim; ++a) A(r, col++) = z[a];
    for (int a = 0; a < Dim; ++a) {
      for (int c = a; c < Dim; ++c) A(r, col++) = (a == c) ? 0.5 * z[a] * z[a] : z[a] * z[c];
    }
    b[r] = values[nodes[r]];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < kTerms) return false;
  const Eigen::VectorXd coef = qr.solve(b);
  int col = 0;
  out.value = coef[col++];
  for (int a = 0; a < Dim; ++a) out.gradient[a] = coef[col++] / scale;
  for (int a = 0; a < Dim; ++a) {
    for (int c = a; c < Dim; ++c) {
      out.hessian(a, c) = out.hessian(c, a) = coef[col++] / (scale * scale);
    }
  }
  return true;
}

}  // namespace

template <int Dim>
QuadraticFit<Dim> fit_quadratic(const AdaptiveGrid<Dim>& grid, const NodeNeighborhoods<Dim>& hood,
                                const ScalarField& values, Index dof, int r) {
  if (r + 1 < quadratic_terms<Dim>()) throw std::invalid_argument("neighborhood too small for a quadratic fit");
  const Vec<Dim> center = grid.dof_position(dof);
  QuadraticFit<Dim> fit;
  if (try_fit(grid, hood.nearest(dof, r + 1), values, center, fit)) return fit;
  if (try_fit(grid, hood.nearest(dof, 2 * r + 1), values, center, fit)) return fit;
  throw NumericalError("rank-deficient quadratic fit at node " + std::to_string(dof));
}

template <int Dim>
VectorField<Dim> compute_normals(const AdaptiveGrid<Dim>& grid, const ScalarField& d) {
  constexpr int kCorners = AdaptiveGrid<Dim>::kCorners;
  const GaussRule<Dim> rule;
  std::array<std::array<double, kCorners>, GaussRule<Dim>::kPoints> psi;
  std::array<std::array<Vec<Dim>, kCorners>, GaussRule<Dim>::kPoints> dpsi;
  for (int q = 0; q < GaussRule<Dim>::kPoints; ++q) reference_basis<Dim>(rule.points[q], psi[q], dpsi[q]);

  VectorField<Dim> acc = VectorField<Dim>::Zero(Dim, grid.num_dofs());
  for (Index l = 0; l < grid.num_leaves(); ++l) {
    const double h = grid.leaf_size(l);
    const double vol = std::pow(h, Dim);
    std::array<double, kCorners> dc;
    for (int c = 0; c < kCorners; ++c) {
      dc[c] = 0.0;
      for (const auto& e : grid.corner_stencil(l, c)) dc[c] += e.weight * d[e.dof];
    }
    for (int q = 0; q < GaussRule<Dim>::kPoints; ++q) {
      Vec<Dim> g = Vec<Dim>::Zero();
      for (int c = 0; c < kCorners; ++c) g += dc[c] * dpsi[q][c] / h;
      for (int c = 0; c < kCorners; ++c) {
        const double wq = rule.weights[q] * vol * psi[q][c];
        for (const auto& e : grid.corner_stencil(l, c)) acc.col(e.dof) += wq * e.weight * g;
      }
    }
  }
  Index degenerate = 0;
  for (Index i = 0; i < grid.num_dofs(); ++i) {
    const double len = acc.col(i).norm();
    if (len > 1e-300 && std::isfinite(len)) {
      acc.col(i) /= len;
    } else {
      acc.col(i) = Vec<Dim>::Unit(Dim - 1);
      ++degenerate;
    }
  }
  if (degenerate > 0) {
    log_warning(std::to_string(degenerate) + " nodes with vanishing distance gradient; normal set to e_" +
                std::to_string(Dim));
  }
  return acc;
}

template <int Dim>
MatrixField<Dim> compute_shape_operator(const AdaptiveGrid<Dim>& grid, const ScalarField& d, int r,
                                        double band_radius) {
  const NodeNeighborhoods<Dim> hood(grid);
  MatrixField<Dim> S(grid.num_dofs(), Mat<Dim>::Zero());
  tbb::parallel_for(Index{0}, grid.num_dofs(), [&](Index i) {
    if (!(std::abs(d[i]) <= band_radius)) return;
    const auto fit = fit_quadratic<Dim>(grid, hood, d, i, r);
    S[i] = 0.5 * (fit.hessian + fit.hessian.transpose());
  });
  return S;
}

template <int Dim>
Mat<Dim> classify(const Mat<Dim>& S_ext, const Classification& kind) {
  Eigen::SelfAdjointEigenSolver<Mat<Dim>> es(S_ext);
  if (kind.kind == Classification::Kind::Shift) {
    if (es.eigenvalues().minCoeff() + kind.parameter <= 0.0) {
      throw NumericalError("curvature shift " + std::to_string(kind.parameter) +
                           " leaves a non-positive eigenvalue");
    }
    return S_ext + kind.parameter * Mat<Dim>::Identity();
  }
  Vec<Dim> lam = es.eigenvalues().cwiseAbs().cwiseMax(kind.parameter);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

template <int Dim>
SpdRoot<Dim> spd_sqrt(const Mat<Dim>& M, double floor) {
  const double asym = (M - M.transpose()).norm();
  if (!(asym <= 1e-10 * (1.0 + M.norm()))) throw NumericalError("spd_sqrt: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat<Dim>> es(M);
  SpdRoot<Dim> out;
  Vec<Dim> lam = es.eigenvalues();
  for (int k = 0; k < Dim; ++k) {
    if (lam[k] < floor) {
      lam[k] = floor;
      out.floored = true;
    }
  }
  const auto& Q = es.eigenvectors();
  out.sqrt = Q * lam.cwiseSqrt().asDiagonal() * Q.transpose();
  out.inv_sqrt = Q * lam.cwiseSqrt().cwiseInverse().asDiagonal() * Q.transpose();
  return out;
}

template <int Dim>
SurfaceCoefficients<Dim> compute_coefficients(const AdaptiveGrid<Dim>& grid, const ScalarField& d,
                                              const Classification& kind, int r, double band_radius) {
  SurfaceCoefficients<Dim> c;
  c.normals = compute_normals(grid, d);
  c.shape = compute_shape_operator(grid, d, r, band_radius);
  const Index n = grid.num_dofs();
  c.classified.resize(n);
  c.sqrt.resize(n);
  c.inv_sqrt.resize(n);
  std::atomic<Index> floored{0};
  tbb::parallel_for(Index{0}, n, [&](Index i) {
    c.classified[i] = classify<Dim>(extend_shape_operator<Dim>(c.shape[i], c.normals.col(i)), kind);
    const auto root = spd_sqrt<Dim>(c.classified[i]);
    c.sqrt[i] = root.sqrt;
    c.inv_sqrt[i] = root.inv_sqrt;
    if (root.floored) ++floored;
  });
  c.floored = floored;
  if (c.floored > 0) log_warning(std::to_string(c.floored) + " curvature operators floored before inversion");
  return c;
}

#define SHELLMATCH_INSTANTIATE(D)                                                                              \
  template class NodeNeighborhoods<D>;                                                                         \
  template QuadraticFit<D> fit_quadratic<D>(const AdaptiveGrid<D>&, const NodeNeighborhoods<D>&,               \
                                            const ScalarField&, Index, int);                                   \
  template VectorField<D> compute_normals<D>(const AdaptiveGrid<D>&, const ScalarField&);                      \
  template MatrixField<D> compute_shape_operator<D>(const AdaptiveGrid<D>&, const ScalarField&, int, double);  \
  template Mat<D> classify<D>(const Mat<D>&, const Classification&);                                           \
  template SpdRoot<D> spd_sqrt<D>(const Mat<D>&, double);                                                      \
  template SurfaceCoefficients<D> compute_coefficients<D>(const AdaptiveGrid<D>&, const ScalarField&,          \
                                                          const Classification&, int, double);
SHELLMATCH_INSTANTIATE(2)
SHELLMATCH_INSTANTIATE(3)
#undef SHELLMATCH_INSTANTIATE

}  // namespace shellmatch
