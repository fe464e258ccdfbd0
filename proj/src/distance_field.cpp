#include "shellmatch/distance_field.hpp"

#include "shellmatch/log.hpp"
#include "shellmatch/surface_calculus.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <tbb/parallel_for.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <queue>
#include <unordered_map>

namespace shellmatch {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

/// Nearest-primitive queries through an R-tree over primitive bounding boxes.
template <int Dim>
class PrimitiveIndex {
 public:
  explicit PrimitiveIndex(const Primitives<Dim>& prims) : prims_(prims) {
    std::vector<Value> values;
    values.reserve(prims.size());
    for (Index i = 0; i < prims.size(); ++i) {
      Vec<Dim> lo, hi;
      prims.bounds(i, lo, hi);
      values.emplace_back(Box(to_point(lo), to_point(hi)), i);
    }
    tree_ = Tree(values.begin(), values.end());
  }

  double min_distance(const Vec<Dim>& p) const {
    const Point q = to_point(p);
    std::vector<Value> hits;
    tree_.query(bgi::nearest(q, 1), std::back_inserter(hits));
    double best = prims_.distance(hits.front().second, p);
    const Vec<Dim> r = Vec<Dim>::Constant(best);
    hits.clear();
    tree_.query(bgi::intersects(Box(to_point(p - r), to_point(p + r))), std::back_inserter(hits));
    for (const auto& h : hits) best = std::min(best, prims_.distance(h.second, p));
    return best;
  }

 private:
  using Point = bg::model::point<double, Dim, bg::cs::cartesian>;
  using Box = bg::model::box<Point>;
  using Value = std::pair<Box, Index>;
  using Tree = bgi::rtree<Value, bgi::rstar<16>>;

  static Point to_point(const Vec<Dim>& x) {
    Point p;
    bg::set<0>(p, x[0]);
    bg::set<1>(p, x[1]);
    if constexpr (Dim == 3) bg::set<2>(p, x[2]);
    return p;
  }

  const Primitives<Dim>& prims_;
  Tree tree_;
};

}  // namespace

template <int Dim>
BandSeed initialize_band(const Surface<Dim>& surface, const AdaptiveGrid<Dim>& grid, int margin_cells) {
  const Primitives<Dim> prims(surface);
  std::vector<char> hit(grid.num_leaves(), 0);

  auto box = [&](Index c, Vec<Dim>& lo, Vec<Dim>& hi) {
    const auto& cell = grid.cell(c);
    const double h = std::ldexp(1.0, -cell.level);
    for (int a = 0; a < Dim; ++a) {
      lo[a] = cell.anchor[a] * h;
      hi[a] = (cell.anchor[a] + 1) * h;
    }
  };

  // Map cell index to leaf index once.
  std::vector<Index> leaf_of_cell(grid.num_cells(), -1);
  for (Index l = 0; l < grid.num_leaves(); ++l) leaf_of_cell[grid.leaf_cell(l)] = l;

  std::vector<Index> stack;
  for (Index p = 0; p < prims.size(); ++p) {
    stack.assign(1, 0);
    while (!stack.empty()) {
      const Index c = stack.back();
      stack.pop_back();
      Vec<Dim> lo, hi;
      box(c, lo, hi);
      if (!prims.intersects_box(p, lo, hi)) continue;
      const auto& cell = grid.cell(c);
      if (cell.is_leaf()) {
        hit[leaf_of_cell[c]] = 1;
      } else {
        for (int k = 0; k < AdaptiveGrid<Dim>::kCorners; ++k) stack.push_back(cell.first_child + k);
      }
    }
  }

  const int m = static_cast<int>(margin_cells);
  if (m > 0) {
    std::vector<char> grown = hit;
    std::array<int, Dim> off;
    for (Index l = 0; l < grid.num_leaves(); ++l) {
      if (!hit[l]) continue;
      const double h = grid.leaf_size(l);
      const Vec<Dim> mid = grid.leaf_origin(l) + Vec<Dim>::Constant(0.5 * h);
      off.fill(-m);
      for (;;) {
        Vec<Dim> x = mid;
        bool inside = true;
        for (int a = 0; a < Dim; ++a) {
          x[a] += off[a] * h;
          inside = inside && x[a] > 0.0 && x[a] < 1.0;
        }
        if (inside) grown[grid.locate(x)] = 1;
        int a = 0;
        while (a < Dim && off[a] == m) off[a++] = -m;
        if (a == Dim) break;
        ++off[a];
      }
    }
    hit.swap(grown);
  }

  std::vector<char> in_band(grid.num_dofs(), 0);
  for (Index l = 0; l < grid.num_leaves(); ++l) {
    if (!hit[l]) continue;
    for (int c = 0; c < AdaptiveGrid<Dim>::kCorners; ++c) {
      const auto st = grid.corner_stencil(l, c);
      if (st.size() == 1 && st[0].weight == 1.0) in_band[st[0].dof] = 1;
    }
  }

  BandSeed seed;
  for (Index i = 0; i < grid.num_dofs(); ++i) {
    if (in_band[i]) seed.dofs.push_back(i);
  }
  if (seed.dofs.empty()) throw GeometryError("surface does not meet the grid");

  const PrimitiveIndex<Dim> index(prims);
  seed.distances.resize(seed.dofs.size());
  tbb::parallel_for(std::size_t{0}, seed.dofs.size(), [&](std::size_t k) {
    seed.distances[k] = index.min_distance(grid.dof_position(seed.dofs[k]));
  });
  return seed;
}

template <int Dim>
ScalarField fast_march(const AdaptiveGrid<Dim>& grid, const BandSeed& seed, std::vector<Index>* acceptance_order) {
  if (seed.dofs.empty()) throw std::invalid_argument("fast_march: empty seed");
  enum : char { kFar = 0, kTrial = 1, kAccepted = 2 };
  const Index n = grid.num_dofs();
  const double inf = std::numeric_limits<double>::infinity();
  ScalarField u = ScalarField::Constant(n, inf);
  std::vector<char> state(n, kFar), frozen(n, 0);
  using Entry = std::pair<double, Index>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (std::size_t k = 0; k < seed.dofs.size(); ++k) {
    const Index i = seed.dofs[k];
    u[i] = std::min(u[i], seed.distances[k]);
    frozen[i] = 1;
    state[i] = kTrial;
  }
  for (Index i : seed.dofs) heap.emplace(u[i], i);
  if (acceptance_order) acceptance_order->clear();

  auto solve = [&](Index i) {
    std::array<std::pair<double, double>, Dim> terms;  // (U, h)
    int m = 0;
    const auto& nb = grid.axis_neighbors(i);
    for (int a = 0; a < Dim; ++a) {
      double best = inf, best_h = 0.0;
      for (int s = 0; s < 2; ++s) {
        const auto& e = nb[2 * a + s];
        if (e.dof < 0 || state[e.dof] != kAccepted) continue;
        if (u[e.dof] + e.spacing < best + best_h) {
          best = u[e.dof];
          best_h = e.spacing;
        }
      }
      if (std::isfinite(best)) terms[m++] = {best, best_h};
    }
    std::sort(terms.begin(), terms.begin() + m);
    double value = inf;
    double sw = 0.0, swu = 0.0, swu2 = 0.0;
    for (int k = 0; k < m; ++k) {
      const auto [U, h] = terms[k];
      if (U >= value) break;
      const double w = 1.0 / (h * h);
      sw += w;
      swu += w * U;
      swu2 += w * U * U;
      const double disc = swu * swu - sw * (swu2 - 1.0);
      if (disc < 0.0) break;
      value = (swu + std::sqrt(disc)) / sw;
    }
    return value;
  };

  while (!heap.empty()) {
    const auto [v, i] = heap.top();
    heap.pop();
    if (state[i] == kAccepted || v != u[i]) continue;
    state[i] = kAccepted;
    if (acceptance_order) acceptance_order->push_back(i);
    for (const auto& e : grid.axis_neighbors(i)) {
      const Index j = e.dof;
      if (j < 0 || state[j] == kAccepted || frozen[j]) continue;
      const double cand = solve(j);
      if (cand < u[j]) {
        u[j] = cand;
        state[j] = kTrial;
        heap.emplace(cand, j);
      }
    }
  }

  Index unreached = 0;
  for (Index i = 0; i < n; ++i) unreached += state[i] != kAccepted;
  if (unreached > 0) {
    // Nodes without an axis path to the band take a value from any node that
    // has one, one sweep at a time.
    log_debug(std::to_string(unreached) + " nodes not reached by marching; filled from neighbors");
    // Isolated DOFs (all axis neighbors hanging) read the hanging neighbors
    // through their interpolation stencils.
    BasisEval<Dim> b;
    bool changed = true;
    while (changed) {
      changed = false;
      for (Index i = 0; i < n; ++i) {
        if (state[i] == kAccepted) continue;
        double best = inf;
        for (const auto& e : grid.axis_neighbors(i)) {
          if (e.dof >= 0 && state[e.dof] == kAccepted) best = std::min(best, u[e.dof] + e.spacing);
        }
        const Vec<Dim> x = grid.dof_position(i);
        const double h = grid.node_size(i);
        for (int a = 0; a < 2 * Dim; ++a) {
          Vec<Dim> q = x;
          q[a / 2] += (a % 2 ? h : -h);
          if (q[a / 2] < 0.0 || q[a / 2] > 1.0) continue;
          grid.basis_at(q, b);
          bool ready = true;
          double v = 0.0;
          for (const auto& t : b.terms) {
            if (t.value == 0.0) continue;
            ready = ready && state[t.dof] == kAccepted;
            v += t.value * u[t.dof];
          }
          if (ready) best = std::min(best, v + h);
        }
        if (std::isfinite(best)) {
          u[i] = best;
          state[i] = kAccepted;
          changed = true;
        }
      }
    }
    for (Index i = 0; i < n; ++i) {
      if (state[i] != kAccepted) throw NumericalError("distance field has isolated nodes");
    }
  }
  return u;
}

InsideTest2::InsideTest2(const PolylineSet& s) {
  const Primitives<2> prims(s);
  segments_ = prims.items;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& seg : segments_) {
    lo = std::min({lo, seg[0][1], seg[1][1]});
    hi = std::max({hi, seg[0][1], seg[1][1]});
  }
  const int nb = std::max(1, static_cast<int>(std::sqrt(double(segments_.size()))));
  y0_ = lo;
  dy_ = std::max((hi - lo) / nb, 1e-300);
  buckets_.assign(nb, {});
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const double a = std::min(segments_[i][0][1], segments_[i][1][1]);
    const double b = std::max(segments_[i][0][1], segments_[i][1][1]);
    const int ia = std::clamp(static_cast<int>((a - y0_) / dy_), 0, nb - 1);
    const int ib = std::clamp(static_cast<int>((b - y0_) / dy_), 0, nb - 1);
    for (int k = ia; k <= ib; ++k) buckets_[k].push_back(static_cast<int>(i));
  }
}

bool InsideTest2::inside(const Vec<2>& x) const {
  const int nb = static_cast<int>(buckets_.size());
  const double t = (x[1] - y0_) / dy_;
  if (t < 0.0 || t > nb) return false;
  const int k = std::clamp(static_cast<int>(t), 0, nb - 1);
  bool in = false;
  for (int i : buckets_[k]) {
    const Vec<2>& a = segments_[i][0];
    const Vec<2>& b = segments_[i][1];
    if ((a[1] > x[1]) == (b[1] > x[1])) continue;
    const double xi = a[0] + (x[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
    if (xi > x[0]) in = !in;
  }
  return in;
}

InsideTest3::InsideTest3(const TriangleMesh& m) {
  check_watertight(m);
  const Primitives<3> prims(m);
  triangles_ = prims.items;
  Vec<2> lo = Vec<2>::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (const auto& t : triangles_) {
    for (const auto& v : t) {
      lo = lo.cwiseMin(v.tail<2>());
      hi = hi.cwiseMax(v.tail<2>());
    }
  }
  res_ = std::clamp(static_cast<int>(std::sqrt(double(triangles_.size()))), 1, 256);
  lo_ = lo;
  cell_ = ((hi - lo) / res_).cwiseMax(Vec<2>::Constant(1e-300));
  buckets_.assign(std::size_t(res_) * res_, {});
  for (std::size_t i = 0; i < triangles_.size(); ++i) {
    Vec<2> a = triangles_[i][0].tail<2>(), b = a;
    for (int k = 1; k < 3; ++k) {
      a = a.cwiseMin(triangles_[i][k].tail<2>());
      b = b.cwiseMax(triangles_[i][k].tail<2>());
    }
    const int y0 = std::clamp(static_cast<int>((a[0] - lo_[0]) / cell_[0]), 0, res_ - 1);
    const int y1 = std::clamp(static_cast<int>((b[0] - lo_[0]) / cell_[0]), 0, res_ - 1);
    const int z0 = std::clamp(static_cast<int>((a[1] - lo_[1]) / cell_[1]), 0, res_ - 1);
    const int z1 = std::clamp(static_cast<int>((b[1] - lo_[1]) / cell_[1]), 0, res_ - 1);
    for (int y = y0; y <= y1; ++y) {
      for (int z = z0; z <= z1; ++z) buckets_[std::size_t(z) * res_ + y].push_back(static_cast<int>(i));
    }
  }
}

bool InsideTest3::inside(const Vec<3>& x) const {
  const Vec<2> q = x.tail<2>();
  const double ty = (q[0] - lo_[0]) / cell_[0], tz = (q[1] - lo_[1]) / cell_[1];
  if (ty < 0.0 || tz < 0.0 || ty > res_ || tz > res_) return false;
  const int y = std::min(static_cast<int>(ty), res_ - 1), z = std::min(static_cast<int>(tz), res_ - 1);
  auto cross = [](const Vec<2>& a, const Vec<2>& b, const Vec<2>& p) {
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
  };
  // Ties on shared edges go to exactly one of the two triangles.
  auto owns_edge = [](const Vec<2>& a, const Vec<2>& b) {
    return b[1] > a[1] || (b[1] == a[1] && b[0] < a[0]);
  };
  bool in = false;
  for (int i : buckets_[std::size_t(z) * res_ + y]) {
    std::array<Vec<3>, 3> t = triangles_[i];
    std::array<Vec<2>, 3> p{t[0].tail<2>(), t[1].tail<2>(), t[2].tail<2>()};
    double area = cross(p[0], p[1], p[2]);
    if (area == 0.0) continue;
    if (area < 0.0) {
      std::swap(p[1], p[2]);
      std::swap(t[1], t[2]);
      area = -area;
    }
    std::array<double, 3> lam;
    bool covered = true;
    for (int k = 0; k < 3 && covered; ++k) {
      const Vec<2>& a = p[(k + 1) % 3];
      const Vec<2>& b = p[(k + 2) % 3];
      const double e = cross(a, b, q);
      covered = e > 0.0 || (e == 0.0 && owns_edge(a, b));
      lam[k] = e / area;
    }
    if (!covered) continue;
    const double xi = lam[0] * t[0][0] + lam[1] * t[1][0] + lam[2] * t[2][0];
    if (xi > x[0]) in = !in;
  }
  return in;
}

template <int Dim>
ScalarField apply_sign(const AdaptiveGrid<Dim>& grid, const ScalarField& unsigned_distance,
                       const Surface<Dim>& surface) {
  const InsideTest<Dim> test(surface);
  ScalarField d = unsigned_distance;
  tbb::parallel_for(Index{0}, grid.num_dofs(), [&](Index i) {
    if (test.inside(grid.dof_position(i))) d[i] = -d[i];
  });
  return d;
}

template <int Dim>
double singularity_clearance(const AdaptiveGrid<Dim>& grid, const ScalarField& d, double search_radius) {
  const NodeNeighborhoods<Dim> hood(grid);
  double clearance = std::numeric_limits<double>::infinity();
  std::mutex m;
  tbb::parallel_for(Index{0}, grid.num_dofs(), [&](Index i) {
    if (!(std::abs(d[i]) <= search_radius)) return;
    const double h = grid.node_size(i);
    const auto fit = fit_quadratic<Dim>(grid, hood, d, i);
    const Mat<Dim> H = 0.5 * (fit.hessian + fit.hessian.transpose());
    const double top = Eigen::SelfAdjointEigenSolver<Mat<Dim>>(H, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    if (top > 1.0 / (2.0 * h)) {
      std::lock_guard lock(m);
      clearance = std::min(clearance, std::abs(d[i]));
    }
  });
  return clearance;
}

template <int Dim>
SignedDistanceField<Dim> signed_distance(const Surface<Dim>& surface, const AdaptiveGrid<Dim>& grid,
                                         const DistanceOptions& options) {
  SignedDistanceField<Dim> f;
  const BandSeed seed = initialize_band<Dim>(surface, grid, options.margin_cells);
  f.values = apply_sign<Dim>(grid, fast_march<Dim>(grid, seed), surface);
  if (options.clearance_radius > 0.0) f.clearance = singularity_clearance<Dim>(grid, f.values, options.clearance_radius);
  return f;
}

#define SHELLMATCH_INSTANTIATE(D)                                                                                  \
  template BandSeed initialize_band<D>(const Surface<D>&, const AdaptiveGrid<D>&, int);                       \
  template ScalarField fast_march<D>(const AdaptiveGrid<D>&, const BandSeed&, std::vector<Index>*);              \
  template ScalarField apply_sign<D>(const AdaptiveGrid<D>&, const ScalarField&, const Surface<D>&);             \
  template double singularity_clearance<D>(const AdaptiveGrid<D>&, const ScalarField&, double);                  \
  template SignedDistanceField<D> signed_distance<D>(const Surface<D>&, const AdaptiveGrid<D>&,                  \
                                                     const DistanceOptions&);
SHELLMATCH_INSTANTIATE(2)
SHELLMATCH_INSTANTIATE(3)
#undef SHELLMATCH_INSTANTIATE

}  // namespace shellmatch
