#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "shellmatch/adaptive_grid.hpp"

#include <random>

using namespace shellmatch;

namespace {

template <int Dim>
std::vector<Index> leaves_near_circle(const AdaptiveGrid<Dim>& g, double r) {
  std::vector<Index> marked;
  const Vec<Dim> center = Vec<Dim>::Constant(0.5);
  for (Index l = 0; l < g.num_leaves(); ++l) {
    const double h = g.leaf_size(l);
    const Vec<Dim> mid = g.leaf_origin(l) + Vec<Dim>::Constant(h / 2);
    if (std::abs((mid - center).norm() - r) <= h * std::sqrt(double(Dim)) / 2) marked.push_back(l);
  }
  return marked;
}

}  // namespace

TEST_CASE("canonical keys") {
  auto k = canonical_key<3>(3, {2, 4, 6});
  CHECK(k.level == 2);
  CHECK(k.coords == std::array<std::uint32_t, 3>{1, 2, 3});
  CHECK(canonical_key<3>(0, {0, 0, 0}) == NodeKey<3>{0, {0, 0, 0}});
  CHECK(canonical_key<3>(2, {1, 2, 3}) == NodeKey<3>{2, {1, 2, 3}});
  CHECK(canonical_key<2>(4, {16, 0}) == NodeKey<2>{0, {1, 0}});
  CHECK_THROWS_AS(canonical_key<2>(2, {5, 0}), std::out_of_range);
  CHECK_THROWS_AS(canonical_key<2>(2, {-1, 0}), std::out_of_range);
}

TEST_CASE("refining the root") {
  AdaptiveGrid<2> g;
  CHECK(g.num_leaves() == 1);
  CHECK(g.num_dofs() == 4);
  std::vector<Index> all{0};
  g.refine(all);
  CHECK(g.num_leaves() == 4);
  CHECK(g.num_dofs() == 9);
  CHECK(g.num_hanging() == 0);
}

TEST_CASE("refining one child creates half-weight hanging nodes") {
  AdaptiveGrid<2> g(1);
  const Index child = g.locate(Vec<2>(0.25, 0.25));
  std::vector<Index> marked{child};
  g.refine(marked);
  CHECK(g.num_leaves() == 7);
  CHECK(g.num_hanging() == 2);
  for (const auto& [key, stencil] : g.hanging_nodes()) {
    REQUIRE(stencil.size() == 2);
    CHECK(stencil[0].weight == 0.5);
    CHECK(stencil[1].weight == 0.5);
  }
  CHECK(g.find_hanging(NodeKey<2>{2, {1, 2}}) != nullptr);
  CHECK(g.find_hanging(NodeKey<2>{2, {2, 1}}) != nullptr);
}

TEST_CASE("locate") {
  AdaptiveGrid<2> g(2);
  auto anchor = [&](Index leaf) { return g.cell(g.leaf_cell(leaf)).anchor; };
  CHECK(anchor(g.locate(Vec<2>(0.3, 0.3))) == std::array<std::uint32_t, 2>{1, 1});
  CHECK(anchor(g.locate(Vec<2>(0.5, 0.3))) == std::array<std::uint32_t, 2>{2, 1});
  CHECK(anchor(g.locate(Vec<2>(1.2, 0.5))) == std::array<std::uint32_t, 2>{3, 2});
  CHECK(anchor(g.locate(Vec<2>(1.0, 1.0))) == std::array<std::uint32_t, 2>{3, 3});
  CHECK(anchor(g.locate(Vec<2>(-0.1, 0.0))) == std::array<std::uint32_t, 2>{0, 0});
}

TEST_CASE("refinement beyond max level throws") {
  AdaptiveGrid<2> g(2, 2);
  std::vector<Index> marked{0};
  CHECK_THROWS_AS(g.refine(marked), std::length_error);
}

template <int Dim>
void check_linear_reproduction() {
  AdaptiveGrid<Dim> g(2);
  for (int i = 0; i < 3; ++i) g.refine(leaves_near_circle(g, 0.3));
  REQUIRE(g.num_hanging() > 0);
  Vec<Dim> a;
  for (int k = 0; k < Dim; ++k) a[k] = 0.3 + k;
  ScalarField f(g.num_dofs());
  for (Index i = 0; i < g.num_dofs(); ++i) f[i] = 2.0 + a.dot(g.dof_position(i));
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 500; ++s) {
    Vec<Dim> x;
    for (int k = 0; k < Dim; ++k) x[k] = u(rng);
    CHECK(g.evaluate(f, x) == doctest::Approx(2.0 + a.dot(x)).epsilon(1e-12));
    CHECK((g.evaluate_gradient(f, x) - a).norm() < 1e-10);
  }
  ScalarField c = ScalarField::Constant(g.num_dofs(), 4.0);
  CHECK(g.evaluate_gradient(c, Vec<Dim>::Constant(0.37)).norm() < 1e-12);
}

TEST_CASE("linear reproduction") {
  check_linear_reproduction<2>();
  check_linear_reproduction<3>();
}

template <int Dim>
void check_hanging_conformity_and_balance(int base, int rounds, double offset) {
  AdaptiveGrid<Dim> g(base);
  for (int i = 0; i < rounds; ++i) {
    g.refine(leaves_near_circle(g, 0.27));
    CHECK(g.is_balanced());
  }
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScalarField f(g.num_dofs());
  for (auto& v : f) v = u(rng);
  for (const auto& [key, stencil] : g.hanging_nodes()) {
    double sum = 0.0, combo = 0.0;
    for (const auto& e : stencil) {
      sum += e.weight;
      combo += e.weight * f[e.dof];
      CHECK(g.find_hanging(g.dof_key(e.dof)) == nullptr);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.evaluate(f, key.position()) == doctest::Approx(combo).epsilon(1e-12));
  }
  double lo = f.minCoeff(), hi = f.maxCoeff();
  // Two-sided sampling across every facet between leaves of different level.
  for (Index l = 0; l < g.num_leaves(); ++l) {
    const double h = g.leaf_size(l);
    const Vec<Dim> o = g.leaf_origin(l);
    for (int a = 0; a < Dim; ++a) {
      if (o[a] == 0.0) continue;
      for (int s = 0; s < 4; ++s) {
        Vec<Dim> x = o;
        for (int b = 0; b < Dim; ++b) {
          if (b != a) x[b] += h * (0.5 + 0.5 * u(rng));
        }
        Vec<Dim> lower = x, upper = x;
        lower[a] -= offset;
        upper[a] += offset;
        CHECK(std::abs(g.evaluate(f, lower) - g.evaluate(f, upper)) < 1e-5 * (hi - lo));
      }
    }
  }
}

TEST_CASE("conformity and balance") {
  check_hanging_conformity_and_balance<2>(1, 1, 1e-6);
  check_hanging_conformity_and_balance<3>(1, 1, 1e-6);
  check_hanging_conformity_and_balance<2>(2, 3, 1e-9);
  check_hanging_conformity_and_balance<3>(2, 3, 1e-9);
}

TEST_CASE("dof indices are stable and prolongation is exact") {
  AdaptiveGrid<2> g(3);
  g.refine(leaves_near_circle(g, 0.3));
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScalarField f(g.num_dofs());
  for (auto& v : f) v = u(rng);
  std::vector<NodeKey<2>> keys;
  for (Index i = 0; i < g.num_dofs(); ++i) keys.push_back(g.dof_key(i));
  AdaptiveGrid<2> fine = g;
  fine.refine(leaves_near_circle(fine, 0.3));
  for (Index i = 0; i < g.num_dofs(); ++i) CHECK(fine.dof_key(i) == keys[i]);
  ScalarField pf = prolongate(g, fine, f);
  for (int s = 0; s < 300; ++s) {
    Vec<2> x(0.5 + 0.5 * u(rng), 0.5 + 0.5 * u(rng));
    CHECK(fine.evaluate(pf, x) == doctest::Approx(g.evaluate(f, x)).epsilon(1e-13));
  }
  VectorField<2> id = identity_field(g);
  VectorField<2> pid = prolongate(g, fine, id);
  CHECK((pid - identity_field(fine)).norm() < 1e-14);
}

TEST_CASE("lumped mass integrates the basis") {
  AdaptiveGrid<3> g(1);
  g.refine(leaves_near_circle(g, 0.3));
  CHECK(g.lumped_mass().sum() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(g.lumped_mass().minCoeff() > 0.0);
}

TEST_CASE("axis neighbors skip hanging nodes") {
  AdaptiveGrid<2> g(1);
  std::vector<Index> marked{g.locate(Vec<2>(0.25, 0.25))};
  g.refine(marked);
  const Index center = *g.find_dof(NodeKey<2>{1, {1, 1}});
  const auto& nb = g.axis_neighbors(center);
  CHECK(g.dof_key(nb[0].dof) == NodeKey<2>{1, {0, 1}});
  CHECK(nb[0].spacing == 0.5);
  CHECK(g.dof_key(nb[2].dof) == NodeKey<2>{1, {1, 0}});
  const Index inner = *g.find_dof(NodeKey<2>{2, {1, 1}});
  CHECK(g.dof_key(g.axis_neighbors(inner)[0].dof) == NodeKey<2>{2, {0, 1}});
  CHECK(g.axis_neighbors(inner)[2].spacing == 0.25);
  CHECK(g.axis_neighbors(inner)[1].dof == -1);
  const Index hanging_side = *g.find_dof(NodeKey<2>{1, {1, 0}});
  CHECK(g.axis_neighbors(hanging_side)[3].dof == center);
}

TEST_CASE("adaptive refinement grows slower than uniform") {
  AdaptiveGrid<2> g(4);
  std::vector<double> counts{double(g.num_dofs())};
  for (int level = 5; level <= 8; ++level) {
    std::vector<Index> marked;
    for (Index l : leaves_near_circle(g, 0.3)) {
      if (g.leaf_level(l) == level - 1) marked.push_back(l);
    }
    g.refine(marked);
    counts.push_back(double(g.num_dofs()));
  }
  const double growth = std::pow(counts.back() / counts[1], 1.0 / 3.0);
  MESSAGE("2D growth factor per level: " << growth);
  CHECK(growth > 1.5);
  CHECK(growth < 2.6);
}
