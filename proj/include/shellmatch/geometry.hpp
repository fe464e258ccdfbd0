#pragma once

#include "shellmatch/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace shellmatch {

/// Closed 2D curves; the last vertex of each loop connects back to the first.
struct PolylineSet {
  std::vector<std::vector<Vec<2>>> loops;

  Index num_segments() const;
  std::array<Vec<2>, 2> segment(Index s) const;
  Index num_vertices() const;
};

struct TriangleMesh {
  std::vector<Vec<3>> vertices;
  std::vector<std::array<int, 3>> triangles;
};

template <int Dim>
struct SurfaceOf;
template <>
struct SurfaceOf<2> {
  using type = PolylineSet;
};
template <>
struct SurfaceOf<3> {
  using type = TriangleMesh;
};
template <int Dim>
using Surface = typename SurfaceOf<Dim>::type;

/// Uniform access to the primitives (segments or triangles) of a surface.
template <int Dim>
struct Primitives {
  std::vector<std::array<Vec<Dim>, Dim>> items;

  explicit Primitives(const Surface<Dim>& s);
  Index size() const { return static_cast<Index>(items.size()); }
  double distance(Index i, const Vec<Dim>& p) const;
  /// Closed-box intersection test.
  bool intersects_box(Index i, const Vec<Dim>& lo, const Vec<Dim>& hi) const;
  void bounds(Index i, Vec<Dim>& lo, Vec<Dim>& hi) const;
};

double point_segment_distance(const Vec<2>& p, const Vec<2>& a, const Vec<2>& b);
double point_triangle_distance(const Vec<3>& p, const Vec<3>& a, const Vec<3>& b, const Vec<3>& c);
bool segment_box_overlap(const Vec<2>& a, const Vec<2>& b, const Vec<2>& lo, const Vec<2>& hi);
bool triangle_box_overlap(const Vec<3>& a, const Vec<3>& b, const Vec<3>& c, const Vec<3>& lo,
                          const Vec<3>& hi);

/// Throws GeometryError unless every undirected edge is used by exactly two
/// triangles with opposite orientation.
void check_watertight(const TriangleMesh& mesh);

/// Throws GeometryError unless every vertex lies strictly inside (0,1)^Dim.
void check_inside_unit_box(const PolylineSet& s);
void check_inside_unit_box(const TriangleMesh& m);

/// Vertex list in storage order (loops concatenated for polylines).
std::vector<Vec<2>> vertices_of(const PolylineSet& s);
std::vector<Vec<3>> vertices_of(const TriangleMesh& m);
/// Same connectivity with new vertex positions, in vertices_of order.
PolylineSet with_vertices(const PolylineSet& s, const std::vector<Vec<2>>& v);
TriangleMesh with_vertices(const TriangleMesh& m, const std::vector<Vec<3>>& v);

// File formats

/// "x,y" per line, blank line between loops, optional non-numeric header.
PolylineSet read_polyline_csv(const std::filesystem::path& path);
void write_polyline_csv(const std::filesystem::path& path, const PolylineSet& s);

/// 8-bit mask, pixel >= 128 is inside. The image is mapped to the unit box
/// (longer side = 1, centered) and contoured at pixel centers.
PolylineSet read_mask_png(const std::filesystem::path& path);
/// Marching squares on a row-major mask (row 0 is the top row).
PolylineSet contour_mask(const std::vector<std::uint8_t>& mask, int width, int height);

/// Vertices and faces only; polygons are fan triangulated.
TriangleMesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TriangleMesh& m);

/// Sum over vertices of the absolute turning angle between consecutive
/// segments; 2 pi per loop for a convex polygon.
double normal_variation(const PolylineSet& s);

// Procedural shapes

PolylineSet make_circle(const Vec<2>& center, double radius, int segments);
PolylineSet make_ellipse(const Vec<2>& center, double a, double b, double angle, int segments);
/// Square of half-width `half` with corner arcs of `radius`, rotated by
/// `angle`; vertices equally spaced in arc length starting mid-edge.
PolylineSet make_rounded_square(const Vec<2>& center, double half, double radius, double angle, int segments);
TriangleMesh make_sphere(const Vec<3>& center, double radius, int subdivisions);
/// Icosphere with radius r(1 + amplitude * sin(3u) sin(2v)) in spherical angles.
TriangleMesh make_blob(const Vec<3>& center, double radius, double amplitude, int subdivisions);
TriangleMesh make_torus(const Vec<3>& center, double major, double minor, int nu, int nv);

}  // namespace shellmatch
