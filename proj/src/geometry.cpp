#include "shellmatch/geometry.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace shellmatch {

Index PolylineSet::num_segments() const {
  Index n = 0;
  for (const auto& l : loops) n += static_cast<Index>(l.size());
  return n;
}

Index PolylineSet::num_vertices() const { return num_segments(); }

std::vector<Vec<2>> vertices_of(const PolylineSet& s) {
  std::vector<Vec<2>> v;
  for (const auto& l : s.loops) v.insert(v.end(), l.begin(), l.end());
  return v;
}

std::vector<Vec<3>> vertices_of(const TriangleMesh& m) { return m.vertices; }

PolylineSet with_vertices(const PolylineSet& s, const std::vector<Vec<2>>& v) {
  if (static_cast<Index>(v.size()) != s.num_vertices()) throw std::invalid_argument("vertex count mismatch");
  PolylineSet out = s;
  std::size_t k = 0;
  for (auto& l : out.loops) {
    for (auto& p : l) p = v[k++];
  }
  return out;
}

TriangleMesh with_vertices(const TriangleMesh& m, const std::vector<Vec<3>>& v) {
  if (v.size() != m.vertices.size()) throw std::invalid_argument("vertex count mismatch");
  TriangleMesh out = m;
  out.vertices = v;
  return out;
}

std::array<Vec<2>, 2> PolylineSet::segment(Index s) const {
  for (const auto& l : loops) {
    const auto n = static_cast<Index>(l.size());
    if (s < n) return {l[s], l[(s + 1) % n]};
    s -= n;
  }
  throw std::out_of_range("segment index out of range");
}

template <>
Primitives<2>::Primitives(const PolylineSet& s) {
  for (const auto& l : s.loops) {
    for (std::size_t i = 0; i < l.size(); ++i) items.push_back({l[i], l[(i + 1) % l.size()]});
  }
}

template <>
Primitives<3>::Primitives(const TriangleMesh& m) {
  items.reserve(m.triangles.size());
  for (const auto& t : m.triangles) items.push_back({m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]});
}

template <>
double Primitives<2>::distance(Index i, const Vec<2>& p) const {
  return point_segment_distance(p, items[i][0], items[i][1]);
}

template <>
double Primitives<3>::distance(Index i, const Vec<3>& p) const {
  return point_triangle_distance(p, items[i][0], items[i][1], items[i][2]);
}

template <>
bool Primitives<2>::intersects_box(Index i, const Vec<2>& lo, const Vec<2>& hi) const {
  return segment_box_overlap(items[i][0], items[i][1], lo, hi);
}

template <>
bool Primitives<3>::intersects_box(Index i, const Vec<3>& lo, const Vec<3>& hi) const {
  return triangle_box_overlap(items[i][0], items[i][1], items[i][2], lo, hi);
}

template <int Dim>
void Primitives<Dim>::bounds(Index i, Vec<Dim>& lo, Vec<Dim>& hi) const {
  lo = hi = items[i][0];
  for (int k = 1; k < Dim; ++k) {
    lo = lo.cwiseMin(items[i][k]);
    hi = hi.cwiseMax(items[i][k]);
  }
}

template struct Primitives<2>;
template struct Primitives<3>;

double point_segment_distance(const Vec<2>& p, const Vec<2>& a, const Vec<2>& b) {
  const Vec<2> ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double point_triangle_distance(const Vec<3>& p, const Vec<3>& a, const Vec<3>& b, const Vec<3>& c) {
  // Closest point by Voronoi region classification.
  const Vec<3> ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return ap.norm();
  const Vec<3> bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return bp.norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return (p - (a + d1 / (d1 - d3) * ab)).norm();
  const Vec<3> cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return cp.norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return (p - (a + d2 / (d2 - d6) * ac)).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (p - (a + v * ab + w * ac)).norm();
}

bool segment_box_overlap(const Vec<2>& a, const Vec<2>& b, const Vec<2>& lo, const Vec<2>& hi) {
  double t0 = 0.0, t1 = 1.0;
  const Vec<2> d = b - a;
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (a[k] < lo[k] || a[k] > hi[k]) return false;
      continue;
    }
    double ta = (lo[k] - a[k]) / d[k], tb = (hi[k] - a[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

bool triangle_box_overlap(const Vec<3>& a, const Vec<3>& b, const Vec<3>& c, const Vec<3>& lo,
                          const Vec<3>& hi) {
  const Vec<3> center = 0.5 * (lo + hi);
  const Vec<3> half = 0.5 * (hi - lo);
  const std::array<Vec<3>, 3> v{a - center, b - center, c - center};
  const std::array<Vec<3>, 3> e{v[1] - v[0], v[2] - v[1], v[0] - v[2]};

  auto separated = [&](const Vec<3>& axis) {
    double pmin = v[0].dot(axis), pmax = pmin;
    for (int i = 1; i < 3; ++i) {
      const double p = v[i].dot(axis);
      pmin = std::min(pmin, p);
      pmax = std::max(pmax, p);
    }
    const double r = half.dot(axis.cwiseAbs());
    return pmin > r || pmax < -r;
  };

  for (int k = 0; k < 3; ++k) {
    if (separated(Vec<3>::Unit(k))) return false;
  }
  if (separated(e[0].cross(e[1]))) return false;
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 3; ++i) {
      const Vec<3> axis = Vec<3>::Unit(k).cross(e[i]);
      if (axis.squaredNorm() > 0.0 && separated(axis)) return false;
    }
  }
  return true;
}

void check_watertight(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if (a == b) throw GeometryError("mesh has a degenerate triangle");
      ++directed[{a, b}];
    }
  }
  Index bad = 0;
  std::string example;
  for (const auto& [edge, count] : directed) {
    auto rev = directed.find({edge.second, edge.first});
    const int back = rev == directed.end() ? 0 : rev->second;
    if (count != 1 || back != 1) {
      if (bad == 0) {
        example = "edge (" + std::to_string(edge.first) + ", " + std::to_string(edge.second) + ") used " +
                  std::to_string(count) + " times forward and " + std::to_string(back) + " times backward";
      }
      ++bad;
    }
  }
  if (bad > 0) {
    throw GeometryError("mesh is not watertight and consistently oriented: " + std::to_string(bad) +
                        " bad directed edges, e.g. " + example);
  }
}

namespace {

template <int Dim, typename Range>
void check_points_inside(const Range& points, const char* what) {
  for (const auto& p : points) {
    for (int k = 0; k < Dim; ++k) {
      if (!(p[k] > 0.0 && p[k] < 1.0)) {
        std::ostringstream os;
        os << what << " vertex (" << p.transpose() << ") lies outside the open unit box";
        throw GeometryError(os.str());
      }
    }
  }
}

bool parse_number(const std::string& s, double& out) {
  std::istringstream is(s);
  is >> out;
  if (!is) return false;
  is >> std::ws;
  return is.eof();
}

}  // namespace

void check_inside_unit_box(const PolylineSet& s) {
  for (const auto& l : s.loops) check_points_inside<2>(l, "curve");
}

void check_inside_unit_box(const TriangleMesh& m) { check_points_inside<3>(m.vertices, "mesh"); }

PolylineSet read_polyline_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open " + path.string());
  PolylineSet s;
  std::vector<Vec<2>> current;
  std::string line;
  int lineno = 0;
  auto flush = [&] {
    if (current.empty()) return;
    if (current.size() > 1 && current.front() == current.back()) current.pop_back();
    if (current.size() < 3) throw GeometryError(path.string() + ": loop with fewer than 3 vertices");
    s.loops.push_back(std::move(current));
    current.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    const auto comma = line.find(',');
    double x = 0.0, y = 0.0;
    const bool ok = comma != std::string::npos && parse_number(line.substr(0, comma), x) &&
                    parse_number(line.substr(comma + 1), y);
    if (!ok) {
      if (lineno == 1) continue;  // header
      throw GeometryError(path.string() + ":" + std::to_string(lineno) + ": expected \"x,y\"");
    }
    current.emplace_back(x, y);
  }
  flush();
  if (s.loops.empty()) throw GeometryError(path.string() + ": no curve data");
  return s;
}

void write_polyline_csv(const std::filesystem::path& path, const PolylineSet& s) {
  std::ofstream out(path);
  if (!out) throw GeometryError("cannot write " + path.string());
  out.precision(17);
  out << "x,y\n";
  for (std::size_t l = 0; l < s.loops.size(); ++l) {
    if (l > 0) out << '\n';
    for (const auto& p : s.loops[l]) out << p[0] << ',' << p[1] << '\n';
  }
}

PolylineSet read_mask_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw GeometryError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw GeometryError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
  for (auto& p : pixels) p = p >= 128 ? 1 : 0;
  return contour_mask(pixels, w, h);
}

PolylineSet contour_mask(const std::vector<std::uint8_t>& mask, int width, int height) {
  if (width <= 0 || height <= 0 || mask.size() != std::size_t(width) * height) {
    throw GeometryError("mask size does not match its dimensions");
  }
  auto inside = [&](int i, int j) {
    return i >= 0 && j >= 0 && i < width && j < height && mask[std::size_t(j) * width + i] != 0;
  };
  const double scale = std::max(width, height) + 2.0;
  const double offx = (scale - width) / 2.0, offy = (scale - height) / 2.0;
  auto sample = [&](int i, int j) {
    return Vec<2>((i + 0.5 + offx) / scale, 1.0 - (j + 0.5 + offy) / scale);
  };

  // Edge ids: horizontal edge (i,j)-(i+1,j) and vertical edge (i,j)-(i,j+1),
  // with sample indices shifted by one for the padding ring.
  const long long stride = width + 3;
  auto hedge = [&](int i, int j) { return 2 * ((j + 1) * stride + (i + 1)); };
  auto vedge = [&](int i, int j) { return 2 * ((j + 1) * stride + (i + 1)) + 1; };
  auto edge_point = [&](long long id) {
    const long long base = id / 2;
    const int i = static_cast<int>(base % stride) - 1, j = static_cast<int>(base / stride) - 1;
    return (id % 2 == 0) ? Vec<2>(0.5 * (sample(i, j) + sample(i + 1, j)))
                         : Vec<2>(0.5 * (sample(i, j) + sample(i, j + 1)));
  };

  std::unordered_map<long long, std::vector<long long>> adj;
  auto link = [&](long long a, long long b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (int j = -1; j < height; ++j) {
    for (int i = -1; i < width; ++i) {
      const bool c0 = inside(i, j), c1 = inside(i + 1, j), c2 = inside(i + 1, j + 1), c3 = inside(i, j + 1);
      const long long e0 = hedge(i, j), e1 = vedge(i + 1, j), e2 = hedge(i, j + 1), e3 = vedge(i, j);
      const int code = c0 | (c1 << 1) | (c2 << 2) | (c3 << 3);
      if (code == 0 || code == 15) continue;
      if (code == 5) {
        link(e0, e3);
        link(e1, e2);
        continue;
      }
      if (code == 10) {
        link(e0, e1);
        link(e2, e3);
        continue;
      }
      std::vector<long long> crossings;
      if (c0 != c1) crossings.push_back(e0);
      if (c1 != c2) crossings.push_back(e1);
      if (c3 != c2) crossings.push_back(e2);
      if (c0 != c3) crossings.push_back(e3);
      link(crossings[0], crossings[1]);
    }
  }

  std::vector<long long> starts;
  for (const auto& [id, n] : adj) starts.push_back(id);
  std::sort(starts.begin(), starts.end());
  std::unordered_map<long long, bool> visited;
  PolylineSet s;
  for (long long start : starts) {
    if (visited[start]) continue;
    std::vector<Vec<2>> loop;
    long long prev = -1, cur = start;
    while (!visited[cur]) {
      visited[cur] = true;
      loop.push_back(edge_point(cur));
      const auto& n = adj[cur];
      const long long next = (n[0] != prev) ? n[0] : n[1];
      prev = cur;
      cur = next;
    }
    if (loop.size() >= 3) s.loops.push_back(std::move(loop));
  }
  if (s.loops.empty()) throw GeometryError("mask contains no inside pixels");
  return s;
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open " + path.string());
  TriangleMesh m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream is(line);
    std::string tag;
    if (!(is >> tag)) continue;
    if (tag == "v") {
      Vec<3> p;
      if (!(is >> p[0] >> p[1] >> p[2])) {
        throw GeometryError(path.string() + ":" + std::to_string(lineno) + ": malformed vertex");
      }
      m.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string tok;
      while (is >> tok) {
        const int idx = std::stoi(tok.substr(0, tok.find('/')));
        const int resolved = idx > 0 ? idx - 1 : static_cast<int>(m.vertices.size()) + idx;
        face.push_back(resolved);
      }
      if (face.size() < 3) throw GeometryError(path.string() + ":" + std::to_string(lineno) + ": face too small");
      for (std::size_t k = 1; k + 1 < face.size(); ++k) m.triangles.push_back({face[0], face[k], face[k + 1]});
    }
  }
  for (const auto& t : m.triangles) {
    for (int v : t) {
      if (v < 0 || v >= static_cast<int>(m.vertices.size())) {
        throw GeometryError(path.string() + ": face references a missing vertex");
      }
    }
  }
  if (m.triangles.empty()) throw GeometryError(path.string() + ": no faces");
  return m;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& m) {
  std::ofstream out(path);
  if (!out) throw GeometryError("cannot write " + path.string());
  out.precision(17);
  for (const auto& v : m.vertices) out << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const auto& t : m.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

PolylineSet make_circle(const Vec<2>& center, double radius, int segments) {
  return make_ellipse(center, radius, radius, 0.0, segments);
}

PolylineSet make_ellipse(const Vec<2>& center, double a, double b, double angle, int segments) {
  PolylineSet s;
  s.loops.emplace_back();
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int i = 0; i < segments; ++i) {
    const double t = 2.0 * std::numbers::pi * i / segments;
    const double x = a * std::cos(t), y = b * std::sin(t);
    s.loops[0].emplace_back(center[0] + ca * x - sa * y, center[1] + sa * x + ca * y);
  }
  return s;
}

PolylineSet make_rounded_square(const Vec<2>& center, double half, double radius, double angle, int segments) {
  if (!(radius > 0.0 && radius <= half)) throw GeometryError("rounded square needs 0 < radius <= half");
  const double pi = std::numbers::pi;
  const double straight = 2.0 * (half - radius), side = straight + 0.5 * pi * radius;
  const double ca = std::cos(angle), sa = std::sin(angle);
  PolylineSet s;
  s.loops.emplace_back();
  for (int i = 0; i < segments; ++i) {
    double u = 4.0 * side * i / segments;
    const int k = std::min(3, static_cast<int>(u / side));
    u -= k * side;
    const double th = 0.5 * pi * k;
    const Vec<2> d(std::cos(th), std::sin(th)), t(-std::sin(th), std::cos(th));
    Vec<2> p;
    if (u < straight) {
      p = half * d + (u - (half - radius)) * t;
    } else {
      const double a = th + (u - straight) / radius;
      p = (half - radius) * (d + t) + radius * Vec<2>(std::cos(a), std::sin(a));
    }
    s.loops[0].emplace_back(center[0] + ca * p[0] - sa * p[1], center[1] + sa * p[0] + ca * p[1]);
  }
  return s;
}

double normal_variation(const PolylineSet& s) {
  double total = 0.0;
  for (const auto& loop : s.loops) {
    const std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec<2> a = loop[(i + 1) % n] - loop[i], b = loop[(i + 2) % n] - loop[(i + 1) % n];
      total += std::abs(std::atan2(a[0] * b[1] - a[1] * b[0], a.dot(b)));
    }
  }
  return total;
}

namespace {

TriangleMesh unit_icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                 {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : m.vertices) v.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      const int id = static_cast<int>(m.vertices.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(m.triangles.size() * 4);
    for (const auto& tri : m.triangles) {
      const int a = mid(tri[0], tri[1]), b = mid(tri[1], tri[2]), c = mid(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    m.triangles = std::move(next);
  }
  return m;
}

}  // namespace

TriangleMesh make_sphere(const Vec<3>& center, double radius, int subdivisions) {
  return make_blob(center, radius, 0.0, subdivisions);
}

TriangleMesh make_blob(const Vec<3>& center, double radius, double amplitude, int subdivisions) {
  TriangleMesh m = unit_icosphere(subdivisions);
  for (auto& v : m.vertices) {
    const double u = std::atan2(v[1], v[0]);
    const double w = std::acos(std::clamp(v[2], -1.0, 1.0));
    v = center + radius * (1.0 + amplitude * std::sin(3.0 * u) * std::sin(2.0 * w)) * v;
  }
  return m;
}

TriangleMesh make_torus(const Vec<3>& center, double major, double minor, int nu, int nv) {
  TriangleMesh m;
  for (int i = 0; i < nu; ++i) {
    const double u = 2.0 * std::numbers::pi * i / nu;
    for (int j = 0; j < nv; ++j) {
      const double v = 2.0 * std::numbers::pi * j / nv;
      const double r = major + minor * std::cos(v);
      m.vertices.push_back(center + Vec<3>(r * std::cos(u), r * std::sin(u), minor * std::sin(v)));
    }
  }
  auto id = [&](int i, int j) { return ((i % nu) * nv) + (j % nv); };
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

}  // namespace shellmatch
