#include "shellmatch/analysis_lab.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/ellint_2.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>

namespace shellmatch {

namespace {

struct Rhs {
  double R;
  int k;

  Vec<2> operator()(double xi, const Vec<2>& p) const {
    const double a = R * std::sin(k * xi);
    const double b = std::sqrt(1.0 - a * a);
    const Vec<2> er = p.normalized();
    return a * er + b * Vec<2>(-er.y(), er.x());
  }

  Vec<2> rate(double xi, const Vec<2>& p) const {
    const double a = R * std::sin(k * xi);
    const double da = R * k * std::cos(k * xi);
    const double b = std::sqrt(1.0 - a * a);
    const double db = -a * da / b;
    const double rho = p.norm();
    const double dtheta = b / rho;
    const Vec<2> er = p / rho, et(-er.y(), er.x());
    return (da - b * dtheta) * er + (db + a * dtheta) * et;
  }
};

// Integrates from (r_start, 0); returns the unwrapped turning angle of the
// position vector.
double integrate(const Rhs& f, double r_start, int steps, std::vector<Vec<2>>* path) {
  const double dxi = 2.0 * M_PI / steps;
  Vec<2> p(r_start, 0.0);
  double angle = 0.0;
  if (path) {
    path->clear();
    path->reserve(steps + 1);
    path->push_back(p);
  }
  for (int i = 0; i < steps; ++i) {
    const double x = i * dxi;
    const Vec<2> k1 = f(x, p);
    const Vec<2> k2 = f(x + 0.5 * dxi, p + 0.5 * dxi * k1);
    const Vec<2> k3 = f(x + 0.5 * dxi, p + 0.5 * dxi * k2);
    const Vec<2> k4 = f(x + dxi, p + dxi * k3);
    const Vec<2> q = p + dxi / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    angle += std::atan2(p.x() * q.y() - p.y() * q.x(), p.dot(q));
    p = q;
    if (path) path->push_back(p);
  }
  return angle;
}

// Integral over the annulus band of eta(t) W(diag(|d_theta phi|^2 / r^2, 1)) r.
template <class Tangent>
double band_energy(int samples, double sigma, const LameParams& lame, Tangent&& dtheta_phi) {
  const Cutoff eta(sigma);
  double total = 0.0;
  for (int i = 0; i < samples; ++i) {
    const auto profile = [&](double t) {
      const double r = 1.0 + t;
      const double s = dtheta_phi(i, t).squaredNorm() / (r * r);
      const Mat<2> C = Vec<2>(s, 1.0).asDiagonal();
      return eta(t) * lame_density<2>(C, lame) * r;
    };
    total += boost::math::quadrature::gauss<double, 30>::integrate(profile, -sigma, sigma);
  }
  return total * 2.0 * M_PI / samples;
}

}  // namespace

double limit_radius(double R) { return 2.0 / M_PI * boost::math::ellint_2(R); }

OscillationCurve oscillation_sequence(double R, int k, int steps) {
  if (!(R >= 0.0 && R < 1.0)) throw ConfigError("oscillation amplitude R must lie in [0, 1)");
  if (k < 1) throw ConfigError("oscillation frequency k must be at least 1");
  if (steps < 8) throw ConfigError("oscillation sampling needs at least 8 steps");
  const Rhs f{R, k};
  OscillationCurve c;
  c.R = R;
  c.k = k;
  c.r0 = limit_radius(R);

  auto excess = [&](double r) { return integrate(f, r, steps, nullptr) - 2.0 * M_PI; };
  double lo = 0.25 * c.r0, hi = 2.0 * c.r0 + 1.0;
  boost::uintmax_t iters = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      excess, lo, hi, [](double a, double b) { return std::abs(b - a) <= 1e-15 * std::abs(a); }, iters);
  c.r_start = 0.5 * (bracket.first + bracket.second);

  integrate(f, c.r_start, steps, &c.position);
  const double dxi = 2.0 * M_PI / steps;
  c.xi.resize(steps + 1);
  c.tangent.resize(steps + 1);
  c.tangent_rate.resize(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    c.xi[i] = i * dxi;
    c.tangent[i] = f(c.xi[i], c.position[i]);
    c.tangent_rate[i] = f.rate(c.xi[i], c.position[i]);
    c.max_speed_error = std::max(c.max_speed_error, std::abs(c.tangent[i].norm() - 1.0));
  }
  c.closure_gap = (c.position.back() - c.position.front()).norm();
  return c;
}

double naive_membrane_energy(const OscillationCurve& c, double sigma, const LameParams& lame) {
  const int samples = static_cast<int>(c.xi.size()) - 1;
  return band_energy(samples, sigma, lame, [&](int i, double t) {
    const Vec<2>& d = c.tangent_rate[i];
    return Vec<2>(c.tangent[i] + t * Vec<2>(d.y(), -d.x()));
  });
}

double naive_membrane_energy_limit(double r0, double sigma, int samples, const LameParams& lame) {
  return band_energy(samples, sigma, lame, [&](int i, double t) {
    const double th = 2.0 * M_PI * i / samples;
    return Vec<2>((1.0 + t) * r0 * Vec<2>(-std::sin(th), std::cos(th)));
  });
}

Vec<2> period_mean_tangent(const OscillationCurve& c) {
  const int steps = static_cast<int>(c.xi.size()) - 1;
  const double period = 2.0 * M_PI / c.k;
  Vec<2> sum = Vec<2>::Zero();
  double len = 0.0;
  for (int i = 0; i < steps && c.xi[i + 1] <= period + 1e-12; ++i) {
    const double w = c.xi[i + 1] - c.xi[i];
    sum += 0.5 * w * (c.tangent[i] + c.tangent[i + 1]);
    len += w;
  }
  return sum / len;
}

double rank_one_density(const Mat<2>& B) {
  const Mat<2> C = B.transpose() * B;
  const double a = C.trace();
  const double d = (C + Vec<2>::UnitY() * Vec<2>::UnitY().transpose()).determinant();
  return 0.5 * a + 0.5 * d + 1.0 / d - 2.0;
}

Mat<2> rank_one_segment(double lambda) {
  Mat<2> B;
  B << lambda, 0.0, 1.0 - lambda, 0.0;
  return B;
}

double rank_one_probe(double lambda) { return rank_one_density(rank_one_segment(lambda)); }

void write_oscillation_csv(const std::filesystem::path& path, const std::vector<OscillationCurve>& curves) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "k,xi,x,y,speed\n" << std::setprecision(17);
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.xi.size(); ++i) {
      out << c.k << ',' << c.xi[i] << ',' << c.position[i].x() << ',' << c.position[i].y() << ','
          << c.tangent[i].norm() << '\n';
    }
  }
}

void write_oscillation_svg(const std::filesystem::path& path, const std::vector<OscillationCurve>& curves) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const int panel = 320;
  const double extent = 1.7;
  const double scale = panel / (2.0 * extent);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << panel * curves.size() << "\" height=\"" << panel + 24
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << std::fixed << std::setprecision(3);
  for (std::size_t j = 0; j < curves.size(); ++j) {
    const auto& c = curves[j];
    const double ox = j * panel + panel / 2.0, oy = panel / 2.0;
    out << "<circle cx=\"" << ox << "\" cy=\"" << oy << "\" r=\"" << c.r0 * scale
        << "\" fill=\"none\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1\" points=\"";
    const std::size_t stride = std::max<std::size_t>(1, c.position.size() / 4000);
    for (std::size_t i = 0; i < c.position.size(); i += stride) {
      out << ox + scale * c.position[i].x() << ',' << oy - scale * c.position[i].y() << ' ';
    }
    out << ox + scale * c.position.back().x() << ',' << oy - scale * c.position.back().y() << "\"/>\n";
    out << "<text x=\"" << ox << "\" y=\"" << panel + 16 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"14\">k = " << c.k << "</text>\n";
  }
  out << "</svg>\n";
}

void write_rank_one_csv(const std::filesystem::path& path, int samples) {
  if (samples < 2) throw ConfigError("rank-one probe needs at least 2 samples");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "lambda,t,w_f,chord\n" << std::setprecision(17);
  const double w0 = rank_one_probe(0.0), w1 = rank_one_probe(1.0);
  for (int i = 0; i < samples; ++i) {
    const double l = double(i) / (samples - 1);
    const double t = l * l + (1.0 - l) * (1.0 - l);
    out << l << ',' << t << ',' << rank_one_probe(l) << ',' << (1.0 - l) * w0 + l * w1 << '\n';
  }
}

}  // namespace shellmatch
