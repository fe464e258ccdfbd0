#pragma once

#include "shellmatch/shell_energy.hpp"

#include <filesystem>
#include <vector>

namespace shellmatch {

/// Unit-speed closed curve obtained by integrating
///   p' = R sin(k xi) e_r(p) + sqrt(1 - R^2 sin^2(k xi)) e_theta(p)
/// from p(0) = (r_start, 0) over [0, 2 pi].
struct OscillationCurve {
  double R = 0.0;
  int k = 1;
  /// Starting radius chosen so that the curve closes.
  double r_start = 1.0;
  /// Radius of the weak limit, (2/pi) E(R).
  double r0 = 1.0;
  std::vector<double> xi;
  std::vector<Vec<2>> position;
  std::vector<Vec<2>> tangent;       // p'
  std::vector<Vec<2>> tangent_rate;  // p''
  double closure_gap = 0.0;          // |p(2 pi) - p(0)|
  double max_speed_error = 0.0;      // max | |p'| - 1 |
};

/// (2/pi) times the complete elliptic integral of the second kind.
double limit_radius(double R);

/// Classical fourth-order Runge-Kutta with `steps` uniform steps.
/// ConfigError unless 0 <= R < 1, k >= 1 and steps >= 8.
OscillationCurve oscillation_sequence(double R, int k, int steps = 10000);

/// Membrane energy built on the tangential Cauchy-Green tensor, for the
/// radial extension of the curve to the annulus 1 - sigma <= r <= 1 + sigma
/// around the unit circle.
double naive_membrane_energy(const OscillationCurve& curve, double sigma, const LameParams& lame = {});

/// Same energy for the weak limit phi(r, theta) = r r0 e_r.
double naive_membrane_energy_limit(double r0, double sigma, int samples = 10000, const LameParams& lame = {});

/// Mean of p' over the first period [0, 2 pi / k].
Vec<2> period_mean_tangent(const OscillationCurve& curve);

/// F(tr(B^T B), det(B^T B + e2 e2^T)) with F(a, d) = a/2 + d/2 + 1/d - 2.
double rank_one_density(const Mat<2>& B);

/// The rank-one segment B(l) = [[l, 0], [1 - l, 0]].
Mat<2> rank_one_segment(double lambda);

/// rank_one_density(rank_one_segment(lambda)).
double rank_one_probe(double lambda);

/// Columns: k,xi,x,y,speed.
void write_oscillation_csv(const std::filesystem::path& path, const std::vector<OscillationCurve>& curves);

/// One panel per curve with the limit circle drawn dashed.
void write_oscillation_svg(const std::filesystem::path& path, const std::vector<OscillationCurve>& curves);

/// Columns: lambda,t,w_f,chord, for `samples` equally spaced lambda in [0, 1].
void write_rank_one_csv(const std::filesystem::path& path, int samples);

}  // namespace shellmatch
