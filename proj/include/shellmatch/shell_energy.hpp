#pragma once

#include "shellmatch/adaptive_grid.hpp"
#include "shellmatch/surface_calculus.hpp"

#include <array>
#include <limits>

namespace shellmatch {

template <int Dim>
Mat<Dim> cofactor(const Mat<Dim>& A);

struct LameParams {
  double lambda = 1.0;
  double mu = 1.0;
};

/// Polyconvex membrane density, zero exactly on SO(n). If `grad` is given it
/// receives dW/dA.
template <int Dim>
double lame_density(const Mat<Dim>& A, const LameParams& p, Mat<Dim>* grad = nullptr);

/// Coefficients of alpha |A|^p + beta |Cof A|^q + gamma det(A)^-s.
struct FullVolumeParams {
  double p, q, s, alpha, beta, gamma;

  /// Constants that make the density stationary at the identity.
  static FullVolumeParams defaults(int dim);
  /// ConfigError unless p > n, q > n, s > (n-1) q / (q-n) and all weights > 0.
  void validate(int dim) const;
};

/// +infinity when det A <= 0.
template <int Dim>
double full_volume_density(const Mat<Dim>& A, const FullVolumeParams& p, Mat<Dim>* grad = nullptr);

/// Smooth even bump with support [-sigma, sigma] and unit integral.
class Cutoff {
 public:
  explicit Cutoff(double sigma);
  double sigma() const { return sigma_; }
  double operator()(double t) const;
  /// Normalization of the unit-width bump exp(1 - 1/(1-u^2)).
  static double normalization();

 private:
  double sigma_;
  double scale_;
};

/// P(n2) A P(n1).
template <int Dim>
Mat<Dim> tangential_derivative(const Mat<Dim>& A, const Vec<Dim>& n1, const Vec<Dim>& n2) {
  return tangent_projector<Dim>(n2) * A * tangent_projector<Dim>(n1);
}

/// P(n2) A P(n1) + n2 n1^T.
template <int Dim>
Mat<Dim> extended_tangential_derivative(const Mat<Dim>& A, const Vec<Dim>& n1, const Vec<Dim>& n2) {
  return tangential_derivative<Dim>(A, n1, n2) + n2 * n1.transpose();
}

/// P2 N^{1/2} P2 A P1 M^{-1/2} P1 + n2 n1^T from precomputed roots.
template <int Dim>
Mat<Dim> lambda_factor_roots(const Mat<Dim>& N_sqrt, const Mat<Dim>& M_inv_sqrt, const Mat<Dim>& A,
                             const Vec<Dim>& n1, const Vec<Dim>& n2) {
  const Mat<Dim> P1 = tangent_projector<Dim>(n1), P2 = tangent_projector<Dim>(n2);
  return P2 * N_sqrt * P2 * A * P1 * M_inv_sqrt * P1 + n2 * n1.transpose();
}

/// Same as lambda_factor_roots with the roots taken here. `floored`, when
/// given, is incremented for each root that needed eigenvalue flooring.
template <int Dim>
Mat<Dim> lambda_factor(const Mat<Dim>& M, const Mat<Dim>& N, const Mat<Dim>& A, const Vec<Dim>& n1,
                       const Vec<Dim>& n2, int* floored = nullptr) {
  const auto m = spd_sqrt<Dim>(M);
  const auto n = spd_sqrt<Dim>(N);
  if (floored) *floored += int(m.floored) + int(n.floored);
  return lambda_factor_roots<Dim>(n.sqrt, m.inv_sqrt, A, n1, n2);
}

enum class VolumeForm { Simplified, Full };

struct EnergyParams {
  LameParams lame;
  double delta = 0.5;
  double nu = 0.002;
  double sigma = 0.0625;
  double c_vol = 0.025;
  VolumeForm volume_form = VolumeForm::Simplified;
  FullVolumeParams full_volume = FullVolumeParams::defaults(3);
  /// Membrane argument P2 A P1 + n2 n1^T. false evaluates the density on the
  /// unprojected tangential Cauchy-Green tensor (A P1)^T A P1 + n1 n1^T
  /// instead, used for ablation runs.
  bool project_membrane_target = true;
  /// Enabled terms in the order match, membrane, bending, volume.
  std::array<bool, 4> terms{true, true, true, true};

  /// ConfigError for non-positive weights or invalid full-form exponents.
  void validate(int dim) const;
};

enum Term { kMatch = 0, kMembrane = 1, kBending = 2, kVolume = 3 };

struct EnergyReport {
  double e_match = 0.0;
  double e_mem = 0.0;
  double e_bend = 0.0;
  double e_vol = 0.0;
  double total = 0.0;

  bool finite() const { return std::isfinite(total); }
  double term(int t) const { return t == kMatch ? e_match : t == kMembrane ? e_mem : t == kBending ? e_bend : e_vol; }
};

/// Discrete energy on a fixed grid with fixed source and target coefficient
/// fields. Evaluation and gradient assembly run element-parallel with a
/// deterministic reduction.
template <int Dim>
class ShellEnergy {
 public:
  ShellEnergy(const AdaptiveGrid<Dim>& grid, ScalarField d1, SurfaceCoefficients<Dim> source, ScalarField d2,
              SurfaceCoefficients<Dim> target, EnergyParams params);

  const AdaptiveGrid<Dim>& grid() const { return *grid_; }
  const EnergyParams& params() const { return params_; }

  EnergyReport evaluate(const VectorField<Dim>& phi) const;

  /// Energy and assembled first variation: entry (k, j) is the derivative of
  /// the energy along phi + eps * psi_j e_k.
  EnergyReport evaluate(const VectorField<Dim>& phi, VectorField<Dim>& variation) const;

  /// Lumped-mass L2 gradient (variation divided by the lumped mass).
  VectorField<Dim> l2_gradient(const VectorField<Dim>& phi, EnergyReport* report = nullptr) const;

  /// Number of quadrature points inside the band.
  Index band_points() const { return static_cast<Index>(band_.size()); }

 private:
  struct BandPoint {
    double eta;
    double d1;
    Vec<Dim> n1;
    Mat<Dim> K;  // tangential inverse of the interpolated M^{1/2}
  };

  EnergyReport run(const VectorField<Dim>& phi, VectorField<Dim>* variation) const;

  const AdaptiveGrid<Dim>* grid_;
  ScalarField d1_, d2_;
  SurfaceCoefficients<Dim> source_, target_;
  EnergyParams params_;
  Cutoff eta_;
  GaussRule<Dim> rule_;
  // band_index_[leaf * kPoints + q] indexes band_, or -1 outside the band.
  std::vector<Index> band_index_;
  std::vector<BandPoint> band_;
};

}  // namespace shellmatch
