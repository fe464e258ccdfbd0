#include "shellmatch/shell_energy.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <cmath>

namespace shellmatch {

template <int Dim>
Mat<Dim> cofactor(const Mat<Dim>& A) {
  Mat<Dim> C;
  if constexpr (Dim == 2) {
    C << A(1, 1), -A(1, 0), -A(0, 1), A(0, 0);
  } else {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const int i1 = (i + 1) % 3, i2 = (i + 2) % 3, j1 = (j + 1) % 3, j2 = (j + 2) % 3;
        C(i, j) = A(i1, j1) * A(i2, j2) - A(i1, j2) * A(i2, j1);
      }
    }
  }
  return C;
}

template <int Dim>
double lame_density(const Mat<Dim>& A, const LameParams& p, Mat<Dim>* grad) {
  const double det = A.determinant();
  const double e = std::exp(-(det - 1.0));
  const double k = p.mu + 0.5 * p.lambda;
  if (grad) *grad = p.mu * A + (0.5 * p.lambda * det - k * e) * cofactor<Dim>(A);
  return 0.5 * p.mu * A.squaredNorm() + 0.25 * p.lambda * det * det + k * e - 0.5 * (Dim + 2) * p.mu -
         0.75 * p.lambda;
}

FullVolumeParams FullVolumeParams::defaults(int dim) {
  if (dim == 2) return {3.0, 3.0, 4.0, 2.0, 2.0, 3.0 * std::sqrt(2.0)};
  return {4.0, 4.0, 9.0, 1.0, 1.0, 4.0};
}

void FullVolumeParams::validate(int dim) const {
  const double n = dim;
  if (!(alpha > 0 && beta > 0 && gamma > 0)) throw ConfigError("full volume density needs positive weights");
  if (!(p > n && q > n)) throw ConfigError("full volume density needs p > n and q > n");
  if (!(s > (n - 1.0) * q / (q - n))) throw ConfigError("full volume density needs s > (n-1) q / (q-n)");
}

template <int Dim>
double full_volume_density(const Mat<Dim>& A, const FullVolumeParams& p, Mat<Dim>* grad) {
  const double det = A.determinant();
  if (!(det > 0.0)) return std::numeric_limits<double>::infinity();
  const Mat<Dim> C = cofactor<Dim>(A);
  const double a2 = A.squaredNorm(), c2 = C.squaredNorm();
  if (grad) {
    // d|Cof A|^2 / dA
    Mat<Dim> dc2;
    if constexpr (Dim == 2) {
      dc2 = 2.0 * A;
    } else {
      const Mat<Dim> B = A.transpose() * A;
      dc2 = 2.0 * (B.trace() * A - A * B);
    }
    *grad = p.alpha * p.p * std::pow(a2, 0.5 * p.p - 1.0) * A +
            p.beta * 0.5 * p.q * std::pow(c2, 0.5 * p.q - 1.0) * dc2 -
            p.gamma * p.s * std::pow(det, -p.s - 1.0) * C;
  }
  return p.alpha * std::pow(a2, 0.5 * p.p) + p.beta * std::pow(c2, 0.5 * p.q) + p.gamma * std::pow(det, -p.s);
}

Cutoff::Cutoff(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0)) throw ConfigError("cutoff width must be positive");
  scale_ = normalization() / sigma;
}

double Cutoff::normalization() {
  static const double c = [] {
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double mass = integrator.integrate(
        [](double u) { return std::exp(1.0 - 1.0 / ((1.0 - u) * (1.0 + u))); }, -1.0, 1.0);
    return 1.0 / mass;
  }();
  return c;
}

double Cutoff::operator()(double t) const {
  const double u = t / sigma_;
  if (!(std::abs(u) < 1.0)) return 0.0;
  return scale_ * std::exp(1.0 - 1.0 / ((1.0 - u) * (1.0 + u)));
}

void EnergyParams::validate(int dim) const {
  if (!(lame.lambda > 0 && lame.mu > 0)) throw ConfigError("Lame constants must be positive");
  if (!(delta > 0)) throw ConfigError("shell thickness must be positive");
  if (!(nu > 0)) throw ConfigError("penalty parameter must be positive");
  if (!(sigma > 0)) throw ConfigError("band width must be positive");
  if (volume_form == VolumeForm::Simplified && !(c_vol > 0)) throw ConfigError("volume weight must be positive");
  if (volume_form == VolumeForm::Full) full_volume.validate(dim);
}

namespace {

template <int Dim>
struct ReferenceTables {
  static constexpr int kC = 1 << Dim;
  static constexpr int kQ = GaussRule<Dim>::kPoints;
  GaussRule<Dim> rule;
  std::array<std::array<double, kC>, kQ> psi;
  std::array<std::array<Vec<Dim>, kC>, kQ> dpsi;

  ReferenceTables() {
    for (int q = 0; q < kQ; ++q) reference_basis<Dim>(rule.points[q], psi[q], dpsi[q]);
  }
};

template <int Dim>
const ReferenceTables<Dim>& tables() {
  static const ReferenceTables<Dim> t;
  return t;
}

template <int Dim>
Vec<Dim> project_to_box(const Vec<Dim>& y, std::array<bool, Dim>& clamped) {
  Vec<Dim> z = y;
  for (int a = 0; a < Dim; ++a) {
    clamped[a] = !(y[a] >= 0.0 && y[a] <= 1.0);
    z[a] = std::clamp(y[a], 0.0, 1.0);
  }
  return z;
}

}  // namespace

template <int Dim>
ShellEnergy<Dim>::ShellEnergy(const AdaptiveGrid<Dim>& grid, ScalarField d1, SurfaceCoefficients<Dim> source,
                              ScalarField d2, SurfaceCoefficients<Dim> target, EnergyParams params)
    : grid_(&grid),
      d1_(std::move(d1)),
      d2_(std::move(d2)),
      source_(std::move(source)),
      target_(std::move(target)),
      params_(params),
      eta_(params.sigma) {
  params_.validate(Dim);
  const Index n = grid.num_dofs();
  auto check = [n](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("energy field size mismatch: ") + what);
  };
  check(d1_.size() == n && d2_.size() == n, "distance");
  check(source_.normals.cols() == n && target_.normals.cols() == n, "normals");
  check(Index(source_.sqrt.size()) == n && Index(target_.sqrt.size()) == n, "curvature");

  const auto& T = tables<Dim>();
  constexpr int kC = ReferenceTables<Dim>::kC, kQ = ReferenceTables<Dim>::kQ;
  band_index_.assign(grid.num_leaves() * kQ, -1);
  for (Index l = 0; l < grid.num_leaves(); ++l) {
    std::array<double, kC> dc;
    std::array<Vec<Dim>, kC> nc;
    std::array<Mat<Dim>, kC> mc;
    for (int c = 0; c < kC; ++c) {
      dc[c] = 0.0;
      nc[c].setZero();
      mc[c].setZero();
      for (const auto& e : grid.corner_stencil(l, c)) {
        dc[c] += e.weight * d1_[e.dof];
        nc[c] += e.weight * source_.normals.col(e.dof);
        mc[c] += e.weight * source_.sqrt[e.dof];
      }
    }
    for (int q = 0; q < kQ; ++q) {
      double dx = 0.0;
      for (int c = 0; c < kC; ++c) dx += T.psi[q][c] * dc[c];
      const double eta = eta_(dx);
      if (eta <= 0.0) continue;
      BandPoint bp;
      bp.eta = eta;
      bp.d1 = dx;
      Vec<Dim> n1 = Vec<Dim>::Zero();
      Mat<Dim> Msqrt = Mat<Dim>::Zero();
      for (int c = 0; c < kC; ++c) {
        n1 += T.psi[q][c] * nc[c];
        Msqrt += T.psi[q][c] * mc[c];
      }
      const double len = n1.norm();
      bp.n1 = len > 0.0 ? Vec<Dim>(n1 / len) : Vec<Dim>::Unit(Dim - 1);
      const Mat<Dim> P1 = tangent_projector<Dim>(bp.n1);
      const Mat<Dim> nn = bp.n1 * bp.n1.transpose();
      bp.K = P1 * (P1 * Msqrt * P1 + nn).inverse() * P1;
      band_index_[l * kQ + q] = static_cast<Index>(band_.size());
      band_.push_back(bp);
    }
  }
}

template <int Dim>
EnergyReport ShellEnergy<Dim>::evaluate(const VectorField<Dim>& phi) const {
  return run(phi, nullptr);
}

template <int Dim>
EnergyReport ShellEnergy<Dim>::evaluate(const VectorField<Dim>& phi, VectorField<Dim>& variation) const {
  return run(phi, &variation);
}

template <int Dim>
VectorField<Dim> ShellEnergy<Dim>::l2_gradient(const VectorField<Dim>& phi, EnergyReport* report) const {
  VectorField<Dim> g;
  const EnergyReport r = run(phi, &g);
  if (report) *report = r;
  const auto& mass = grid_->lumped_mass();
  for (Index i = 0; i < g.cols(); ++i) g.col(i) /= mass[i];
  return g;
}

template <int Dim>
EnergyReport ShellEnergy<Dim>::run(const VectorField<Dim>& phi, VectorField<Dim>* variation) const {
  const AdaptiveGrid<Dim>& grid = *grid_;
  if (phi.cols() != grid.num_dofs()) throw std::invalid_argument("deformation size does not match the grid");
  const auto& T = tables<Dim>();
  constexpr int kC = ReferenceTables<Dim>::kC, kQ = ReferenceTables<Dim>::kQ;
  const Index L = grid.num_leaves();
  const EnergyParams& P = params_;
  const bool want_grad = variation != nullptr;
  const bool band_terms = P.terms[kMatch] || P.terms[kMembrane] || P.terms[kBending];
  const double delta3 = P.delta * P.delta * P.delta;

  std::vector<std::array<double, 4>> leaf_energy(L);
  std::vector<std::array<Vec<Dim>, kC>> leaf_var(want_grad ? L : 0);

  tbb::parallel_for(tbb::blocked_range<Index>(0, L), [&](const tbb::blocked_range<Index>& range) {
    BasisEval<Dim> be;
    for (Index l = range.begin(); l != range.end(); ++l) {
      const double h = grid.leaf_size(l);
      const double vol = std::pow(h, Dim);
      std::array<Vec<Dim>, kC> pc;
      for (int c = 0; c < kC; ++c) {
        pc[c].setZero();
        for (const auto& e : grid.corner_stencil(l, c)) pc[c] += e.weight * phi.col(e.dof);
      }
      std::array<double, 4> acc{0.0, 0.0, 0.0, 0.0};
      std::array<Vec<Dim>, kC> var;
      for (auto& v : var) v.setZero();

      for (int q = 0; q < kQ; ++q) {
        const double w = T.rule.weights[q] * vol;
        Mat<Dim> A = Mat<Dim>::Zero();
        Vec<Dim> y = Vec<Dim>::Zero();
        for (int c = 0; c < kC; ++c) {
          A += pc[c] * (T.dpsi[q][c] / h).transpose();
          y += T.psi[q][c] * pc[c];
        }
        Mat<Dim> GA = Mat<Dim>::Zero();
        Vec<Dim> gy = Vec<Dim>::Zero();

        if (P.terms[kVolume]) {
          Mat<Dim> G;
          if (P.volume_form == VolumeForm::Simplified) {
            acc[kVolume] += w * P.c_vol * lame_density<Dim>(A, P.lame, want_grad ? &G : nullptr);
            if (want_grad) GA += P.c_vol * G;
          } else {
            acc[kVolume] += w * full_volume_density<Dim>(A, P.full_volume, want_grad ? &G : nullptr);
            if (want_grad) GA += G;
          }
        }

        const Index bi = band_index_[l * kQ + q];
        if (band_terms && bi >= 0) {
          const BandPoint& bp = band_[bi];
          std::array<bool, Dim> clamped;
          const Vec<Dim> z = project_to_box<Dim>(y, clamped);
          grid.basis_at(z, be);
          if (want_grad) {
            for (auto& t : be.terms) {
              for (int a = 0; a < Dim; ++a) {
                if (clamped[a]) t.grad[a] = 0.0;
              }
            }
          }

          if (P.terms[kMatch]) {
            const double d2 = be.eval(d2_);
            const double r = d2 - bp.d1;
            acc[kMatch] += w * bp.eta * r * r / P.nu;
            if (want_grad) gy += (2.0 / P.nu) * bp.eta * r * be.eval_gradient(d2_);
          }

          if (P.terms[kMembrane] || P.terms[kBending]) {
            Vec<Dim> nt = Vec<Dim>::Zero();
            Mat<Dim> Dnt = Mat<Dim>::Zero();
            for (const auto& t : be.terms) {
              nt += t.value * target_.normals.col(t.dof);
              if (want_grad) Dnt += target_.normals.col(t.dof) * t.grad.transpose();
            }
            const double len = nt.norm();
            const Vec<Dim> n2 = nt / len;
            const Mat<Dim> P2 = tangent_projector<Dim>(n2);
            const Mat<Dim> P1 = tangent_projector<Dim>(bp.n1);
            const Mat<Dim> n2n1 = n2 * bp.n1.transpose();
            Vec<Dim> gn = Vec<Dim>::Zero();  // derivative with respect to n2

            if (P.terms[kMembrane]) {
              const double k = P.delta * bp.eta;
              const Mat<Dim> AP1 = A * P1;
              Mat<Dim> G;
              if (P.project_membrane_target) {
                const Mat<Dim> B = P2 * AP1 + n2n1;
                acc[kMembrane] += w * k * lame_density<Dim>(B, P.lame, want_grad ? &G : nullptr);
                if (want_grad) {
                  GA += k * P2 * G * P1;
                  gn += k * (-G * AP1.transpose() * n2 - AP1 * G.transpose() * n2 + G * bp.n1);
                }
              } else {
                const Mat<Dim> C = AP1.transpose() * AP1 + bp.n1 * bp.n1.transpose();
                acc[kMembrane] += w * k * lame_density<Dim>(C, P.lame, want_grad ? &G : nullptr);
                if (want_grad) GA += k * AP1 * (G + G.transpose()) * P1;
              }
            }

            if (P.terms[kBending]) {
              const double k = delta3 * bp.eta;
              Mat<Dim> H = Mat<Dim>::Zero();
              for (const auto& t : be.terms) H += t.value * target_.sqrt[t.dof];
              const Mat<Dim> Z = A * bp.K;
              const Mat<Dim> X = H * P2 * Z;
              const Mat<Dim> Lam = P2 * X + n2n1;
              Mat<Dim> G;
              acc[kBending] += w * k * lame_density<Dim>(Lam, P.lame, want_grad ? &G : nullptr);
              if (want_grad) {
                GA += k * P2 * H * P2 * G * bp.K;
                const Mat<Dim> Mh = H * P2 * G * Z.transpose();
                gn += k * (-(G * X.transpose() * n2 + X * G.transpose() * n2) - (Mh * n2 + Mh.transpose() * n2) +
                           G * bp.n1);
                const Mat<Dim> GH = k * P2 * G * Z.transpose() * P2;
                for (const auto& t : be.terms) {
                  const double s = GH.cwiseProduct(target_.sqrt[t.dof]).sum();
                  gy += s * t.grad;
                }
              }
            }
            if (want_grad) gy += (Dnt.transpose() * (P2 * gn)) / len;
          }
        }

        if (want_grad) {
          for (int c = 0; c < kC; ++c) var[c] += w * (GA * (T.dpsi[q][c] / h) + T.psi[q][c] * gy);
        }
      }
      leaf_energy[l] = acc;
      if (want_grad) leaf_var[l] = var;
    }
  });

  EnergyReport rep;
  double* fields[4] = {&rep.e_match, &rep.e_mem, &rep.e_bend, &rep.e_vol};
  for (Index l = 0; l < L; ++l) {
    for (int t = 0; t < 4; ++t) *fields[t] += leaf_energy[l][t];
  }
  rep.total = rep.e_match + rep.e_mem + rep.e_bend + rep.e_vol;
  if (!std::isfinite(rep.total)) rep.total = std::numeric_limits<double>::infinity();

  if (want_grad) {
    variation->setZero(Dim, grid.num_dofs());
    for (Index l = 0; l < L; ++l) {
      for (int c = 0; c < kC; ++c) {
        for (const auto& e : grid.corner_stencil(l, c)) variation->col(e.dof) += e.weight * leaf_var[l][c];
      }
    }
  }
  return rep;
}

#define SHELLMATCH_INSTANTIATE(D)                                                              \
  template Mat<D> cofactor<D>(const Mat<D>&);                                                  \
  template double lame_density<D>(const Mat<D>&, const LameParams&, Mat<D>*);                  \
  template double full_volume_density<D>(const Mat<D>&, const FullVolumeParams&, Mat<D>*);     \
  template class ShellEnergy<D>;
SHELLMATCH_INSTANTIATE(2)
SHELLMATCH_INSTANTIATE(3)
#undef SHELLMATCH_INSTANTIATE

}  // namespace shellmatch
