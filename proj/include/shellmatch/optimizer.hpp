#pragma once

#include "shellmatch/shell_energy.hpp"

#include <functional>
#include <vector>

namespace shellmatch {

struct DescentConfig {
  int max_iters = 500;
  double armijo_c1 = 1e-4;
  double step_init = 1.0;
  double step_shrink = 0.5;
  int restart_period = 50;
  /// Stop once ||g|| <= grad_tol * ||g_0||.
  double grad_tol = 1e-6;

  /// ConfigError when a field is outside its admissible range.
  void validate() const;
};

/// Objective over a flat coefficient vector. `gradient` returns the gradient
/// with respect to the weighted inner product and the energy at the same
/// point. `weights` are the inner-product weights (empty means Euclidean).
struct Objective {
  std::function<EnergyReport(const Eigen::VectorXd&)> energy;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, EnergyReport&)> gradient;
  Eigen::VectorXd weights;
};

struct TraceEntry {
  int iteration = 0;
  EnergyReport energy;
  double step = 0.0;
  double grad_norm = 0.0;
};

enum class StopReason { GradientTolerance, MaxIterations, LineSearchFailure };

const char* to_string(StopReason r);

struct DescentResult {
  Eigen::VectorXd x;
  std::vector<TraceEntry> trace;
  StopReason reason = StopReason::MaxIterations;
  int iterations = 0;
};

/// Fletcher-Reeves conjugate gradients with Armijo backtracking. Each trial
/// starts at min(step_init, 2 * previous step). NumericalError when the energy
/// at x0 is not finite. `on_iteration`, when set, sees every trace entry.
DescentResult minimize(const Objective& objective, Eigen::VectorXd x0, const DescentConfig& config,
                       const std::function<void(const TraceEntry&, const Eigen::VectorXd&)>& on_iteration = {});

/// Objective for a shell energy over the flattened deformation. With
/// `fix_boundary` the gradient vanishes at boundary DOFs.
template <int Dim>
Objective shell_objective(const ShellEnergy<Dim>& energy, bool fix_boundary = false);

template <int Dim>
Eigen::VectorXd flatten(const VectorField<Dim>& phi) {
  return Eigen::Map<const Eigen::VectorXd>(phi.data(), phi.size());
}

template <int Dim>
VectorField<Dim> unflatten(const Eigen::VectorXd& x) {
  return Eigen::Map<const VectorField<Dim>>(x.data(), Dim, x.size() / Dim);
}

}  // namespace shellmatch
