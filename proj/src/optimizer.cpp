#include "shellmatch/optimizer.hpp"

#include <cmath>

namespace shellmatch {

void DescentConfig::validate() const {
  if (max_iters < 0) throw ConfigError("max_iters must be non-negative");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw ConfigError("armijo_c1 must lie in (0, 1)");
  if (!(step_init > 0.0)) throw ConfigError("step_init must be positive");
  if (!(step_shrink > 0.0 && step_shrink < 1.0)) throw ConfigError("step_shrink must lie in (0, 1)");
  if (restart_period < 1) throw ConfigError("restart_period must be at least 1");
  if (!(grad_tol >= 0.0)) throw ConfigError("grad_tol must be non-negative");
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::GradientTolerance:
      return "gradient_tolerance";
    case StopReason::MaxIterations:
      return "max_iterations";
    case StopReason::LineSearchFailure:
      return "line_search_failure";
  }
  return "unknown";
}

DescentResult minimize(const Objective& objective, Eigen::VectorXd x0, const DescentConfig& config,
                       const std::function<void(const TraceEntry&, const Eigen::VectorXd&)>& on_iteration) {
  config.validate();
  const Eigen::VectorXd& w = objective.weights;
  if (w.size() != 0 && w.size() != x0.size()) throw std::invalid_argument("inner-product weights size mismatch");
  auto dot = [&w](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return w.size() == 0 ? a.dot(b) : a.cwiseProduct(w).dot(b);
  };

  DescentResult out;
  out.x = std::move(x0);
  EnergyReport e;
  Eigen::VectorXd g = objective.gradient(out.x, e);
  if (!e.finite()) throw NumericalError("energy is not finite at the initial deformation");
  double gg = dot(g, g);
  const double tol = config.grad_tol * std::sqrt(gg);
  auto record = [&](int k, double step) {
    TraceEntry t{k, e, step, std::sqrt(gg)};
    out.trace.push_back(t);
    if (on_iteration) on_iteration(t, out.x);
  };
  record(0, 0.0);

  Eigen::VectorXd d = -g;
  double alpha_prev = 0.5 * config.step_init;
  const double alpha_min = 1e-12 * config.step_init;
  out.reason = StopReason::MaxIterations;
  for (int k = 1; k <= config.max_iters; ++k) {
    if (!(std::sqrt(gg) > tol)) {
      out.reason = StopReason::GradientTolerance;
      break;
    }
    double slope = dot(g, d);
    if (slope >= 0.0 || (k > 1 && (k - 1) % config.restart_period == 0)) {
      d = -g;
      slope = -gg;
    }
    double alpha = std::min(config.step_init, 2.0 * alpha_prev);
    Eigen::VectorXd trial;
    bool accepted = false;
    while (alpha >= alpha_min) {
      trial = out.x + alpha * d;
      const EnergyReport et = objective.energy(trial);
      if (et.finite() && et.total <= e.total + config.armijo_c1 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= config.step_shrink;
    }
    if (!accepted) {
      out.reason = StopReason::LineSearchFailure;
      break;
    }
    out.x = std::move(trial);
    const Eigen::VectorXd g_new = objective.gradient(out.x, e);
    const double gg_new = dot(g_new, g_new);
    d = -g_new + (gg_new / gg) * d;
    g = g_new;
    gg = gg_new;
    alpha_prev = alpha;
    out.iterations = k;
    record(k, alpha);
  }
  if (out.reason == StopReason::MaxIterations && !(std::sqrt(gg) > tol)) out.reason = StopReason::GradientTolerance;
  return out;
}

template <int Dim>
Objective shell_objective(const ShellEnergy<Dim>& energy, bool fix_boundary) {
  const auto& grid = energy.grid();
  Objective obj;
  obj.weights.resize(Dim * grid.num_dofs());
  std::vector<Index> boundary;
  for (Index i = 0; i < grid.num_dofs(); ++i) {
    obj.weights.segment<Dim>(Dim * i).setConstant(grid.lumped_mass()[i]);
    if (fix_boundary && grid.is_boundary_dof(i)) boundary.push_back(i);
  }
  obj.energy = [&energy](const Eigen::VectorXd& x) { return energy.evaluate(unflatten<Dim>(x)); };
  obj.gradient = [&energy, boundary](const Eigen::VectorXd& x, EnergyReport& report) {
    VectorField<Dim> g = energy.l2_gradient(unflatten<Dim>(x), &report);
    for (Index i : boundary) g.col(i).setZero();
    return flatten<Dim>(g);
  };
  return obj;
}

template Objective shell_objective<2>(const ShellEnergy<2>&, bool);
template Objective shell_objective<3>(const ShellEnergy<3>&, bool);

}  // namespace shellmatch
