#include "shellmatch/cascadic_driver.hpp"

#include "shellmatch/log.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>

namespace shellmatch {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x)) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return x;
}

int parse_int(const std::string& key, const std::string& v) {
  const double x = parse_real(key, v);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<int>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected on|off, got '" + v + "'");
}

std::string real_text(double x) {
  char buf[32];
  return std::string(buf, std::to_chars(buf, buf + sizeof buf, x).ptr);
}

}  // namespace

double CascadicConfig::nu(int level) const {
  char buf[48];
  auto* end = std::to_chars(buf, buf + 32, nu0, std::chars_format::scientific).ptr;
  char* e = std::find(buf, end, 'e');
  int exponent = 0;
  std::from_chars(e + 1 + (e[1] == '+'), end, exponent);
  end = std::to_chars(e + 1, buf + sizeof buf, exponent - (level - lmin)).ptr;
  double v = 0.0;
  std::from_chars(buf, end, v);
  return v;
}

EnergyParams CascadicConfig::energy_params(int level, int dim) const {
  EnergyParams p;
  p.lame = {lambda, mu};
  p.delta = delta;
  p.nu = nu(level);
  p.sigma = sigma(level);
  p.c_vol = c_vol(level);
  p.volume_form = volume_form;
  p.full_volume = FullVolumeParams::defaults(dim);
  p.project_membrane_target = membrane_projection;
  return p;
}

void CascadicConfig::validate() const {
  std::vector<std::string> problems;
  if (lmin < 1) problems.push_back("lmin must be at least 1 (lmin = " + std::to_string(lmin) + ")");
  if (lmax > 12) problems.push_back("lmax must be at most 12 (lmax = " + std::to_string(lmax) + ")");
  if (lmin > lmax) {
    problems.push_back("lmin must not exceed lmax (lmin = " + std::to_string(lmin) +
                       ", lmax = " + std::to_string(lmax) + ")");
  }
  const std::pair<const char*, double> positive[] = {{"delta", delta}, {"lambda", lambda}, {"mu", mu},
                                                     {"tau", tau},     {"nu0", nu0},       {"cvol0", cvol0},
                                                     {"sigma_factor", sigma_factor}};
  for (const auto& [key, v] : positive) {
    if (!(v > 0.0)) problems.push_back(std::string(key) + " must be positive (" + key + " = " + real_text(v) + ")");
  }
  try {
    descent.validate();
  } catch (const ConfigError& e) {
    problems.push_back(e.what());
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

void CascadicConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "lmin") lmin = parse_int(key, v);
  else if (key == "lmax") lmax = parse_int(key, v);
  else if (key == "delta") delta = parse_real(key, v);
  else if (key == "lambda") lambda = parse_real(key, v);
  else if (key == "mu") mu = parse_real(key, v);
  else if (key == "tau") tau = parse_real(key, v);
  else if (key == "nu0") nu0 = parse_real(key, v);
  else if (key == "cvol0") cvol0 = parse_real(key, v);
  else if (key == "sigma_factor") sigma_factor = parse_real(key, v);
  else if (key == "bc") {
    if (v == "neumann") bc = BoundaryCondition::Neumann;
    else if (v == "dirichlet") bc = BoundaryCondition::Dirichlet;
    else throw ConfigError("key 'bc': expected neumann|dirichlet, got '" + v + "'");
  } else if (key == "volume_form") {
    if (v == "simplified") volume_form = VolumeForm::Simplified;
    else if (v == "full") volume_form = VolumeForm::Full;
    else throw ConfigError("key 'volume_form': expected simplified|full, got '" + v + "'");
  } else if (key == "membrane_projection") membrane_projection = parse_bool(key, v);
  else if (key == "max_iters") descent.max_iters = parse_int(key, v);
  else if (key == "step_init") descent.step_init = parse_real(key, v);
  else if (key == "grad_tol") descent.grad_tol = parse_real(key, v);
  else if (key == "armijo_c1") descent.armijo_c1 = parse_real(key, v);
  else if (key == "step_shrink") descent.step_shrink = parse_real(key, v);
  else if (key == "restart_period") descent.restart_period = parse_int(key, v);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

std::map<std::string, std::string> CascadicConfig::entries() const {
  return {{"lmin", std::to_string(lmin)},
          {"lmax", std::to_string(lmax)},
          {"delta", real_text(delta)},
          {"lambda", real_text(lambda)},
          {"mu", real_text(mu)},
          {"tau", real_text(tau)},
          {"nu0", real_text(nu0)},
          {"cvol0", real_text(cvol0)},
          {"sigma_factor", real_text(sigma_factor)},
          {"bc", bc == BoundaryCondition::Neumann ? "neumann" : "dirichlet"},
          {"volume_form", volume_form == VolumeForm::Simplified ? "simplified" : "full"},
          {"membrane_projection", membrane_projection ? "on" : "off"},
          {"max_iters", std::to_string(descent.max_iters)},
          {"step_init", real_text(descent.step_init)},
          {"grad_tol", real_text(descent.grad_tol)},
          {"armijo_c1", real_text(descent.armijo_c1)},
          {"step_shrink", real_text(descent.step_shrink)},
          {"restart_period", std::to_string(descent.restart_period)}};
}

std::vector<std::string> preset_names() { return {"faces", "hand", "dolphin", "beets"}; }

CascadicConfig preset(const std::string& name) {
  CascadicConfig c;
  c.lambda = c.mu = 1.0;
  c.tau = 1.0;
  c.sigma_factor = 2.0;
  if (name == "faces" || name == "beets") {
    c.lmin = 3;
    c.lmax = 8;
    c.delta = 0.5;
    c.cvol0 = 0.025;
    c.nu0 = 0.002;
  } else if (name == "hand") {
    c.lmin = 2;
    c.lmax = 8;
    c.delta = 0.71;
    c.cvol0 = 0.05;
    c.nu0 = 0.1;
  } else if (name == "dolphin") {
    c.lmin = 3;
    c.lmax = 8;
    c.delta = 1.0;
    c.cvol0 = 0.025;
    c.nu0 = 0.002;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

void apply_config_file(const std::filesystem::path& path, CascadicConfig& config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

template <int Dim>
std::vector<Index> mark_surface_leaves(const AdaptiveGrid<Dim>& grid, const ScalarField& d1, const ScalarField& d2) {
  std::vector<Index> marked;
  for (Index l = 0; l < grid.num_leaves(); ++l) {
    const double reach = grid.leaf_size(l) * std::sqrt(double(Dim));
    bool hit = false;
    for (const ScalarField* d : {&d1, &d2}) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo, far = 0.0;
      for (int c = 0; c < AdaptiveGrid<Dim>::kCorners; ++c) {
        double v = 0.0;
        for (const auto& e : grid.corner_stencil(l, c)) v += e.weight * (*d)[e.dof];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        far = std::max(far, std::abs(v));
      }
      if ((lo <= 0.0 && hi >= 0.0) || far <= reach) hit = true;
    }
    if (hit) marked.push_back(l);
  }
  return marked;
}

template <int Dim>
double match_residual(const AdaptiveGrid<Dim>& grid, const ScalarField& d1, const ScalarField& d2,
                      const VectorField<Dim>& phi, const Surface<Dim>& source) {
  double r = 0.0;
  for (const auto& v : vertices_of(source)) {
    r = std::max(r, std::abs(grid.evaluate(d2, grid.evaluate(phi, v)) - grid.evaluate(d1, v)));
  }
  return r;
}

template <int Dim>
Surface<Dim> deform(const AdaptiveGrid<Dim>& grid, const VectorField<Dim>& phi, const Surface<Dim>& source) {
  auto v = vertices_of(source);
  for (auto& p : v) p = grid.evaluate(phi, p);
  return with_vertices(source, v);
}

template <int Dim>
CascadicResult<Dim> run_cascadic(const Surface<Dim>& source, const Surface<Dim>& target,
                                 const CascadicConfig& config,
                                 const std::function<void(const LevelState<Dim>&)>& on_level) {
  config.validate();
  config.energy_params(config.lmin, Dim).validate(Dim);
  CascadicResult<Dim> res{AdaptiveGrid<Dim>(config.lmin, config.lmax), {}, {}, false, {}};
  res.phi = identity_field(res.grid);
  const auto kind = Classification::truncated_abs(config.tau);

  for (int level = config.lmin; level <= config.lmax; ++level) {
    const auto start = std::chrono::steady_clock::now();
    AdaptiveGrid<Dim>& grid = res.grid;
    LevelReport rep;
    rep.level = level;
    rep.dofs = grid.num_dofs();
    rep.leaves = grid.num_leaves();
    rep.sigma = config.sigma(level);
    rep.nu = config.nu(level);
    rep.c_vol = config.c_vol(level);

    DistanceOptions dopt;
    dopt.clearance_radius = 2.0 * rep.sigma;
    const auto sd1 = signed_distance<Dim>(source, grid, dopt);
    const auto sd2 = signed_distance<Dim>(target, grid, dopt);
    rep.clearance1 = sd1.clearance;
    rep.clearance2 = sd2.clearance;
    if (!(rep.sigma < std::min(rep.clearance1, rep.clearance2))) {
      const std::string msg = "band width " + real_text(rep.sigma) + " at level " + std::to_string(level) +
                              " is not below the singularity clearance (source " + real_text(rep.clearance1) +
                              ", target " + real_text(rep.clearance2) + ")";
      if (level == config.lmax) throw AdmissibilityError(msg);
      log_warning(msg);
    }

    try {
      const double band = 4.0 * rep.sigma;
      auto c1 = compute_coefficients<Dim>(grid, sd1.values, kind, default_fit_neighbors<Dim>(), band);
      auto c2 = compute_coefficients<Dim>(grid, sd2.values, kind, default_fit_neighbors<Dim>(), band);
      const ShellEnergy<Dim> energy(grid, sd1.values, std::move(c1), sd2.values, std::move(c2),
                                    config.energy_params(level, Dim));
      const auto r = minimize(shell_objective<Dim>(energy, config.bc == BoundaryCondition::Dirichlet),
                              flatten<Dim>(res.phi), config.descent);
      res.phi = unflatten<Dim>(r.x);
      rep.initial = r.trace.front().energy;
      rep.final = r.trace.back().energy;
      rep.iterations = r.iterations;
      rep.reason = r.reason;
      rep.trace = r.trace;
    } catch (const NumericalError& e) {
      res.optimizer_failed = true;
      res.failure = "level " + std::to_string(level) + ": " + e.what();
      log_warning(res.failure);
      break;
    }
    rep.residual = match_residual<Dim>(grid, sd1.values, sd2.values, res.phi, source);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.levels.push_back(rep);
    log_info("level " + std::to_string(level) + ": " + std::to_string(rep.dofs) + " dofs, " +
             std::to_string(rep.iterations) + " iterations (" + to_string(rep.reason) +
             "), energy " + real_text(rep.initial.total) + " -> " + real_text(rep.final.total) +
             ", residual " + real_text(rep.residual));
    if (on_level) on_level(LevelState<Dim>{grid, sd1.values, sd2.values, res.phi, res.levels.back()});

    if (level < config.lmax) {
      const auto marked = mark_surface_leaves<Dim>(grid, sd1.values, sd2.values);
      const AdaptiveGrid<Dim> coarse = grid;
      grid.refine(marked);
      res.phi = prolongate<Dim>(coarse, grid, res.phi);
    }
  }
  return res;
}

#define SHELLMATCH_INSTANTIATE(D)                                                                                \
  template std::vector<Index> mark_surface_leaves<D>(const AdaptiveGrid<D>&, const ScalarField&,                \
                                                     const ScalarField&);                                       \
  template double match_residual<D>(const AdaptiveGrid<D>&, const ScalarField&, const ScalarField&,             \
                                    const VectorField<D>&, const Surface<D>&);                                  \
  template Surface<D> deform<D>(const AdaptiveGrid<D>&, const VectorField<D>&, const Surface<D>&);              \
  template CascadicResult<D> run_cascadic<D>(const Surface<D>&, const Surface<D>&, const CascadicConfig&,       \
                                             const std::function<void(const LevelState<D>&)>&);
SHELLMATCH_INSTANTIATE(2)
SHELLMATCH_INSTANTIATE(3)
#undef SHELLMATCH_INSTANTIATE

}  // namespace shellmatch
