#pragma once

#include "shellmatch/distance_field.hpp"
#include "shellmatch/optimizer.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>

namespace shellmatch {

enum class BoundaryCondition { Neumann, Dirichlet };

struct CascadicConfig {
  int lmin = 4;
  int lmax = 8;
  double delta = 0.5;
  double lambda = 1.0;
  double mu = 1.0;
  double tau = 1.0;
  double nu0 = 0.002;
  double cvol0 = 0.025;
  double sigma_factor = 2.0;
  BoundaryCondition bc = BoundaryCondition::Neumann;
  VolumeForm volume_form = VolumeForm::Simplified;
  bool membrane_projection = true;
  DescentConfig descent;

  double h(int level) const { return std::ldexp(1.0, -level); }
  double sigma(int level) const { return sigma_factor * h(level); }
  /// nu0 10^-(level - lmin), correctly rounded from the shortest decimal form of nu0.
  double nu(int level) const;
  double c_vol(int level) const { return cvol0 * std::ldexp(1.0, -(level - lmin)); }

  /// Energy parameters at a level for dimension `dim`.
  EnergyParams energy_params(int level, int dim) const;

  /// ConfigError naming the offending keys.
  void validate() const;

  /// Sets one key from its text form; ConfigError for unknown keys or
  /// malformed values.
  void set(const std::string& key, const std::string& value);

  /// All keys with their current values in text form.
  std::map<std::string, std::string> entries() const;
};

/// Names of the shipped presets.
std::vector<std::string> preset_names();

/// ConfigError for an unknown name.
CascadicConfig preset(const std::string& name);

/// Applies "key = value" lines from a file on top of `config`. Blank lines
/// and text after '#' are ignored.
void apply_config_file(const std::filesystem::path& path, CascadicConfig& config);

struct LevelReport {
  int level = 0;
  Index dofs = 0;
  Index leaves = 0;
  double sigma = 0.0;
  double nu = 0.0;
  double c_vol = 0.0;
  double clearance1 = 0.0;
  double clearance2 = 0.0;
  EnergyReport initial;
  EnergyReport final;
  int iterations = 0;
  StopReason reason = StopReason::MaxIterations;
  /// max |d2(phi(v)) - d1(v)| over the source vertices v.
  double residual = 0.0;
  double seconds = 0.0;
  std::vector<TraceEntry> trace;
};

/// Raised when the band width is not below a singularity clearance at the
/// finest level.
class AdmissibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <int Dim>
struct LevelState {
  const AdaptiveGrid<Dim>& grid;
  const ScalarField& d1;
  const ScalarField& d2;
  const VectorField<Dim>& phi;
  const LevelReport& report;
};

template <int Dim>
struct CascadicResult {
  AdaptiveGrid<Dim> grid;
  VectorField<Dim> phi;
  std::vector<LevelReport> levels;
  /// Set when a level could not be optimized; phi is the last valid iterate.
  bool optimizer_failed = false;
  std::string failure;
};

/// Leaves whose corners show a sign change of d1 or d2, or whose corners all
/// have |d| <= h sqrt(n), as they must when the leaf meets the surface.
template <int Dim>
std::vector<Index> mark_surface_leaves(const AdaptiveGrid<Dim>& grid, const ScalarField& d1, const ScalarField& d2);

/// max over source vertices v of |d2(phi(v)) - d1(v)|.
template <int Dim>
double match_residual(const AdaptiveGrid<Dim>& grid, const ScalarField& d1, const ScalarField& d2,
                      const VectorField<Dim>& phi, const Surface<Dim>& source);

/// Coarse-to-fine minimization starting from the identity on the uniform
/// grid at lmin. `on_level` is called after each level's descent.
/// AdmissibilityError when sigma is not below the clearance at lmax; coarser
/// violations only warn.
template <int Dim>
CascadicResult<Dim> run_cascadic(const Surface<Dim>& source, const Surface<Dim>& target,
                                 const CascadicConfig& config,
                                 const std::function<void(const LevelState<Dim>&)>& on_level = {});

/// Source vertices mapped through phi.
template <int Dim>
Surface<Dim> deform(const AdaptiveGrid<Dim>& grid, const VectorField<Dim>& phi, const Surface<Dim>& source);

}  // namespace shellmatch
