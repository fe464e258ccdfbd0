#include "shellmatch/analysis_lab.hpp"
#include "shellmatch/log.hpp"
#include "shellmatch/run_io.hpp"

#include <CLI11.hpp>
#include <tbb/global_control.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

using namespace shellmatch;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kIo = 1, kConfig = 2, kAdmissibility = 3, kOptimizer = 4 };

struct MatchArgs {
  fs::path source, target, config_file, out_dir = "out";
  std::string preset;
  std::vector<std::string> overrides;
  bool dump_grids = false;
  int threads = 0;
  bool quiet = false;
};

struct OscillationArgs {
  double R = 0.95;
  std::vector<int> k{6, 20, 50};
  int steps = 10000;
  double sigma = 1e-3;
  fs::path out_dir = ".";
};

struct RankOneArgs {
  int samples = 11;
  fs::path out_dir = ".";
};

std::string extension(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

int dimension_of(const fs::path& p) {
  const auto e = extension(p);
  if (e == ".csv" || e == ".png") return 2;
  if (e == ".obj") return 3;
  throw std::runtime_error("unsupported input format: " + p.string() + " (expected .csv, .png or .obj)");
}

template <int Dim>
Surface<Dim> load(const fs::path& p) {
  Surface<Dim> s;
  if constexpr (Dim == 2) {
    s = extension(p) == ".png" ? read_mask_png(p) : read_polyline_csv(p);
  } else {
    s = read_obj(p);
  }
  check_inside_unit_box(s);
  return s;
}

CascadicConfig build_config(const MatchArgs& a) {
  CascadicConfig c = a.preset.empty() ? CascadicConfig{} : preset(a.preset);
  if (!a.config_file.empty()) {
    if (!fs::is_regular_file(a.config_file)) throw std::runtime_error("cannot open config file " + a.config_file.string());
    apply_config_file(a.config_file, c);
  }
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    c.set(o.substr(0, eq), o.substr(eq + 1));
  }
  c.validate();
  return c;
}

template <int Dim>
int run_match(const MatchArgs& a, const CascadicConfig& config) {
  const auto source = load<Dim>(a.source);
  const auto target = load<Dim>(a.target);
  fs::create_directories(a.out_dir);

  RunManifest m;
  m.config = config.entries();
  m.preset = a.preset;
  m.dim = Dim;
  m.threads = a.threads;
  m.source = a.source;
  m.target = a.target;
  m.config_file = a.config_file;

  const auto start = std::chrono::steady_clock::now();
  auto on_level = [&](const LevelState<Dim>& s) {
    const auto& r = s.report;
    std::cout << "level " << r.level << ": dofs " << r.dofs << ", iterations " << r.iterations << " ("
              << to_string(r.reason) << "), energy " << r.initial.total << " -> " << r.final.total << ", residual "
              << r.residual << ", " << std::fixed << std::setprecision(2) << r.seconds << " s" << std::defaultfloat
              << std::setprecision(6) << '\n';
    if (a.dump_grids) {
      const std::string name = "grid_level" + std::to_string(r.level) + ".vtk";
      write_vtk<Dim>(a.out_dir / name, s.grid, s.phi, s.d1, s.d2);
      m.outputs.push_back(name);
    }
  };
  const auto res = run_cascadic<Dim>(source, target, config, on_level);
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  m.levels = res.levels;
  m.optimizer_failed = res.optimizer_failed;
  m.failure = res.failure;

  const auto moved = deform<Dim>(res.grid, res.phi, source);
  if constexpr (Dim == 2) {
    write_polyline_csv(a.out_dir / "deformed.csv", moved);
    m.outputs.push_back("deformed.csv");
  } else {
    write_obj(a.out_dir / "deformed.obj", moved);
    m.outputs.push_back("deformed.obj");
  }
  write_energy_csv(a.out_dir / "energy.csv", res.levels);
  m.outputs.push_back("energy.csv");
  m.outputs.push_back("manifest.json");
  {
    std::ofstream out(a.out_dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write " + (a.out_dir / "manifest.json").string());
    out << m.to_json().dump(2) << '\n';
  }
  if (res.optimizer_failed) {
    std::cerr << "error: optimizer failed at " << res.failure << '\n';
    return kOptimizer;
  }
  if (!res.levels.empty()) std::cout << "final residual " << res.levels.back().residual << '\n';
  return kOk;
}

int match(const MatchArgs& a) {
  if (a.quiet) set_log_level(LogLevel::Warning);
  const CascadicConfig config = build_config(a);
  const int d1 = dimension_of(a.source), d2 = dimension_of(a.target);
  if (d1 != d2) throw std::runtime_error("source and target have different dimensions");
  std::optional<tbb::global_control> pool;
  if (a.threads > 0) pool.emplace(tbb::global_control::max_allowed_parallelism, a.threads);
  return d1 == 2 ? run_match<2>(a, config) : run_match<3>(a, config);
}

int oscillation(const OscillationArgs& a) {
  if (a.k.empty()) throw ConfigError("--k needs at least one frequency");
  if (!(a.sigma > 0.0 && a.sigma < 1.0)) throw ConfigError("--sigma must lie in (0, 1)");
  std::vector<OscillationCurve> curves;
  for (int k : a.k) curves.push_back(oscillation_sequence(a.R, k, a.steps));
  fs::create_directories(a.out_dir);
  write_oscillation_csv(a.out_dir / "oscillation.csv", curves);
  write_oscillation_svg(a.out_dir / "oscillation.svg", curves);

  const double limit = naive_membrane_energy_limit(limit_radius(a.R), a.sigma, a.steps);
  std::ofstream out(a.out_dir / "oscillation_energy.csv");
  if (!out) throw std::runtime_error("cannot write " + (a.out_dir / "oscillation_energy.csv").string());
  out << "k,R,r_start,r0,closure_gap,max_speed_error,energy,limit_energy\n" << std::setprecision(17);
  std::cout << "r0 = " << limit_radius(a.R) << ", limit energy = " << limit << '\n';
  for (const auto& c : curves) {
    const double e = naive_membrane_energy(c, a.sigma);
    out << c.k << ',' << c.R << ',' << c.r_start << ',' << c.r0 << ',' << c.closure_gap << ',' << c.max_speed_error
        << ',' << e << ',' << limit << '\n';
    std::cout << "k = " << c.k << ": closure gap " << c.closure_gap << ", speed error " << c.max_speed_error
              << ", energy " << e << '\n';
  }
  return kOk;
}

int rank_one(const RankOneArgs& a) {
  fs::create_directories(a.out_dir);
  write_rank_one_csv(a.out_dir / "rank_one.csv", a.samples);
  std::cout << "W_F(B(0)) = " << rank_one_probe(0.0) << ", W_F(B(1/2)) = " << rank_one_probe(0.5)
            << ", W_F(B(1)) = " << rank_one_probe(1.0) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Narrow-band shell matching of curves and surfaces"};
  app.require_subcommand(1);

  MatchArgs ma;
  auto* m = app.add_subcommand("match", "Match a source shape onto a target shape");
  m->add_option("--source", ma.source, "Source shape (.csv polyline, .png mask or .obj mesh)")->required();
  m->add_option("--target", ma.target, "Target shape, same kind as the source")->required();
  m->add_option("--config", ma.config_file, "File of key = value lines");
  m->add_option("--preset", ma.preset, "Parameter preset")->check(CLI::IsMember(preset_names()));
  m->add_option("--set", ma.overrides, "Override one key (key=value), repeatable");
  m->add_option("--out-dir", ma.out_dir, "Output directory")->capture_default_str();
  m->add_flag("--dump-grids", ma.dump_grids, "Write a VTK grid per level");
  m->add_option("--threads", ma.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  m->add_flag("--quiet", ma.quiet, "Only log warnings; per-level summaries still go to stdout");

  auto* lab = app.add_subcommand("lab", "Counterexamples for the naive membrane energy");
  lab->require_subcommand(1);
  OscillationArgs oa;
  auto* osc = lab->add_subcommand("oscillation", "Tangentially isometric oscillating curves");
  osc->add_option("--R", oa.R, "Amplitude in [0, 1)")->capture_default_str();
  osc->add_option("--k", oa.k, "Comma-separated frequencies")->delimiter(',')->capture_default_str();
  osc->add_option("--steps", oa.steps, "Integration steps over one turn")->capture_default_str();
  osc->add_option("--sigma", oa.sigma, "Half-width of the annulus band")->capture_default_str();
  osc->add_option("--out-dir", oa.out_dir, "Output directory")->capture_default_str();
  RankOneArgs ra;
  auto* r1 = lab->add_subcommand("rank-one", "Density along a rank-one segment");
  r1->add_option("--samples", ra.samples, "Number of equally spaced samples")->capture_default_str();
  r1->add_option("--out-dir", ra.out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return kOk;
    const bool lab_values = lab->parsed() && (dynamic_cast<const CLI::ConversionError*>(&e) ||
                                              dynamic_cast<const CLI::ValidationError*>(&e));
    return lab_values ? kConfig : kIo;
  }

  try {
    if (m->parsed()) return match(ma);
    if (osc->parsed()) return oscillation(oa);
    return rank_one(ra);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const AdmissibilityError& e) {
    std::cerr << "admissibility error: " << e.what() << '\n';
    return kAdmissibility;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kOptimizer;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
}
