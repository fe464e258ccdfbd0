#include "shellmatch/run_io.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace shellmatch {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) hex << std::setw(2) << static_cast<int>(md[i]);
  return hex.str();
}

template <int Dim>
void write_vtk(const std::filesystem::path& path, const AdaptiveGrid<Dim>& grid, const VectorField<Dim>& phi,
               const ScalarField& d1, const ScalarField& d2) {
  constexpr int C = AdaptiveGrid<Dim>::kCorners;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const Index n = grid.num_leaves();
  out << "# vtk DataFile Version 3.0\nshellmatch grid\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << std::setprecision(17);
  out << "POINTS " << n * C << " double\n";
  std::vector<Vec<Dim>> disp(n * C);
  std::vector<double> v1(n * C), v2(n * C);
  for (Index l = 0; l < n; ++l) {
    const Vec<Dim> lo = grid.leaf_origin(l);
    const double h = grid.leaf_size(l);
    for (int c = 0; c < C; ++c) {
      Vec<Dim> x = lo;
      for (int a = 0; a < Dim; ++a) {
        if (c >> a & 1) x[a] += h;
      }
      Vec<Dim> y = Vec<Dim>::Zero();
      double a1 = 0.0, a2 = 0.0;
      for (const auto& e : grid.corner_stencil(l, c)) {
        y += e.weight * phi.col(e.dof);
        a1 += e.weight * d1[e.dof];
        a2 += e.weight * d2[e.dof];
      }
      const Index p = l * C + c;
      disp[p] = y - x;
      v1[p] = a1;
      v2[p] = a2;
      out << x[0] << ' ' << x[1] << ' ' << (Dim == 3 ? x[Dim - 1] : 0.0) << '\n';
    }
  }
  out << "CELLS " << n << ' ' << n * (C + 1) << '\n';
  for (Index l = 0; l < n; ++l) {
    out << C;
    for (int c = 0; c < C; ++c) out << ' ' << l * C + c;
    out << '\n';
  }
  out << "CELL_TYPES " << n << '\n';
  for (Index l = 0; l < n; ++l) out << (Dim == 2 ? 8 : 11) << '\n';
  out << "POINT_DATA " << n * C << "\nVECTORS displacement double\n";
  for (const auto& d : disp) out << d[0] << ' ' << d[1] << ' ' << (Dim == 3 ? d[Dim - 1] : 0.0) << '\n';
  out << "SCALARS d1 double 1\nLOOKUP_TABLE default\n";
  for (double v : v1) out << v << '\n';
  out << "SCALARS d2 double 1\nLOOKUP_TABLE default\n";
  for (double v : v2) out << v << '\n';
  out << "CELL_DATA " << n << "\nSCALARS level int 1\nLOOKUP_TABLE default\n";
  for (Index l = 0; l < n; ++l) out << std::lround(-std::log2(grid.leaf_size(l))) << '\n';
}

template void write_vtk<2>(const std::filesystem::path&, const AdaptiveGrid<2>&, const VectorField<2>&,
                           const ScalarField&, const ScalarField&);
template void write_vtk<3>(const std::filesystem::path&, const AdaptiveGrid<3>&, const VectorField<3>&,
                           const ScalarField&, const ScalarField&);

void write_energy_csv(const std::filesystem::path& path, const std::vector<LevelReport>& levels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iteration,level,e_match,e_mem,e_bend,e_vol,total\n" << std::setprecision(17);
  for (const auto& l : levels) {
    for (const auto& t : l.trace) {
      const auto& e = t.energy;
      out << t.iteration << ',' << l.level << ',' << e.e_match << ',' << e.e_mem << ',' << e.e_bend << ',' << e.e_vol
          << ',' << e.total << '\n';
    }
  }
}

nlohmann::json to_json(const EnergyReport& e) {
  return {{"e_match", e.e_match}, {"e_mem", e.e_mem}, {"e_bend", e.e_bend}, {"e_vol", e.e_vol}, {"total", e.total}};
}

nlohmann::json to_json(const LevelReport& r) {
  return {{"level", r.level},
          {"dofs", r.dofs},
          {"leaves", r.leaves},
          {"sigma", r.sigma},
          {"nu", r.nu},
          {"c_vol", r.c_vol},
          {"clearance_source", r.clearance1},
          {"clearance_target", r.clearance2},
          {"initial", to_json(r.initial)},
          {"final", to_json(r.final)},
          {"iterations", r.iterations},
          {"stop_reason", to_string(r.reason)},
          {"residual", r.residual},
          {"seconds", r.seconds}};
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["dim"] = dim;
  j["preset"] = preset.empty() ? nlohmann::json(nullptr) : nlohmann::json(preset);
  j["config"] = config;
  j["config_file"] = config_file.empty() ? nlohmann::json(nullptr)
                                          : nlohmann::json{{"path", config_file.string()},
                                                           {"sha256", sha256_file(config_file)}};
  j["inputs"] = {{"source", {{"path", source.string()}, {"sha256", sha256_file(source)}}},
                 {"target", {{"path", target.string()}, {"sha256", sha256_file(target)}}}};
  j["threads"] = threads;
  j["levels"] = nlohmann::json::array();
  for (const auto& l : levels) j["levels"].push_back(shellmatch::to_json(l));
  j["final_residual"] = levels.empty() ? nlohmann::json(nullptr) : nlohmann::json(levels.back().residual);
  j["optimizer_failed"] = optimizer_failed;
  j["failure"] = failure;
  j["seconds"] = seconds;
  j["outputs"] = outputs;
  return j;
}

}  // namespace shellmatch
