#pragma once

#include "shellmatch/cascadic_driver.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace shellmatch {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Legacy ASCII VTK unstructured grid with one PIXEL (2D) or VOXEL (3D) cell
/// per leaf. Points are leaf corners (shared corners repeated) carrying the
/// point data "displacement" (phi - x), "d1" and "d2".
template <int Dim>
void write_vtk(const std::filesystem::path& path, const AdaptiveGrid<Dim>& grid, const VectorField<Dim>& phi,
               const ScalarField& d1, const ScalarField& d2);

/// Header iteration,level,e_match,e_mem,e_bend,e_vol,total; one row per
/// trace entry, levels in order.
void write_energy_csv(const std::filesystem::path& path, const std::vector<LevelReport>& levels);

nlohmann::json to_json(const EnergyReport& e);
nlohmann::json to_json(const LevelReport& r);

/// Run summary written next to the outputs.
struct RunManifest {
  std::map<std::string, std::string> config;
  std::string preset;
  int dim = 2;
  int threads = 0;
  std::filesystem::path source, target, config_file;
  std::vector<LevelReport> levels;
  bool optimizer_failed = false;
  std::string failure;
  double seconds = 0.0;
  /// File names relative to the output directory.
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
};

}  // namespace shellmatch
