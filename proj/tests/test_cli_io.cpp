#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "shellmatch/run_io.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace shellmatch;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = SHELLMATCH_CLI;

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("shellmatch_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct Run {
  int code;
  std::string err;
};

Run run(const std::string& args, const fs::path& dir) {
  const auto err = dir / "stderr.txt";
  const std::string cmd = kCli.string() + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string s; std::getline(in, s);) out.push_back(s);
  return out;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

void circle_pair(const fs::path& dir, double radius = 0.2) {
  write_polyline_csv(dir / "source.csv", make_circle(Vec<2>(0.47, 0.5), radius, 300));
  write_polyline_csv(dir / "target.csv", make_circle(Vec<2>(0.53, 0.5), radius, 300));
}

}  // namespace

TEST_CASE("sha256 of known messages") {
  const auto dir = scratch("sha");
  {
    std::ofstream(dir / "abc") << "abc";
    std::ofstream(dir / "empty");
  }
  CHECK(sha256_file(dir / "abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_file(dir / "empty") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK_THROWS(sha256_file(dir / "missing"));
}

TEST_CASE("VTK export") {
  const auto dir = scratch("vtk");
  AdaptiveGrid<2> g(2, 4);
  g.refine(std::vector<Index>{0});
  const auto phi = identity_field(g);
  ScalarField d1 = ScalarField::Zero(g.num_dofs()), d2 = ScalarField::Ones(g.num_dofs());
  write_vtk<2>(dir / "g.vtk", g, phi, d1, d2);
  const auto rows = lines_of(dir / "g.vtk");
  const Index n = g.num_leaves();
  REQUIRE(rows.size() > 5);
  CHECK(rows[0] == "# vtk DataFile Version 3.0");
  CHECK(rows[3] == "DATASET UNSTRUCTURED_GRID");
  CHECK(rows[4] == "POINTS " + std::to_string(4 * n) + " double");
  const auto at = [&](const std::string& head) {
    return std::find(rows.begin(), rows.end(), head) - rows.begin();
  };
  const auto types = at("CELL_TYPES " + std::to_string(n));
  REQUIRE(types < Index(rows.size()));
  for (Index l = 0; l < n; ++l) CHECK(rows[types + 1 + l] == "8");
  const auto disp = at("VECTORS displacement double");
  REQUIRE(disp < Index(rows.size()));
  for (Index p = 0; p < 4 * n; ++p) CHECK(rows[disp + 1 + p] == "0 0 0");
  const auto s2 = at("SCALARS d2 double 1");
  for (Index p = 0; p < 4 * n; ++p) CHECK(rows[s2 + 2 + p] == "1");

  AdaptiveGrid<3> g3(1, 2);
  const auto phi3 = identity_field(g3);
  const ScalarField z = ScalarField::Zero(g3.num_dofs());
  write_vtk<3>(dir / "g3.vtk", g3, phi3, z, z);
  const auto r3 = lines_of(dir / "g3.vtk");
  CHECK(r3[4] == "POINTS 64 double");
  CHECK(std::count(r3.begin(), r3.end(), "11") == 8);
}

TEST_CASE("energy CSV rows follow the traces") {
  const auto dir = scratch("energy");
  LevelReport a, b;
  a.level = 4;
  b.level = 5;
  a.trace = {{0, {1, 2, 3, 4, 10}, 0, 1}, {1, {0.5, 0, 0, 0, 0.5}, 1, 0.1}};
  b.trace = {{0, {0.25, 0, 0, 0, 0.25}, 0, 1}};
  write_energy_csv(dir / "e.csv", {a, b});
  const auto rows = lines_of(dir / "e.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "iteration,level,e_match,e_mem,e_bend,e_vol,total");
  CHECK(rows[1] == "0,4,1,2,3,4,10");
  CHECK(rows[2] == "1,4,0.5,0,0,0,0.5");
  CHECK(rows[3] == "0,5,0.25,0,0,0,0.25");
}

TEST_CASE("usage and configuration errors") {
  const auto dir = scratch("usage");
  circle_pair(dir);
  const std::string src = (dir / "source.csv").string(), tgt = (dir / "target.csv").string();

  auto r = run("match --source " + src, dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("--target") != std::string::npos);
  CHECK(run("", dir).code == 1);
  CHECK(run("match --source " + src + " --target " + (dir / "nope.csv").string() + " --out-dir " +
                (dir / "o").string(),
            dir)
            .code == 1);
  CHECK(run("match --source " + src + " --target " + (dir / "t.stl").string(), dir).code == 1);
  write_polyline_csv(dir / "outside.csv", make_circle(Vec<2>(0.9, 0.5), 0.2, 100));
  r = run("match --source " + src + " --target " + (dir / "outside.csv").string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("unit box") != std::string::npos);

  {
    std::ofstream(dir / "bad.cfg") << "lmin = 6\nlmax = 4\n";
  }
  r = run("match --source " + src + " --target " + tgt + " --config " + (dir / "bad.cfg").string(), dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("lmin") != std::string::npos);
  CHECK(r.err.find("lmax") != std::string::npos);
  CHECK(run("match --source " + src + " --target " + tgt + " --set sigma=1", dir).code == 2);
  CHECK(run("match --source " + src + " --target " + tgt + " --preset armadillo", dir).code == 1);
}

TEST_CASE("admissibility abort") {
  const auto dir = scratch("admissible");
  circle_pair(dir, 0.03);
  const auto r = run("match --quiet --source " + (dir / "source.csv").string() + " --target " +
                         (dir / "target.csv").string() + " --set lmin=3 --set lmax=4 --out-dir " +
                         (dir / "out").string(),
                     dir);
  CHECK(r.code == 3);
}

TEST_CASE("match run writes a reproducible manifest") {
  const auto dir = scratch("match");
  circle_pair(dir);
  const std::string common = "match --quiet --source " + (dir / "source.csv").string() + " --target " +
                             (dir / "target.csv").string() + " --set lmax=5 --set max_iters=60 ";
  REQUIRE(run(common + "--threads 1 --dump-grids --out-dir " + (dir / "a").string(), dir).code == 0);

  const auto m = read_json(dir / "a" / "manifest.json");
  for (const auto& f : m["outputs"]) {
    const auto p = dir / "a" / f.get<std::string>();
    CHECK(fs::exists(p));
    CHECK(fs::file_size(p) > 0);
  }
  CHECK(m["dim"] == 2);
  CHECK(m["inputs"]["source"]["sha256"] == sha256_file(dir / "source.csv"));
  REQUIRE(m["levels"].size() == 2);
  CHECK(m["levels"][0]["nu"].get<double>() == 0.002);
  CHECK(m["levels"][1]["nu"].get<double>() == 0.002 / 10);
  CHECK(m["levels"][1]["c_vol"].get<double>() == 0.025 / 2);
  CHECK(m["final_residual"].get<double>() == m["levels"][1]["residual"].get<double>());

  std::size_t trace_rows = 0;
  for (const auto& l : m["levels"]) trace_rows += l["iterations"].get<std::size_t>() + 1;
  CHECK(lines_of(dir / "a" / "energy.csv").size() == trace_rows + 1);
  CHECK(lines_of(dir / "a" / "deformed.csv").size() == 301);

  {
    std::ofstream cfg(dir / "replay.cfg");
    for (const auto& [k, v] : m["config"].items()) cfg << k << " = " << v.get<std::string>() << '\n';
  }
  REQUIRE(run("match --quiet --source " + (dir / "source.csv").string() + " --target " +
                  (dir / "target.csv").string() + " --threads 1 --config " + (dir / "replay.cfg").string() +
                  " --out-dir " + (dir / "b").string(),
              dir)
              .code == 0);
  REQUIRE(run(common + "--threads 2 --out-dir " + (dir / "c").string(), dir).code == 0);
  const auto replay = read_json(dir / "b" / "manifest.json");
  const auto threaded = read_json(dir / "c" / "manifest.json");
  CHECK(replay["config"] == m["config"]);
  for (std::size_t i = 0; i < 2; ++i) {
    for (const char* stage : {"initial", "final"}) {
      for (const char* term : {"e_match", "e_mem", "e_bend", "e_vol", "total"}) {
        const double x = m["levels"][i][stage][term];
        CHECK(std::abs(replay["levels"][i][stage][term].get<double>() - x) <= 1e-12 * std::max(1.0, std::abs(x)));
        CHECK(std::abs(threaded["levels"][i][stage][term].get<double>() - x) <= 1e-10 * std::max(1.0, std::abs(x)));
      }
    }
  }
}

TEST_CASE("lab subcommands") {
  const auto dir = scratch("lab");
  REQUIRE(run("lab rank-one --samples 11 --out-dir " + (dir / "r").string(), dir).code == 0);
  const auto r1 = lines_of(dir / "r" / "rank_one.csv");
  REQUIRE(r1.size() == 12);
  CHECK(r1[1] == "0,1,0,0");
  CHECK(r1[6] == "0.5,0.5,0.5,0");
  CHECK(r1[11] == "1,1,0,0");

  REQUIRE(run("lab oscillation --R 0.95 --k 6,20,50 --out-dir " + (dir / "o").string(), dir).code == 0);
  const auto svg = lines_of(dir / "o" / "oscillation.svg");
  CHECK(std::count_if(svg.begin(), svg.end(), [](const std::string& s) { return s.rfind("<polyline", 0) == 0; }) == 3);
  const auto energy = lines_of(dir / "o" / "oscillation_energy.csv");
  CHECK(energy.size() == 4);

  REQUIRE(run("lab oscillation --R 0 --k 1 --out-dir " + (dir / "z").string(), dir).code == 0);
  const auto zero = lines_of(dir / "z" / "oscillation_energy.csv");
  REQUIRE(zero.size() == 2);
  CHECK(zero[1].substr(zero[1].size() - 4) == ",0,0");

  CHECK(run("lab oscillation --R 1.5", dir).code == 2);
  CHECK(run("lab oscillation --R 0.5 --k 0", dir).code == 2);
  CHECK(run("lab oscillation --R x", dir).code == 2);
  CHECK(run("lab rank-one --samples 1", dir).code == 2);
  CHECK(run("lab", dir).code == 1);
}
