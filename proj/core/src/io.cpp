#include "nsm/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nsm/errors.hpp"

namespace nsm {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_sidecar(const fs::path& path, const PhysicalParams& params,
                   double time, const Grid1D& g) {
  json j;
  j["hbar"] = params.hbar();
  j["mass"] = params.mass();
  j["time"] = time;
  j["boundary"] = to_string(g.boundary());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  out << j.dump(2) << "\n";
}

json read_sidecar(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("missing sidecar " + path.string());
  json j;
  in >> j;
  return j;
}

std::vector<std::vector<double>> read_csv_columns(const fs::path& path,
                                                  const std::string& expect_header) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("missing file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error("empty csv " + path.string());
  if (line != expect_header) {
    throw Error("unexpected header in " + path.string() + ": " + line);
  }
  const std::size_t ncol = static_cast<std::size_t>(
      std::count(expect_header.begin(), expect_header.end(), ',')) + 1;
  std::vector<std::vector<double>> cols(ncol);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t c = 0; c < ncol; ++c) {
      if (!std::getline(ss, cell, ',')) throw Error("short row in " + path.string());
      cols[c].push_back(std::stod(cell));
    }
  }
  return cols;
}

Grid1D grid_from_nodes(const std::vector<double>& xs, Boundary b) {
  if (xs.size() < 8) throw Error("csv grid too small");
  return Grid1D(xs.front(), xs.back(), xs.size(), b);
}

}  // namespace

void write_wavefunction_csv(const fs::path& path, const Wavefunction& psi,
                            const PhysicalParams& params) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  out << "x,re,im\n";
  for (std::size_t i = 0; i < psi.grid().size(); ++i) {
    out << format_double(psi.grid().node(i)) << ','
        << format_double(psi.values()[i].real()) << ','
        << format_double(psi.values()[i].imag()) << '\n';
  }
  write_sidecar(fs::path(path).concat(".json"), params, psi.time(), psi.grid());
}

Wavefunction read_wavefunction_csv(const fs::path& path) {
  const auto cols = read_csv_columns(path, "x,re,im");
  const json side = read_sidecar(fs::path(path).concat(".json"));
  const Grid1D g = grid_from_nodes(cols[0],
                                   boundary_from_string(side.at("boundary")));
  std::vector<cplx> v(cols[1].size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = cplx(cols[1][i], cols[2][i]);
  return Wavefunction(g, std::move(v), side.at("time").get<double>());
}

void write_density_csv(const fs::path& path, const Density& rho,
                       const PhysicalParams& params) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  out << "x,rho\n";
  for (std::size_t i = 0; i < rho.grid().size(); ++i) {
    out << format_double(rho.grid().node(i)) << ','
        << format_double(rho.values()[i]) << '\n';
  }
  write_sidecar(fs::path(path).concat(".json"), params, rho.time(), rho.grid());
}

Density read_density_csv(const fs::path& path) {
  const auto cols = read_csv_columns(path, "x,rho");
  const json side = read_sidecar(fs::path(path).concat(".json"));
  const Grid1D g = grid_from_nodes(cols[0],
                                   boundary_from_string(side.at("boundary")));
  return Density(g, cols[1], side.at("time").get<double>());
}

void write_history(const fs::path& dir, const WavefunctionHistory& h,
                   const PhysicalParams& params, const std::string& stem) {
  fs::create_directories(dir);
  json manifest;
  manifest["times"] = json::array();
  manifest["files"] = json::array();
  for (std::size_t k = 0; k < h.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%05zu.csv", stem.c_str(), k);
    write_wavefunction_csv(dir / name, h.frame(k), params);
    manifest["times"].push_back(h.times()[k]);
    manifest["files"].push_back(name);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot open manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

WavefunctionHistory read_history(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw MissingArtifactError("missing manifest in " + dir.string());
  json manifest;
  in >> manifest;
  std::vector<double> times;
  std::vector<std::vector<cplx>> frames;
  const Grid1D* grid = nullptr;
  Grid1D g(0.0, 1.0, 8);  // placeholder, replaced by first frame
  for (std::size_t k = 0; k < manifest.at("files").size(); ++k) {
    const fs::path p = dir / manifest.at("files")[k].get<std::string>();
    Wavefunction psi = read_wavefunction_csv(p);
    if (!grid) {
      g = psi.grid();
      grid = &g;
    }
    times.push_back(manifest.at("times")[k].get<double>());
    frames.push_back(psi.values());
  }
  return WavefunctionHistory(g, std::move(times), std::move(frames));
}

}  // namespace nsm
