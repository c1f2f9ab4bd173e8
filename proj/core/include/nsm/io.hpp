#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nsm/params.hpp"
#include "nsm/schrodinger.hpp"
#include "nsm/wavefunction.hpp"

namespace nsm {

// Shortest round-trip decimal representation; output is byte-stable for a
// given build, which the determinism contract relies on.
std::string format_double(double v);

// Wavefunction CSV, header "x,re,im", plus JSON sidecar
// {hbar, mass, time, boundary} at path + ".json".
void write_wavefunction_csv(const std::filesystem::path& path,
                            const Wavefunction& psi, const PhysicalParams& params);
Wavefunction read_wavefunction_csv(const std::filesystem::path& path);

// Density CSV, header "x,rho", same sidecar convention.
void write_density_csv(const std::filesystem::path& path, const Density& rho,
                       const PhysicalParams& params);
Density read_density_csv(const std::filesystem::path& path);

// One CSV per checkpoint frame under dir, plus manifest.json listing times
// and file names.
void write_history(const std::filesystem::path& dir, const WavefunctionHistory& h,
                   const PhysicalParams& params, const std::string& stem = "frame");
WavefunctionHistory read_history(const std::filesystem::path& dir);

}  // namespace nsm
