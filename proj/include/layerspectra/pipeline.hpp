#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "layerspectra/records.hpp"

namespace layerspectra {

inline constexpr int kSchemaVersion = 1;

struct ProfileSpec {
  std::string family = "flat";  // flat | gaussian_bump | turning | table
  double beta = 0.0;
  double width = 1.0;
  double theta = 0.0;
  std::string table;  // CSV path, relative to the config file
};

struct NumericsConfig {
  double h = 0.0;      // meridian step; <= 0: min(length/100, a/20)
  double s_max = 0.0;  // <= 0: max(50 length, 100 a)
  std::vector<double> sigma_sweep = TrialFamily::default_sigmas();
  int mesh_levels = 3;
  std::size_t mesh_u_cells = 8;
  double mesh_h_s = 0.0;                  // <= 0: min(a, length) / 2
  std::vector<double> truncation_fractions{0.5, 1.0};  // of s_max
  double eig_tol = 1e-10;
  int eig_count = 3;
  std::vector<int> angular_modes{0};
  double flatness_tolerance = 1e-2;
  bool force_perturbation = false;
  double margin_factor = 2.0;  // bound-state margin in units of the uncertainty
};

struct SweepSpec {
  std::vector<double> beta;
  std::vector<double> width;
  std::vector<double> half_width;           // absolute a, or
  std::vector<double> half_width_fraction;  // a as a fraction of rho_m
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string command = "validate";
  ProfileSpec profile;
  std::optional<double> half_width;
  std::optional<double> half_width_fraction;
  NumericsConfig numerics;
  std::string output_dir;
  std::uint64_t seed = 12345;
  std::optional<SweepSpec> sweep;
  // Directory of the config file; resolves relative table paths. Not serialized.
  std::filesystem::path base_dir;
};

RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
Json to_json(const RunConfig& c);

bool is_command(const std::string& name);

// Everything derived from a config before the heavy work: the profile, the
// resolved half-width and numerical knobs.
struct ResolvedRun {
  CurvatureProfile profile;
  double a = 0.0;
  double rho_m = 0.0;
  double h = 0.0;
  double s_max = 0.0;
};

CurvatureProfile make_profile(const RunConfig& config);
ResolvedRun resolve(const RunConfig& config);

// Content hash of the inputs: canonical config without command and output
// location, plus the bytes of a table profile.
std::string input_hash(const RunConfig& config);

struct RunOutcome {
  int exit_code = 0;
  std::filesystem::path run_dir;
  Json record;
  std::string message;
};

// Executes one command. Exit codes: 0 completed, 1 other failure,
// 2 schema violation, 3 inadmissible layer, 4 numerical failure.
RunOutcome run(const RunConfig& config, const std::filesystem::path& output_root,
               int workers = 1);

// Output root: explicit flag, then LAYERSPECTRA_OUT, then the config, then "runs".
std::filesystem::path output_root(const RunConfig& config, const std::string& flag);

std::string version_string();

}  // namespace layerspectra
