#pragma once

#include <filesystem>
#include <string>

#include "qmri/baselines.hpp"
#include "qmri/dictionary.hpp"
#include "qmri/encoding.hpp"
#include "qmri/metrics.hpp"
#include "qmri/phantom.hpp"
#include "qmri/solver.hpp"

namespace qmri {

inline constexpr const char* kFormatVersion = "0.1.0";

/// Configuration / input-file problems; the CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// k-space: little-endian f64 (re, im) pairs, frame-major then row-major, with
// a JSON sidecar {N, L, mask, sigma, seed, version} next to it (.json suffix).
void save_kspace(const std::filesystem::path& bin_path, const KSpaceData& data);
KSpaceData load_kspace(const std::filesystem::path& bin_path);

// Parameter maps: one CSV per channel (t1.csv, t2.csv, rho_re.csv, rho_im.csv),
// row-major with an N header line.
void save_map(const std::filesystem::path& dir, const ParameterMap& map);
ParameterMap load_map(const std::filesystem::path& dir);

/// Generic raw-map loader: three channel CSVs plus a 0/1 mask CSV.
ParameterMap load_raw_map(const std::filesystem::path& t1_csv, const std::filesystem::path& t2_csv,
                          const std::filesystem::path& rho_csv, const std::filesystem::path& mask_csv);

// Dictionary: binary fingerprint blob + JSON header (grids, seq hash, version).
void save_dictionary(const std::filesystem::path& bin_path, const Dictionary& dict);
Dictionary load_dictionary(const std::filesystem::path& bin_path);

void save_solve_report(const std::filesystem::path& csv_path, const SolveReport& report);
void save_residual_trace(const std::filesystem::path& csv_path, const std::vector<double>& residuals);
void save_chebyshev_table(const std::filesystem::path& csv_path,
                          const std::vector<ChebyshevRow>& table);

PhantomSpec load_phantom_spec(const std::filesystem::path& json_path);
void save_phantom_spec(const std::filesystem::path& json_path, const PhantomSpec& spec);

SamplingMask mask_from_descriptor(const std::string& json_text);

}  // namespace qmri
