#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qmri/bloch.hpp"

namespace qmri {

struct MatchResult {
    TissueParams theta;              // zero for background
    double rho_mag = 0.0;            // ||X|| / ||T m||, always >= 0
    Complex rho{0.0, 0.0};           // phase-bearing density (== rho_mag when matching real)
    std::optional<std::size_t> atom_index;  // nullopt marks a background pixel
};

/// Fingerprint dictionary over a Cartesian (T1, T2) grid. Atoms enumerate the
/// grid in row-major, T1-outer order; fingerprints are stored normalized with
/// the pre-normalization norm kept alongside for density recovery.
class Dictionary {
public:
    Dictionary() = default;

    std::size_t atom_count() const { return theta_.size(); }
    std::size_t frame_count() const { return frames_; }
    const TissueParams& theta(std::size_t j) const { return theta_[j]; }
    double norm(std::size_t j) const { return norms_[j]; }
    Complex fingerprint(std::size_t j, std::size_t ell) const {
        const std::size_t at = j * frames_ + ell;
        return {fp_re_[at], fp_im_[at]};
    }

    const std::vector<double>& t1_grid() const { return t1_grid_; }
    const std::vector<double>& t2_grid() const { return t2_grid_; }
    std::uint64_t sequence_fingerprint() const { return seq_fingerprint_; }

    /// Nearest-fingerprint match for one trajectory. complex_mode selects the
    /// modulus-of-inner-product score (phase-invariant); otherwise the plain
    /// real inner product is used. Ties break to the lowest atom index.
    MatchResult match_pixel(std::span<const Complex> trajectory, bool complex_mode = false) const;

    /// Batch form over pixel-major trajectories (npix blocks of L values);
    /// exact same results as per-pixel matching, scan order is cache-blocked.
    std::vector<MatchResult> match_many(std::span<const Complex> trajectories, std::size_t npix,
                                        bool complex_mode = false) const;

    friend Dictionary build_dictionary(const std::vector<double>& t1_grid,
                                       const std::vector<double>& t2_grid, const PulseSequence& seq);
    friend struct DictionaryCodec;

private:
    std::size_t frames_ = 0;
    std::vector<TissueParams> theta_;
    std::vector<double> fp_re_, fp_im_;  // atom-major J x L, unit-norm rows
    std::vector<double> norms_;
    std::vector<double> t1_grid_, t2_grid_;
    std::uint64_t seq_fingerprint_ = 0;
};

Dictionary build_dictionary(const std::vector<double>& t1_grid, const std::vector<double>& t2_grid,
                            const PulseSequence& seq);

/// Inclusive arithmetic grid {start, start+step, ...} up to stop (with a small
/// tolerance so 15:15:5500 yields 366 values).
std::vector<double> arange_grid(double start, double stop, double step);

}  // namespace qmri
