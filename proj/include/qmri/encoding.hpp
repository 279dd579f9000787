#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qmri/bloch.hpp"
#include "qmri/fft.hpp"
#include "qmri/grid.hpp"

namespace qmri {

// ---------------------------------------------------------------------------
// Sampling masks

enum class MaskKind { full, cartesian, radial };

/// Cartesian frame ell (1-based) keeps the 1-based rows {i : i mod s == ell mod s}.
/// Row indices are 1-based throughout to match the multishot EPI schedule
/// convention; apply() converts internally.
std::vector<int> cartesian_mask_rows(int n, int s, int ell);

/// Radial frame ell (1-based) keeps s one-pixel-wide digital lines through the
/// grid center at angles {((k*p/s + ell - 1) mod p) * pi/p}. The returned grid
/// is in centered k-space layout (DC at (N/2, N/2)).
BoolGrid radial_mask_grid(int n, int p, int s, int ell);

/// Per-frame sub-sampling pattern over L k-space frames.
class SamplingMask {
public:
    static SamplingMask full(int n, int frames);
    static SamplingMask cartesian(int n, int frames, int s);
    static SamplingMask radial(int n, int frames, int p, int s);

    MaskKind kind() const { return kind_; }
    int size() const { return n_; }
    int frames() const { return frames_; }
    int cartesian_factor() const { return s_; }
    int radial_angles() const { return p_; }
    int radial_lines() const { return s_; }

    /// Zero out unsampled positions of frame ell (0-based frame index).
    void apply(ComplexGrid& frame, int ell) const;
    bool sampled(int ell, int row, int col) const;

    /// Boolean grid of frame ell in the DFT's own (unshifted) indexing.
    BoolGrid frame_grid(int ell) const;
    /// Centered view (DC at (N/2, N/2)); radial lines pass through the center here.
    BoolGrid frame_grid_centered(int ell) const;

    double coverage_fraction_union() const;  // over one period of frames

    std::string descriptor() const;  // reproducible textual descriptor

private:
    SamplingMask() = default;
    void build_radial();

    MaskKind kind_ = MaskKind::full;
    int n_ = 0;
    int frames_ = 0;
    int s_ = 1;
    int p_ = 0;
    // Radial only: per-frame boolean grids for one period, unshifted layout.
    std::vector<BoolGrid> radial_frames_;
    int radial_period_ = 1;
};

// ---------------------------------------------------------------------------
// Parameter maps and the feasible box

/// Per-channel clamp bounds for (T1, T2, Re rho, Im rho).
struct FeasibleBox {
    double t1_lo = 0.0, t1_hi = 5500.0;
    double t2_lo = 0.0, t2_hi = 550.0;
    double rho_re_lo = 0.0, rho_re_hi = 100.0;
    double rho_im_lo = 0.0, rho_im_hi = 100.0;

    void validate() const;
};

/// Per-pixel (T1, T2, rho) over an N x N grid with the effective-domain mask.
/// Off-domain pixels hold zeros in every channel.
struct ParameterMap {
    int n = 0;
    RealGrid t1, t2;
    ComplexGrid rho;
    BoolGrid omega;
    bool complex_rho = false;

    ParameterMap() = default;
    explicit ParameterMap(int n_, bool complex_rho_ = false)
        : n(n_), t1(n_), t2(n_), rho(n_), omega(n_), complex_rho(complex_rho_) {}

    /// Omega := support of |rho| > 0.
    void recompute_omega();
    std::uint64_t theta_fingerprint() const;
};

ParameterMap project_box(const ParameterMap& x, const FeasibleBox& box);

// ---------------------------------------------------------------------------
// k-space data

struct KSpaceData {
    std::vector<ComplexGrid> frames;
    SamplingMask mask = SamplingMask::full(1, 1);
    double sigma = 0.0;
    std::uint64_t seed = 0;

    int size() const { return frames.empty() ? 0 : frames.front().size(); }
    std::size_t frame_count() const { return frames.size(); }
    double norm() const;
};

// ---------------------------------------------------------------------------
// The qMRI operator Q, its Jacobian and adjoint (matrix-free)

/// Per-pixel transverse magnetization and parameter derivatives evaluated at a
/// fixed map x; immutable once built. Layout is pixel-major: entry [pix*L + l].
struct BlochCache {
    int n = 0;
    std::size_t frames = 0;
    std::vector<Complex> m;    // T_{x,y} M_l(theta)
    std::vector<Complex> d1;   // T_{x,y} dM_l/dT1
    std::vector<Complex> d2;   // T_{x,y} dM_l/dT2
    std::vector<Complex> rho;  // rho at the cache point
    std::uint64_t theta_fingerprint = 0;
    std::uint64_t seq_fingerprint = 0;
};

BlochCache build_cache(const ParameterMap& x, const PulseSequence& seq, bool with_derivs = true);

/// D^(l) = P^(l) dft2(rho .* T_{x,y} M_l(theta)).
KSpaceData forward_q(const ParameterMap& x, const PulseSequence& seq, const SamplingMask& mask);
KSpaceData forward_q_cached(const BlochCache& cache, const SamplingMask& mask);

/// Solver-facing perturbation: complex rho carried as two real channels.
struct UpdateField {
    int n = 0;
    RealGrid rho_re, rho_im, t1, t2;
    bool complex_rho = false;

    UpdateField() = default;
    explicit UpdateField(int n_, bool complex_rho_)
        : n(n_), rho_re(n_), rho_im(n_), t1(n_), t2(n_), complex_rho(complex_rho_) {}

    double dot(const UpdateField& other) const;
    double squared_norm() const { return dot(*this); }
    void axpy(double a, const UpdateField& other);  // this += a*other
    void scale(double a);
};

/// A h = P F(h_rho .* T M(theta)) + P F(rho .* T M'(theta) h_theta), per frame.
/// Throws std::invalid_argument when cache and x disagree (theta fingerprint).
std::vector<ComplexGrid> jacobian_apply(const ParameterMap& x, const UpdateField& h,
                                        const BlochCache& cache, const SamplingMask& mask);

/// Adjoint of jacobian_apply under the real inner product that identifies
/// complex grids with pairs of real grids.
UpdateField jacobian_adjoint_apply(const ParameterMap& x, const std::vector<ComplexGrid>& residual,
                                   const BlochCache& cache, const SamplingMask& mask);

}  // namespace qmri
