#pragma once

#include <optional>
#include <vector>

#include "qmri/bloch.hpp"
#include "qmri/encoding.hpp"
#include "qmri/solver.hpp"

namespace qmri {

/// Channel-wise relative errors ||x - x*||_2 / ||x*||_2 over the effective
/// domain, plus pointwise absolute error maps.
struct ErrorReport {
    double t1 = 0.0, t2 = 0.0;
    double rho = 0.0;                    // combined complex error
    double rho_re = 0.0, rho_im = 0.0;   // split channels (imag defined for complex maps)
    bool t1_defined = true, t2_defined = true, rho_defined = true;
    RealGrid t1_abs, t2_abs, rho_abs;
    double wall_seconds = 0.0;
};

/// Errors are computed over the truth map's effective domain.
ErrorReport error_rate(const ParameterMap& computed, const ParameterMap& truth);

/// Iterate ratios ||x_{n+1}-x_n|| / ||x_n-x_{n-1}|| per channel; series stop at
/// the first zero step (converged).
struct RatioSeries {
    std::vector<double> t1, t2, rho;
};
RatioSeries iterate_ratios(const SolveReport& report);

/// Monte-Carlo check of the least-squares noise bound: empirical
/// P(||z_ls - z*|| > eps) against sigma^2 Tr((A^T A)^{-1}) / eps^2.
struct ChebyshevRow {
    int frames = 0;  // L
    double epsilon = 0.0;
    double empirical = 0.0;
    double bound = 0.0;
    double trace_inv_gram = 0.0;
};

struct ChebyshevConfig {
    int dims = 4;       // p
    int rows = 8;       // d, per block
    std::vector<int> frame_counts{4, 16, 64};
    std::vector<double> epsilons{0.05, 0.1, 0.2};
    double sigma = 0.1;
    int trials = 10000;
    double sv_lo = 1.0, sv_hi = 1.4;  // singular value band [sqrt(c), sqrt(C)]
    std::uint64_t seed = 7;
};

std::vector<ChebyshevRow> chebyshev_trial(const ChebyshevConfig& cfg);

/// Numerical non-convexity certificate: distance of the midpoint of two Bloch
/// trajectories to the sampled Bloch image, estimated by a grid scan with
/// local refinement.
struct NonconvexityCertificate {
    double margin = 0.0;          // min over the scanned grid of ||M(theta) - y||
    TissueParams nearest_theta;   // argmin of the scan
    double grid_resolution = 0.0; // finest scan spacing (caveat for the margin)
};

struct NonconvexityConfig {
    double t1_lo = 530.0, t1_hi = 5012.0;
    double t2_lo = 41.0, t2_hi = 512.0;
    int coarse_steps = 60;
    int refinements = 4;
};

NonconvexityCertificate nonconvexity_certificate(const TissueParams& theta_a,
                                                 const TissueParams& theta_b,
                                                 const PulseSequence& seq,
                                                 const NonconvexityConfig& cfg = {});

}  // namespace qmri
