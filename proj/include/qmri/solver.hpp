#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qmri/encoding.hpp"

namespace qmri {

struct DiscrepancyStop {
    double varrho = 1.5;  // no paper-given value; configurable
    double delta = 0.0;   // noise level
};

struct CgConfig {
    double tol = 1e-8;  // relative residual
    int max_iters = 200;
};

struct SolverConfig {
    std::optional<double> lambda0;  // unset selects s^2 (1/s = undersampling rate)
    double beta = 0.01;             // lambda_n = max(lambda0 * beta^n, mu_n)
    double epsilon = 0.0;           // mu_n = epsilon * ||Q(x_n) - D||; >0 for noisy runs
    int max_iters = 25;
    std::optional<DiscrepancyStop> discrepancy;
    CgConfig cg;
    FeasibleBox box;
    bool project = true;            // false gives the standard (non-projected) L-M
    bool force_matrix_free = false; // disable the full-sampling per-pixel fast path
};

struct SolveReport {
    std::vector<double> residuals;  // ||Q(x_n) - D||, n = 0..iterations
    std::vector<double> lambdas;    // lambda_n used at step n
    std::vector<double> step_t1, step_t2, step_rho;  // ||x_{n+1} - x_n|| per channel
    std::vector<int> cg_iterations;                  // 0 for fast-path steps
    int iterations = 0;
    int frozen_pixels = 0;  // singular per-pixel blocks skipped by the fast path
    bool cg_converged = true;
    std::string termination;
    double wall_seconds = 0.0;
};

struct LmStepResult {
    UpdateField h;
    int cg_iterations = 0;
    bool converged = true;
};

/// Tikhonov-damped Gauss-Newton step: h minimizes
/// ||A h - (D - Q(x_n))||^2 + lambda ||h||^2, by CG on the normal equations.
LmStepResult lm_step(const ParameterMap& x, const KSpaceData& data, double lambda,
                     const BlochCache& cache, const CgConfig& cg);

/// Projected Levenberg-Marquardt iteration (Algorithm: data step, damped
/// normal-equation solve, box projection) with the lambda/mu schedule and an
/// optional discrepancy stop.
std::pair<ParameterMap, SolveReport> solve_lm(const ParameterMap& x0, const KSpaceData& data,
                                              const PulseSequence& seq, const SolverConfig& cfg);

/// Projected Gauss-Newton: lambda == 0. With full sampling the normal matrix is
/// block-diagonal per pixel and solved directly; singular blocks are frozen.
std::pair<ParameterMap, SolveReport> solve_gauss_newton(const ParameterMap& x0,
                                                        const KSpaceData& data,
                                                        const PulseSequence& seq, SolverConfig cfg);

}  // namespace qmri
