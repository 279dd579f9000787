#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "qmri/grid.hpp"

namespace qmri {

/// Tissue relaxation times in milliseconds. Both must be strictly positive.
struct TissueParams {
    double t1 = 0.0;
    double t2 = 0.0;

    void validate() const;
};

/// IR-bSSFP excitation schedule: L flip angles (rad), repetition times (ms)
/// and phase shifts (rad), plus the initial and equilibrium magnetization.
struct PulseSequence {
    std::vector<double> flip_angles;
    std::vector<double> repetition_times;
    std::vector<double> phase_shifts;  // empty means all-zero
    Eigen::Vector3d initial_state{0.0, 0.0, -1.0};
    Eigen::Vector3d equilibrium{0.0, 0.0, 1.0};

    std::size_t length() const { return flip_angles.size(); }
    double phase(std::size_t ell) const { return phase_shifts.empty() ? 0.0 : phase_shifts[ell]; }

    /// Constant-schedule sequence of length l.
    static PulseSequence constant(std::size_t l, double alpha, double tr, double phi = 0.0);

    /// Strict validation used by reconstruction: alpha in the open interval
    /// (0, pi), TR > 0, matching lengths. Simulation itself tolerates the
    /// closed endpoints (the recursion stays defined there).
    void validate() const;

    std::uint64_t fingerprint() const;
};

/// Single-trajectory magnetization frames M_1..M_L, optionally with the
/// analytic parameter derivatives carried alongside.
struct MagnetizationFrames {
    std::vector<Eigen::Vector3d> frames;
    std::vector<Eigen::Vector3d> d_t1;  // dM_l/dT1, per ms
    std::vector<Eigen::Vector3d> d_t2;  // dM_l/dT2
    bool has_derivs() const { return !d_t1.empty(); }
};

struct RelaxationFactors {
    Eigen::Vector3d e1_diag;  // (e^{-TR/T2}, e^{-TR/T2}, e^{-TR/T1})
    double e2 = 0.0;          // 1 - e^{-TR/T1}
};

/// R(alpha) = R_phi R_x(alpha) R_phi^T; orthogonal with determinant 1.
Eigen::Matrix3d rotation_matrix(double alpha, double phi);

RelaxationFactors relaxation_factors(double tr, const TissueParams& theta);

/// Runs the discrete IR-bSSFP recursion
///   M_l = E1 R(alpha_l) M_{l-1} + E2 M_e
/// and, when requested, the forward-mode derivative recursion in the same pass.
MagnetizationFrames simulate_sequence(const TissueParams& theta, const PulseSequence& seq,
                                      bool with_derivs = false);

/// Transverse projection T_{x,y} m = m_x + i m_y per frame.
std::vector<Complex> transverse(const MagnetizationFrames& frames);

/// Continuous Bloch setups (closed forms used as verification oracles).
struct ContinuousBlochSetup {
    double omega0 = 0.0;  // Larmor angular frequency gamma*|B0|, rad/ms
    TissueParams theta;
    double alpha = 0.0;  // instantaneous-pulse flip angle, rad
    Eigen::Vector3d m0{0.0, 0.0, 1.0};
};

enum class BlochCase {
    free_precession,        // m(t) = P(t) m0
    relaxation,             // m(t) = P(t) E(t) m0 + (1 - e^{-t/T1}) m_e
    excitation_only,        // m(t) = P(t) R_x(alpha) m0
    excitation_relaxation,  // m(t) = P(t) E(t) R_x(alpha) m0 + (1 - e^{-t/T1}) m_e
};

Eigen::Vector3d closed_form_solution(const ContinuousBlochSetup& setup, BlochCase which, double t);

/// Result of the integral inversion formula
///   Theta = (m(0) - m(tau) + int m x gamma B dt) ./ omega_tau,
/// omega_tau = int m dt - m_e tau, with theta = (1/Theta_3, 1/Theta_1).
struct TrajectoryInversion {
    Eigen::Vector3d big_theta;  // (1/T2, 1/T2, 1/T1)
    TissueParams theta;
    Eigen::Vector3d omega_tau;
};

/// Composite-trapezoid inversion of a uniformly sampled trajectory on [0, tau].
/// Throws std::domain_error when any |omega_tau_i| < 1e-12 (degenerate trajectory).
TrajectoryInversion invert_from_trajectory(const std::vector<Eigen::Vector3d>& samples, double tau,
                                           const Eigen::Vector3d& b_field, double gamma);

}  // namespace qmri
