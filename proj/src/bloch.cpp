#include "qmri/bloch.hpp"

#include <cmath>
#include <stdexcept>

#include "qmri/rng.hpp"

namespace qmri {

void TissueParams::validate() const {
    if (!(t1 > 0.0) || !(t2 > 0.0)) {
        throw std::domain_error("TissueParams: T1 and T2 must be strictly positive");
    }
}

PulseSequence PulseSequence::constant(std::size_t l, double alpha, double tr, double phi) {
    PulseSequence seq;
    seq.flip_angles.assign(l, alpha);
    seq.repetition_times.assign(l, tr);
    if (phi != 0.0) seq.phase_shifts.assign(l, phi);
    return seq;
}

void PulseSequence::validate() const {
    const double pi = 3.14159265358979323846;
    if (flip_angles.empty()) throw std::invalid_argument("PulseSequence: empty schedule");
    if (repetition_times.size() != flip_angles.size()) {
        throw std::invalid_argument("PulseSequence: flip angle / TR length mismatch");
    }
    if (!phase_shifts.empty() && phase_shifts.size() != flip_angles.size()) {
        throw std::invalid_argument("PulseSequence: phase shift length mismatch");
    }
    for (double a : flip_angles) {
        if (!(a > 0.0 && a < pi)) {
            throw std::domain_error("PulseSequence: flip angles must lie in (0, pi)");
        }
    }
    for (double tr : repetition_times) {
        if (!(tr > 0.0)) throw std::domain_error("PulseSequence: repetition times must be positive");
    }
}

std::uint64_t PulseSequence::fingerprint() const {
    std::uint64_t h = fnv1a(flip_angles.data(), flip_angles.size() * sizeof(double));
    h = fnv1a(repetition_times.data(), repetition_times.size() * sizeof(double), h);
    if (!phase_shifts.empty()) h = fnv1a(phase_shifts.data(), phase_shifts.size() * sizeof(double), h);
    h = fnv1a(initial_state.data(), 3 * sizeof(double), h);
    return h;
}

Eigen::Matrix3d rotation_matrix(double alpha, double phi) {
    const double cp = std::cos(phi), sp = std::sin(phi);
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    Eigen::Matrix3d r_phi;
    r_phi << cp, sp, 0.0,
             -sp, cp, 0.0,
             0.0, 0.0, 1.0;
    Eigen::Matrix3d r_x;
    r_x << 1.0, 0.0, 0.0,
           0.0, ca, sa,
           0.0, -sa, ca;
    return r_phi * r_x * r_phi.transpose();
}

RelaxationFactors relaxation_factors(double tr, const TissueParams& theta) {
    if (!(tr > 0.0)) throw std::domain_error("relaxation_factors: TR must be positive");
    theta.validate();
    RelaxationFactors f;
    const double e_t2 = std::exp(-tr / theta.t2);
    const double e_t1 = std::exp(-tr / theta.t1);
    f.e1_diag = Eigen::Vector3d(e_t2, e_t2, e_t1);
    f.e2 = 1.0 - e_t1;
    return f;
}

MagnetizationFrames simulate_sequence(const TissueParams& theta, const PulseSequence& seq,
                                      bool with_derivs) {
    theta.validate();
    const std::size_t l = seq.length();
    if (l == 0 || seq.repetition_times.size() != l) {
        throw std::invalid_argument("simulate_sequence: invalid schedule lengths");
    }

    MagnetizationFrames out;
    out.frames.resize(l);
    if (with_derivs) {
        out.d_t1.resize(l);
        out.d_t2.resize(l);
    }

    const Eigen::Vector3d m_e = seq.equilibrium;
    Eigen::Vector3d m = seq.initial_state;
    Eigen::Vector3d dm1 = Eigen::Vector3d::Zero();
    Eigen::Vector3d dm2 = Eigen::Vector3d::Zero();
    const double t1 = theta.t1, t2 = theta.t2;

    for (std::size_t ell = 0; ell < l; ++ell) {
        const double tr = seq.repetition_times[ell];
        if (!(tr > 0.0)) throw std::domain_error("simulate_sequence: TR must be positive");
        const Eigen::Matrix3d r = rotation_matrix(seq.flip_angles[ell], seq.phase(ell));
        const double e_t2 = std::exp(-tr / t2);
        const double e_t1 = std::exp(-tr / t1);
        const Eigen::Vector3d e1(e_t2, e_t2, e_t1);

        const Eigen::Vector3d rm = r * m;
        const Eigen::Vector3d m_next = e1.cwiseProduct(rm) + (1.0 - e_t1) * m_e;

        if (with_derivs) {
            // dE1/dT1 and dE1/dT2 applied to R m_{l-1} (the U1/U2 terms),
            // plus propagation through the previous derivative, plus the
            // dE2/dT1 source term.
            const double u1 = (tr / (t1 * t1)) * e_t1;
            const double u2 = (tr / (t2 * t2)) * e_t2;
            Eigen::Vector3d d1_next = e1.cwiseProduct(r * dm1);
            d1_next.z() += u1 * rm.z();
            d1_next -= u1 * m_e;
            Eigen::Vector3d d2_next = e1.cwiseProduct(r * dm2);
            d2_next.x() += u2 * rm.x();
            d2_next.y() += u2 * rm.y();
            dm1 = d1_next;
            dm2 = d2_next;
            out.d_t1[ell] = dm1;
            out.d_t2[ell] = dm2;
        }

        m = m_next;
        out.frames[ell] = m;
    }
    return out;
}

std::vector<Complex> transverse(const MagnetizationFrames& frames) {
    if (frames.frames.empty()) throw std::invalid_argument("transverse: empty frames");
    std::vector<Complex> out(frames.frames.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = Complex(frames.frames[i].x(), frames.frames[i].y());
    }
    return out;
}

namespace {

Eigen::Matrix3d precession(double omega0, double t) {
    const double c = std::cos(omega0 * t), s = std::sin(omega0 * t);
    Eigen::Matrix3d p;
    p << c, s, 0.0,
         -s, c, 0.0,
         0.0, 0.0, 1.0;
    return p;
}

Eigen::Matrix3d relaxation_diag(const TissueParams& theta, double t) {
    Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
    e(0, 0) = std::exp(-t / theta.t2);
    e(1, 1) = e(0, 0);
    e(2, 2) = std::exp(-t / theta.t1);
    return e;
}

}  // namespace

Eigen::Vector3d closed_form_solution(const ContinuousBlochSetup& setup, BlochCase which, double t) {
    if (t < 0.0) throw std::domain_error("closed_form_solution: t must be nonnegative");
    const Eigen::Vector3d m_e(0.0, 0.0, 1.0);
    const Eigen::Matrix3d p = precession(setup.omega0, t);
    switch (which) {
        case BlochCase::free_precession:
            return p * setup.m0;
        case BlochCase::relaxation: {
            setup.theta.validate();
            return p * relaxation_diag(setup.theta, t) * setup.m0 +
                   (1.0 - std::exp(-t / setup.theta.t1)) * m_e;
        }
        case BlochCase::excitation_only:
            return p * rotation_matrix(setup.alpha, 0.0) * setup.m0;
        case BlochCase::excitation_relaxation: {
            setup.theta.validate();
            return p * relaxation_diag(setup.theta, t) * rotation_matrix(setup.alpha, 0.0) * setup.m0 +
                   (1.0 - std::exp(-t / setup.theta.t1)) * m_e;
        }
    }
    throw std::invalid_argument("closed_form_solution: unknown case");
}

TrajectoryInversion invert_from_trajectory(const std::vector<Eigen::Vector3d>& samples, double tau,
                                           const Eigen::Vector3d& b_field, double gamma) {
    if (samples.size() < 2) throw std::invalid_argument("invert_from_trajectory: need >= 2 samples");
    if (!(tau > 0.0)) throw std::domain_error("invert_from_trajectory: tau must be positive");

    const std::size_t n = samples.size();
    const double dt = tau / static_cast<double>(n - 1);
    const Eigen::Vector3d m_e(0.0, 0.0, 1.0);

    // Composite trapezoid for int m dt and int m x gamma B dt.
    Eigen::Vector3d integral_m = Eigen::Vector3d::Zero();
    Eigen::Vector3d integral_cross = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        integral_m += w * samples[i];
        integral_cross += w * samples[i].cross(gamma * b_field);
    }
    integral_m *= dt;
    integral_cross *= dt;

    TrajectoryInversion out;
    out.omega_tau = integral_m - tau * m_e;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(out.omega_tau[i]) < 1e-12) {
            throw std::domain_error("invert_from_trajectory: degenerate trajectory (omega_tau ~ 0)");
        }
    }
    const Eigen::Vector3d numerator = samples.front() - samples.back() + integral_cross;
    out.big_theta = numerator.cwiseQuotient(out.omega_tau);
    out.theta.t1 = 1.0 / out.big_theta[2];
    out.theta.t2 = 1.0 / out.big_theta[0];
    return out;
}

}  // namespace qmri
