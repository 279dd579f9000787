#include "qmri/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qmri/parallel.hpp"
#include "qmri/rng.hpp"

namespace qmri {

ErrorReport error_rate(const ParameterMap& computed, const ParameterMap& truth) {
    if (computed.n != truth.n) throw std::invalid_argument("error_rate: grid size mismatch");
    ErrorReport rep;
    rep.t1_abs = RealGrid(truth.n);
    rep.t2_abs = RealGrid(truth.n);
    rep.rho_abs = RealGrid(truth.n);

    double num_t1 = 0.0, den_t1 = 0.0;
    double num_t2 = 0.0, den_t2 = 0.0;
    double num_rho = 0.0, den_rho = 0.0;
    double num_re = 0.0, den_re = 0.0, num_im = 0.0, den_im = 0.0;
    for (std::size_t i = 0; i < truth.t1.count(); ++i) {
        if (!truth.omega[i]) continue;
        const double d1 = computed.t1[i] - truth.t1[i];
        const double d2 = computed.t2[i] - truth.t2[i];
        const Complex dr = computed.rho[i] - truth.rho[i];
        rep.t1_abs[i] = std::abs(d1);
        rep.t2_abs[i] = std::abs(d2);
        rep.rho_abs[i] = std::abs(dr);
        num_t1 += d1 * d1;
        den_t1 += truth.t1[i] * truth.t1[i];
        num_t2 += d2 * d2;
        den_t2 += truth.t2[i] * truth.t2[i];
        num_rho += std::norm(dr);
        den_rho += std::norm(truth.rho[i]);
        num_re += dr.real() * dr.real();
        den_re += truth.rho[i].real() * truth.rho[i].real();
        num_im += dr.imag() * dr.imag();
        den_im += truth.rho[i].imag() * truth.rho[i].imag();
    }
    rep.t1_defined = den_t1 > 0.0;
    rep.t2_defined = den_t2 > 0.0;
    rep.rho_defined = den_rho > 0.0;
    rep.t1 = rep.t1_defined ? std::sqrt(num_t1 / den_t1) : 0.0;
    rep.t2 = rep.t2_defined ? std::sqrt(num_t2 / den_t2) : 0.0;
    rep.rho = rep.rho_defined ? std::sqrt(num_rho / den_rho) : 0.0;
    rep.rho_re = den_re > 0.0 ? std::sqrt(num_re / den_re) : 0.0;
    rep.rho_im = den_im > 0.0 ? std::sqrt(num_im / den_im) : 0.0;
    return rep;
}

namespace {

std::vector<double> ratio_series(const std::vector<double>& steps) {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
        if (steps[i] == 0.0) break;  // converged; truncate
        out.push_back(steps[i + 1] / steps[i]);
    }
    return out;
}

}  // namespace

RatioSeries iterate_ratios(const SolveReport& report) {
    if (report.iterations < 2) return {};
    RatioSeries s;
    s.t1 = ratio_series(report.step_t1);
    s.t2 = ratio_series(report.step_t2);
    s.rho = ratio_series(report.step_rho);
    return s;
}

namespace {

Eigen::MatrixXd random_orthogonal(int n, RandomStream& rng) {
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) g(i, j) = rng.next_normal();
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    // Fix the sign convention so the factor is a deterministic function of g.
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

}  // namespace

std::vector<ChebyshevRow> chebyshev_trial(const ChebyshevConfig& cfg) {
    if (cfg.dims > cfg.rows) throw std::invalid_argument("chebyshev_trial: need p <= d");
    std::vector<ChebyshevRow> table;

    for (const int l : cfg.frame_counts) {
        RandomStream gen = RandomStream::substream(cfg.seed, static_cast<std::uint64_t>(l));

        // Blocks A_l with singular values held in the prescribed band.
        std::vector<Eigen::MatrixXd> blocks;
        blocks.reserve(l);
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(cfg.dims, cfg.dims);
        for (int ell = 0; ell < l; ++ell) {
            const Eigen::MatrixXd u = random_orthogonal(cfg.rows, gen);
            const Eigen::MatrixXd v = random_orthogonal(cfg.dims, gen);
            Eigen::MatrixXd sv = Eigen::MatrixXd::Zero(cfg.rows, cfg.dims);
            for (int k = 0; k < cfg.dims; ++k) {
                const double t = cfg.dims == 1 ? 0.0 : static_cast<double>(k) / (cfg.dims - 1);
                sv(k, k) = cfg.sv_lo + t * (cfg.sv_hi - cfg.sv_lo);
            }
            Eigen::MatrixXd a = u * sv * v.transpose();
            gram += a.transpose() * a;
            blocks.push_back(std::move(a));
        }

        const Eigen::MatrixXd gram_inv = gram.inverse();
        const double trace_inv = gram_inv.trace();

        // Common solution and exact right-hand sides.
        Eigen::VectorXd z_star(cfg.dims);
        for (int k = 0; k < cfg.dims; ++k) z_star(k) = gen.next_normal();
        std::vector<Eigen::VectorXd> b(l);
        for (int ell = 0; ell < l; ++ell) b[ell] = blocks[ell] * z_star;

        // z_ls = (A^T A)^{-1} A^T b~; only the noise varies per trial.
        std::vector<int> exceed(cfg.epsilons.size(), 0);
        RandomStream noise = RandomStream::substream(cfg.seed ^ 0x5bd1e995ULL, static_cast<std::uint64_t>(l));
        for (int trial = 0; trial < cfg.trials; ++trial) {
            Eigen::VectorXd at_b = Eigen::VectorXd::Zero(cfg.dims);
            for (int ell = 0; ell < l; ++ell) {
                Eigen::VectorXd noisy = b[ell];
                for (int k = 0; k < cfg.rows; ++k) noisy(k) += cfg.sigma * noise.next_normal();
                at_b += blocks[ell].transpose() * noisy;
            }
            const Eigen::VectorXd z_ls = gram_inv * at_b;
            const double err = (z_ls - z_star).norm();
            for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
                if (err > cfg.epsilons[e]) ++exceed[e];
            }
        }

        for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
            ChebyshevRow row;
            row.frames = l;
            row.epsilon = cfg.epsilons[e];
            row.empirical = static_cast<double>(exceed[e]) / cfg.trials;
            row.bound = cfg.sigma * cfg.sigma * trace_inv / (cfg.epsilons[e] * cfg.epsilons[e]);
            row.trace_inv_gram = trace_inv;
            table.push_back(row);
        }
    }
    return table;
}

namespace {

double midpoint_distance(const TissueParams& theta, const std::vector<Eigen::Vector3d>& target,
                         const PulseSequence& seq) {
    const MagnetizationFrames sim = simulate_sequence(theta, seq);
    double s = 0.0;
    for (std::size_t ell = 0; ell < target.size(); ++ell) {
        s += (sim.frames[ell] - target[ell]).squaredNorm();
    }
    return std::sqrt(s);
}

}  // namespace

NonconvexityCertificate nonconvexity_certificate(const TissueParams& theta_a,
                                                 const TissueParams& theta_b,
                                                 const PulseSequence& seq,
                                                 const NonconvexityConfig& cfg) {
    theta_a.validate();
    theta_b.validate();
    if (seq.length() < 2) throw std::invalid_argument("nonconvexity_certificate: need L >= 2");

    const MagnetizationFrames ma = simulate_sequence(theta_a, seq);
    const MagnetizationFrames mb = simulate_sequence(theta_b, seq);
    std::vector<Eigen::Vector3d> midpoint(seq.length());
    for (std::size_t ell = 0; ell < seq.length(); ++ell) {
        midpoint[ell] = 0.5 * (ma.frames[ell] + mb.frames[ell]);
    }

    double t1_lo = cfg.t1_lo, t1_hi = cfg.t1_hi;
    double t2_lo = cfg.t2_lo, t2_hi = cfg.t2_hi;
    TissueParams best{0.0, 0.0};
    double best_dist = std::numeric_limits<double>::infinity();
    double resolution = 0.0;

    for (int level = 0; level <= cfg.refinements; ++level) {
        const int steps = cfg.coarse_steps;
        const double d1 = (t1_hi - t1_lo) / steps;
        const double d2 = (t2_hi - t2_lo) / steps;
        resolution = std::max(d1, d2);
        for (int i = 0; i <= steps; ++i) {
            for (int j = 0; j <= steps; ++j) {
                const TissueParams theta{t1_lo + i * d1, t2_lo + j * d2};
                const double dist = midpoint_distance(theta, midpoint, seq);
                if (dist < best_dist) {
                    best_dist = dist;
                    best = theta;
                }
            }
        }
        // Refine around the incumbent, clipped to the original box.
        const double w1 = 2.0 * d1, w2 = 2.0 * d2;
        t1_lo = std::max(cfg.t1_lo, best.t1 - w1);
        t1_hi = std::min(cfg.t1_hi, best.t1 + w1);
        t2_lo = std::max(cfg.t2_lo, best.t2 - w2);
        t2_hi = std::min(cfg.t2_hi, best.t2 + w2);
    }

    NonconvexityCertificate cert;
    cert.margin = best_dist;
    cert.nearest_theta = best;
    cert.grid_resolution = resolution;
    return cert;
}

}  // namespace qmri
