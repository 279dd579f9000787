#include "qmri/solver.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "qmri/parallel.hpp"

namespace qmri {

namespace {

std::vector<ComplexGrid> data_minus_forward(const KSpaceData& data, const KSpaceData& q) {
    std::vector<ComplexGrid> r(data.frame_count(), ComplexGrid(data.size()));
    for (std::size_t ell = 0; ell < r.size(); ++ell) {
        for (std::size_t i = 0; i < r[ell].count(); ++i) {
            r[ell][i] = data.frames[ell][i] - q.frames[ell][i];
        }
    }
    return r;
}

double frames_norm(const std::vector<ComplexGrid>& frames) {
    double s = 0.0;
    for (const auto& f : frames) s += squared_norm(f);
    return std::sqrt(s);
}

double default_lambda0(const KSpaceData& data) {
    // lambda0 = s^2 with 1/s the undersampling rate, generalized through the
    // sampled fraction of one frame.
    const int n = data.size();
    std::size_t sampled = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) sampled += data.mask.sampled(0, i, j) ? 1 : 0;
    }
    if (sampled == 0) return 1.0;
    const double s = static_cast<double>(n) * n / static_cast<double>(sampled);
    return s * s;
}

struct ChannelSteps {
    double t1 = 0.0, t2 = 0.0, rho = 0.0;
};

ChannelSteps step_norms(const ParameterMap& a, const ParameterMap& b) {
    ChannelSteps s;
    double st1 = 0.0, st2 = 0.0, srho = 0.0;
    for (std::size_t i = 0; i < a.t1.count(); ++i) {
        const double d1 = a.t1[i] - b.t1[i];
        const double d2 = a.t2[i] - b.t2[i];
        st1 += d1 * d1;
        st2 += d2 * d2;
        srho += std::norm(a.rho[i] - b.rho[i]);
    }
    s.t1 = std::sqrt(st1);
    s.t2 = std::sqrt(st2);
    s.rho = std::sqrt(srho);
    return s;
}

ParameterMap apply_update(const ParameterMap& x, const UpdateField& h) {
    ParameterMap out = x;
    for (std::size_t i = 0; i < out.t1.count(); ++i) {
        out.t1[i] += h.t1[i];
        out.t2[i] += h.t2[i];
        out.rho[i] += Complex(h.rho_re[i], x.complex_rho ? h.rho_im[i] : 0.0);
    }
    out.recompute_omega();
    return out;
}

/// Direct per-pixel solve of (A^T A + lambda I) h = A^T r for full sampling:
/// with P = Id and a unitary DFT the Gram matrix is block-diagonal per pixel.
LmStepResult fast_path_step(const ParameterMap& x, const std::vector<ComplexGrid>& residual,
                            double lambda, const BlochCache& cache, int* frozen_count) {
    const std::size_t l = cache.frames;
    const int n = cache.n;
    const int channels = x.complex_rho ? 4 : 3;

    // Image-space residual per frame.
    std::vector<ComplexGrid> w(l, ComplexGrid(n));
    parallel_chunks(l, [&](std::size_t begin, std::size_t end) {
        for (std::size_t ell = begin; ell < end; ++ell) w[ell] = idft2(residual[ell]);
    });

    LmStepResult out;
    out.h = UpdateField(n, x.complex_rho);
    std::vector<int> frozen_per_pixel(static_cast<std::size_t>(n) * n, 0);

    parallel_chunks(out.h.t1.count(), [&](std::size_t begin, std::size_t end) {
        Eigen::MatrixXd gram(channels, channels);
        Eigen::VectorXd rhs(channels);
        std::vector<Complex> cols(channels);
        for (std::size_t pix = begin; pix < end; ++pix) {
            gram.setZero();
            rhs.setZero();
            for (std::size_t ell = 0; ell < l; ++ell) {
                const std::size_t at = pix * l + ell;
                int c = 0;
                cols[c++] = cache.m[at];
                if (x.complex_rho) cols[c++] = Complex(0.0, 1.0) * cache.m[at];
                cols[c++] = cache.rho[pix] * cache.d1[at];
                cols[c++] = cache.rho[pix] * cache.d2[at];
                const Complex wv = w[ell][pix];
                for (int u = 0; u < channels; ++u) {
                    for (int v = u; v < channels; ++v) {
                        gram(u, v) += (std::conj(cols[u]) * cols[v]).real();
                    }
                    rhs(u) += (std::conj(cols[u]) * wv).real();
                }
            }
            for (int u = 0; u < channels; ++u) {
                for (int v = 0; v < u; ++v) gram(u, v) = gram(v, u);
                gram(u, u) += lambda;
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
            if (!lu.isInvertible()) {
                frozen_per_pixel[pix] = 1;
                continue;
            }
            const Eigen::VectorXd h = lu.solve(rhs);
            int c = 0;
            out.h.rho_re[pix] = h(c++);
            if (x.complex_rho) out.h.rho_im[pix] = h(c++);
            out.h.t1[pix] = h(c++);
            out.h.t2[pix] = h(c++);
        }
    });

    if (frozen_count) {
        for (int f : frozen_per_pixel) *frozen_count += f;
    }
    out.cg_iterations = 0;
    out.converged = true;
    return out;
}

}  // namespace

LmStepResult lm_step(const ParameterMap& x, const KSpaceData& data, double lambda,
                     const BlochCache& cache, const CgConfig& cg) {
    if (lambda < 0.0) throw std::invalid_argument("lm_step: lambda must be nonnegative");
    const KSpaceData q = forward_q_cached(cache, data.mask);
    const std::vector<ComplexGrid> r = data_minus_forward(data, q);

    // CG on (A^T A + lambda I) h = A^T r.
    UpdateField rhs = jacobian_adjoint_apply(x, r, cache, data.mask);
    const double rhs_norm = std::sqrt(rhs.squared_norm());

    LmStepResult out;
    out.h = UpdateField(x.n, x.complex_rho);
    if (rhs_norm == 0.0) return out;

    UpdateField resid = rhs;
    UpdateField p = resid;
    double rs = resid.squared_norm();
    const double stop = cg.tol * rhs_norm;

    int it = 0;
    for (; it < cg.max_iters; ++it) {
        const std::vector<ComplexGrid> ap = jacobian_apply(x, p, cache, data.mask);
        UpdateField w = jacobian_adjoint_apply(x, ap, cache, data.mask);
        w.axpy(lambda, p);
        const double pw = p.dot(w);
        if (!(pw > 0.0)) break;  // numerically semi-definite direction
        const double alpha = rs / pw;
        out.h.axpy(alpha, p);
        resid.axpy(-alpha, w);
        const double rs_new = resid.squared_norm();
        if (std::sqrt(rs_new) <= stop) {
            rs = rs_new;
            ++it;
            break;
        }
        const double beta = rs_new / rs;
        rs = rs_new;
        p.scale(beta);
        p.axpy(1.0, resid);
    }
    out.cg_iterations = it;
    out.converged = std::sqrt(rs) <= stop;
    return out;
}

namespace {

std::pair<ParameterMap, SolveReport> solve_internal(const ParameterMap& x0, const KSpaceData& data,
                                                    const PulseSequence& seq, const SolverConfig& cfg,
                                                    bool allow_fast_path) {
    seq.validate();
    if (data.frame_count() != seq.length()) {
        throw std::invalid_argument("solve: data frame count does not match sequence length");
    }
    if (data.size() != x0.n) throw std::invalid_argument("solve: map/data size mismatch");

    const auto t_start = std::chrono::steady_clock::now();
    const double lambda0 = cfg.lambda0.value_or(default_lambda0(data));
    const bool fast_path =
        allow_fast_path && !cfg.force_matrix_free && data.mask.kind() == MaskKind::full;

    SolveReport report;
    ParameterMap x = cfg.project ? project_box(x0, cfg.box) : x0;
    const double data_norm = data.norm();
    const double residual_floor = 1e-14 * data_norm;

    BlochCache cache = build_cache(x, seq);
    double res = frames_norm(data_minus_forward(data, forward_q_cached(cache, data.mask)));
    report.residuals.push_back(res);

    for (int n = 0; n < cfg.max_iters; ++n) {
        if (cfg.discrepancy && res <= cfg.discrepancy->varrho * cfg.discrepancy->delta) {
            report.termination = "discrepancy";
            break;
        }
        if (res <= residual_floor) {
            report.termination = "residual_floor";
            break;
        }

        const double mu_n = cfg.epsilon * res;
        const double lambda_n = std::max(lambda0 * std::pow(cfg.beta, n), mu_n);
        report.lambdas.push_back(lambda_n);

        LmStepResult step;
        if (fast_path) {
            const KSpaceData q = forward_q_cached(cache, data.mask);
            const std::vector<ComplexGrid> r = data_minus_forward(data, q);
            step = fast_path_step(x, r, lambda_n, cache, &report.frozen_pixels);
        } else {
            step = lm_step(x, data, lambda_n, cache, cfg.cg);
            if (!step.converged) report.cg_converged = false;
        }
        report.cg_iterations.push_back(step.cg_iterations);

        ParameterMap x_next = apply_update(x, step.h);
        if (cfg.project) x_next = project_box(x_next, cfg.box);

        const ChannelSteps steps = step_norms(x_next, x);
        report.step_t1.push_back(steps.t1);
        report.step_t2.push_back(steps.t2);
        report.step_rho.push_back(steps.rho);
        report.iterations = n + 1;

        x = std::move(x_next);
        cache = build_cache(x, seq);
        res = frames_norm(data_minus_forward(data, forward_q_cached(cache, data.mask)));
        report.residuals.push_back(res);

        if (steps.t1 == 0.0 && steps.t2 == 0.0 && steps.rho == 0.0) {
            report.termination = "stalled";
            break;
        }
    }
    if (report.termination.empty()) report.termination = "max_iters";
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(x), std::move(report)};
}

}  // namespace

std::pair<ParameterMap, SolveReport> solve_lm(const ParameterMap& x0, const KSpaceData& data,
                                              const PulseSequence& seq, const SolverConfig& cfg) {
    return solve_internal(x0, data, seq, cfg, /*allow_fast_path=*/false);
}

std::pair<ParameterMap, SolveReport> solve_gauss_newton(const ParameterMap& x0,
                                                        const KSpaceData& data,
                                                        const PulseSequence& seq, SolverConfig cfg) {
    cfg.lambda0 = 0.0;
    cfg.beta = 0.0;
    cfg.epsilon = 0.0;
    return solve_internal(x0, data, seq, cfg, /*allow_fast_path=*/true);
}

}  // namespace qmri
