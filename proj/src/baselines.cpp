#include "qmri/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "qmri/parallel.hpp"

namespace qmri {

namespace {

void check_dims(const KSpaceData& data, const Dictionary& dict) {
    if (data.frames.empty()) throw std::invalid_argument("reconstruct: no data frames");
    if (dict.frame_count() != data.frame_count()) {
        throw std::invalid_argument("reconstruct: dictionary / data frame count mismatch");
    }
}

ParameterMap map_from_matches(const std::vector<MatchResult>& matches, int n, bool complex_rho) {
    ParameterMap map(n, complex_rho);
    for (std::size_t pix = 0; pix < matches.size(); ++pix) {
        const MatchResult& r = matches[pix];
        if (!r.atom_index) continue;
        map.t1[pix] = r.theta.t1;
        map.t2[pix] = r.theta.t2;
        map.rho[pix] = complex_rho ? r.rho : Complex(r.rho_mag, 0.0);
    }
    map.recompute_omega();
    return map;
}

/// Pixel-major magnetization X -> per-frame image grid.
ComplexGrid frame_of(const std::vector<Complex>& x, std::size_t l, std::size_t ell, int n) {
    ComplexGrid g(n);
    for (std::size_t pix = 0; pix < g.count(); ++pix) g[pix] = x[pix * l + ell];
    return g;
}

double data_residual(const std::vector<Complex>& x, const KSpaceData& data) {
    const std::size_t l = data.frame_count();
    const int n = data.size();
    std::vector<double> partial(l, 0.0);
    parallel_chunks(l, [&](std::size_t begin, std::size_t end) {
        for (std::size_t ell = begin; ell < end; ++ell) {
            ComplexGrid spec = dft2(frame_of(x, l, ell, n));
            data.mask.apply(spec, static_cast<int>(ell));
            double s = 0.0;
            for (std::size_t i = 0; i < spec.count(); ++i) s += std::norm(spec[i] - data.frames[ell][i]);
            partial[ell] = s;
        }
    });
    double total = 0.0;
    for (double s : partial) total += s;
    return std::sqrt(total);
}

}  // namespace

ParameterMap mrf_reconstruct(const KSpaceData& data, const Dictionary& dict, bool complex_rho) {
    check_dims(data, dict);
    const std::size_t l = data.frame_count();
    const int n = data.size();
    const std::size_t npix = static_cast<std::size_t>(n) * n;

    // Step 1: X^(l) = F^{-1} (P^(l))^T D^(l); the data frames are already
    // zero outside the mask, so the zero-fill is the identity here.
    std::vector<Complex> x(npix * l);
    parallel_chunks(l, [&](std::size_t begin, std::size_t end) {
        for (std::size_t ell = begin; ell < end; ++ell) {
            const ComplexGrid img = idft2(data.frames[ell]);
            for (std::size_t pix = 0; pix < img.count(); ++pix) x[pix * l + ell] = img[pix];
        }
    });

    return map_from_matches(dict.match_many(x, npix, complex_rho), n, complex_rho);
}

BlipResult blip_reconstruct(const KSpaceData& data, const Dictionary& dict, const BlipConfig& cfg) {
    check_dims(data, dict);
    if (cfg.iterations < 1) throw std::invalid_argument("blip: iterations must be >= 1");

    const std::size_t l = data.frame_count();
    const int n = data.size();
    const std::size_t npix = static_cast<std::size_t>(n) * n;

    // Default step size: the sub-sampling factor s (1 for full sampling),
    // generalized to 1/fraction-sampled for radial patterns.
    double mu = cfg.mu.value_or(0.0);
    if (!cfg.mu) {
        std::size_t sampled = 0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) sampled += data.mask.sampled(0, i, j) ? 1 : 0;
        }
        mu = sampled > 0 ? static_cast<double>(npix) / static_cast<double>(sampled) : 1.0;
    }

    std::vector<Complex> x(npix * l, Complex(0.0, 0.0));
    std::vector<MatchResult> matches;
    BlipResult result;
    result.residuals.reserve(cfg.iterations);
    double prev_residual = data.norm();

    // One gradient step plus dictionary projection at step size step_mu,
    // leaving x untouched; returns the post-projection data residual.
    const auto projected_step = [&](double step_mu, std::vector<Complex>& x_next,
                                    std::vector<MatchResult>& next_matches) {
        x_next = x;
        parallel_chunks(l, [&](std::size_t begin, std::size_t end) {
            for (std::size_t ell = begin; ell < end; ++ell) {
                ComplexGrid spec = dft2(frame_of(x_next, l, ell, n));
                data.mask.apply(spec, static_cast<int>(ell));
                for (std::size_t i = 0; i < spec.count(); ++i) spec[i] -= data.frames[ell][i];
                const ComplexGrid grad = idft2(spec);
                for (std::size_t pix = 0; pix < grad.count(); ++pix) {
                    x_next[pix * l + ell] -= step_mu * grad[pix];
                }
            }
        });
        next_matches = dict.match_many(x_next, npix, cfg.complex_rho);
        parallel_chunks(npix, [&](std::size_t begin, std::size_t end) {
            for (std::size_t pix = begin; pix < end; ++pix) {
                const MatchResult& r = next_matches[pix];
                if (!r.atom_index) {
                    for (std::size_t ell = 0; ell < l; ++ell) {
                        x_next[pix * l + ell] = Complex(0.0, 0.0);
                    }
                    continue;
                }
                const std::size_t j = *r.atom_index;
                const Complex density = cfg.complex_rho ? r.rho : Complex(r.rho_mag, 0.0);
                for (std::size_t ell = 0; ell < l; ++ell) {
                    x_next[pix * l + ell] = density * dict.norm(j) * dict.fingerprint(j, ell);
                }
            }
        });
        return data_residual(x_next, data);
    };

    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<Complex> x_next;
        std::vector<MatchResult> next_matches;
        double res = projected_step(mu, x_next, next_matches);

        if (cfg.step_rule == BlipStepRule::halving) {
            // Backtrack: retry the same iteration with half the step until the
            // residual stops increasing.
            for (int tries = 0; res > prev_residual && tries < 20; ++tries) {
                mu *= 0.5;
                res = projected_step(mu, x_next, next_matches);
            }
        }

        x = std::move(x_next);
        matches = std::move(next_matches);
        result.residuals.push_back(res);
        prev_residual = res;
    }

    result.map = map_from_matches(matches, n, cfg.complex_rho);
    for (std::size_t ell = 0; ell < l; ++ell) result.magnetization.push_back(frame_of(x, l, ell, n));
    return result;
}

}  // namespace qmri
