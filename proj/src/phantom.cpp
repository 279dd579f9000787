#include "qmri/phantom.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "qmri/parallel.hpp"
#include "qmri/rng.hpp"

namespace qmri {

void PhantomSpec::validate() const {
    if (n < 2) throw std::invalid_argument("PhantomSpec: grid too small");
    if (regions.empty()) throw std::invalid_argument("PhantomSpec: needs at least one region");
    for (const TissueRegion& r : regions) {
        const bool t_ok = r.t1 >= ranges.t1_lo && r.t1 <= ranges.t1_hi && r.t2 >= ranges.t2_lo &&
                          r.t2 <= ranges.t2_hi;
        // Real and imaginary density channels are range-checked separately;
        // imag is only present in complex-rho phantoms.
        const double re = r.rho.real(), im = r.rho.imag();
        const bool re_ok = re >= ranges.rho_lo && re <= ranges.rho_hi;
        const bool im_ok = im == 0.0 || (im >= ranges.rho_lo && im <= ranges.rho_hi);
        if (!t_ok || !re_ok || !im_ok) {
            throw std::domain_error("PhantomSpec: region values outside the configured ranges");
        }
        if (!(r.rx > 0.0 && r.ry > 0.0)) throw std::domain_error("PhantomSpec: degenerate ellipse");
    }
}

ParameterMap make_phantom(const PhantomSpec& spec) {
    spec.validate();
    ParameterMap map(spec.n, spec.complex_rho);
    const double scale = 2.0 / spec.n;
    for (int i = 0; i < spec.n; ++i) {
        const double y = (i + 0.5) * scale - 1.0;
        for (int j = 0; j < spec.n; ++j) {
            const double x = (j + 0.5) * scale - 1.0;
            for (const TissueRegion& r : spec.regions) {
                const double dx = x - r.cx, dy = y - r.cy;
                const double c = std::cos(r.angle), s = std::sin(r.angle);
                const double u = (dx * c + dy * s) / r.rx;
                const double v = (-dx * s + dy * c) / r.ry;
                if (u * u + v * v <= 1.0) {
                    map.t1(i, j) = r.t1;
                    map.t2(i, j) = r.t2;
                    map.rho(i, j) = r.rho;
                }
            }
        }
    }
    map.recompute_omega();
    return map;
}

PhantomSpec default_phantom_spec(int n) {
    PhantomSpec spec;
    spec.n = n;
    spec.regions = {
        {0.0, 0.0, 0.82, 0.90, 0.0, 830.0, 70.0, Complex(92.0, 0.0)},
        {0.0, -0.08, 0.62, 0.72, 0.0, 1400.0, 110.0, Complex(86.0, 0.0)},
        {-0.24, -0.05, 0.18, 0.38, 0.25, 4200.0, 480.0, Complex(98.0, 0.0)},
        {0.24, -0.05, 0.18, 0.38, -0.25, 4200.0, 480.0, Complex(98.0, 0.0)},
        {0.0, 0.42, 0.22, 0.16, 0.0, 2600.0, 210.0, Complex(100.0, 0.0)},
        {0.0, -0.52, 0.16, 0.12, 0.0, 600.0, 45.0, Complex(83.0, 0.0)},
    };
    return spec;
}

PhantomSpec on_grid_phantom_spec(int n) {
    // T1 values are multiples of 15 ms, T2 values multiples of 1.5 ms, so the
    // parameters sit exactly on the fine dictionary grid.
    PhantomSpec spec;
    spec.n = n;
    spec.regions = {
        {0.0, 0.0, 0.82, 0.90, 0.0, 840.0, 69.0, Complex(92.0, 0.0)},
        {0.0, -0.08, 0.62, 0.72, 0.0, 1410.0, 111.0, Complex(86.0, 0.0)},
        {-0.24, -0.05, 0.18, 0.38, 0.25, 4200.0, 480.0, Complex(98.0, 0.0)},
        {0.24, -0.05, 0.18, 0.38, -0.25, 4200.0, 480.0, Complex(98.0, 0.0)},
        {0.0, 0.42, 0.22, 0.16, 0.0, 2595.0, 210.0, Complex(100.0, 0.0)},
        {0.0, -0.52, 0.16, 0.12, 0.0, 600.0, 45.0, Complex(83.0, 0.0)},
    };
    return spec;
}

PhantomSpec complex_phantom_spec(int n) {
    PhantomSpec spec = default_phantom_spec(n);
    spec.complex_rho = true;
    for (TissueRegion& r : spec.regions) {
        const double re = r.rho.real();
        r.rho = Complex(re, 180.0 - re);
    }
    return spec;
}

ParameterMap shrink_average(const ParameterMap& map) {
    if (map.n % 2 != 0) throw std::invalid_argument("shrink_average: N must be even");
    const int half = map.n / 2;
    ParameterMap out(half, map.complex_rho);

    const auto mean_nonzero_real = [](const RealGrid& g, int i, int j) {
        double sum = 0.0;
        int count = 0;
        for (int di = 0; di < 2; ++di) {
            for (int dj = 0; dj < 2; ++dj) {
                const double v = g(2 * i + di, 2 * j + dj);
                if (v != 0.0) {
                    sum += v;
                    ++count;
                }
            }
        }
        return count > 0 ? sum / count : 0.0;
    };
    const auto mean_nonzero_complex = [](const ComplexGrid& g, int i, int j) {
        Complex sum(0.0, 0.0);
        int count = 0;
        for (int di = 0; di < 2; ++di) {
            for (int dj = 0; dj < 2; ++dj) {
                const Complex v = g(2 * i + di, 2 * j + dj);
                if (v != Complex(0.0, 0.0)) {
                    sum += v;
                    ++count;
                }
            }
        }
        return count > 0 ? sum / static_cast<double>(count) : Complex(0.0, 0.0);
    };

    for (int i = 0; i < half; ++i) {
        for (int j = 0; j < half; ++j) {
            out.t1(i, j) = mean_nonzero_real(map.t1, i, j);
            out.t2(i, j) = mean_nonzero_real(map.t2, i, j);
            out.rho(i, j) = mean_nonzero_complex(map.rho, i, j);
        }
    }
    out.recompute_omega();
    return out;
}

SynthesisResult synthesize_data(const ParameterMap& map, const PulseSequence& seq,
                                const SamplingMask& mask, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw std::domain_error("synthesize_data: sigma must be nonnegative");
    if (mask.size() != map.n) throw std::invalid_argument("synthesize_data: map/mask size mismatch");

    const BlochCache cache = build_cache(map, seq, /*with_derivs=*/false);
    const std::size_t l = seq.length();
    const std::size_t npix = map.t1.count();

    SynthesisResult out;
    out.clean_magnetization.assign(l, ComplexGrid(map.n));
    out.kspace.frames.assign(l, ComplexGrid(map.n));
    out.kspace.mask = mask;
    out.kspace.sigma = sigma;
    out.kspace.seed = seed;

    double clean_power = 0.0, noise_power = 0.0;
    for (std::size_t ell = 0; ell < l; ++ell) {
        ComplexGrid clean(map.n);
        for (std::size_t pix = 0; pix < npix; ++pix) {
            clean[pix] = map.rho[pix] * cache.m[pix * l + ell];
        }
        out.clean_magnetization[ell] = clean;

        ComplexGrid noisy = clean;
        if (sigma > 0.0) {
            RandomStream stream = RandomStream::substream(seed, ell);
            for (std::size_t pix = 0; pix < npix; ++pix) {
                if (!map.omega[pix]) continue;  // noise on the effective domain only
                noisy[pix] += Complex(sigma * stream.next_normal(), sigma * stream.next_normal());
            }
        }

        ComplexGrid spec = dft2(noisy);
        mask.apply(spec, static_cast<int>(ell));
        if (sigma > 0.0) {
            ComplexGrid clean_spec = dft2(clean);
            mask.apply(clean_spec, static_cast<int>(ell));
            for (std::size_t i = 0; i < spec.count(); ++i) {
                clean_power += std::norm(clean_spec[i]);
                noise_power += std::norm(spec[i] - clean_spec[i]);
            }
        }
        out.kspace.frames[ell] = std::move(spec);
    }

    if (sigma > 0.0) {
        out.snr = noise_power > 0.0 ? clean_power / noise_power : 0.0;
    } else {
        out.snr = std::numeric_limits<double>::infinity();
    }
    return out;
}

double calibrate_sigma(const ParameterMap& map, const PulseSequence& seq, const SamplingMask& mask,
                       double target_snr, std::uint64_t seed) {
    if (!(target_snr > 0.0)) throw std::domain_error("calibrate_sigma: target must be positive");
    const SynthesisResult probe = synthesize_data(map, seq, mask, 1.0, seed);
    if (!(probe.snr > 0.0)) throw std::domain_error("calibrate_sigma: instance has no signal");
    return std::sqrt(probe.snr / target_snr);
}

}  // namespace qmri
