#include "qmri/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qmri/parallel.hpp"
#include "qmri/rng.hpp"

namespace qmri {

// ---------------------------------------------------------------------------
// Masks

std::vector<int> cartesian_mask_rows(int n, int s, int ell) {
    if (s < 1 || n < 1 || n % s != 0) {
        throw std::invalid_argument("cartesian_mask_rows: s must divide N");
    }
    if (ell < 1) throw std::invalid_argument("cartesian_mask_rows: frame index is 1-based");
    const int xi = ell % s;
    std::vector<int> rows;
    rows.reserve(n / s);
    for (int i = 1; i <= n; ++i) {
        if (i % s == xi) rows.push_back(i);
    }
    return rows;
}

BoolGrid radial_mask_grid(int n, int p, int s, int ell) {
    if (p < s || s < 1) throw std::invalid_argument("radial_mask_grid: need p >= s >= 1");
    if (ell < 1) throw std::invalid_argument("radial_mask_grid: frame index is 1-based");
    const double pi = 3.14159265358979323846;
    BoolGrid grid(n, 0);
    const double c = n / 2;  // DC position in centered layout
    for (int k = 0; k < s; ++k) {
        const double idx = std::fmod(static_cast<double>(k) * p / s + (ell - 1), static_cast<double>(p));
        const double phi = idx * pi / p;
        const double dx = std::cos(phi), dy = std::sin(phi);
        // One-pixel-wide digital line through the center, both half-lines:
        // step along the dominant axis and round the other coordinate.
        if (std::abs(dx) >= std::abs(dy)) {
            for (int x = 0; x < n; ++x) {
                const double t = (x - c) / dx;
                const int y = static_cast<int>(std::lround(c + t * dy));
                if (y >= 0 && y < n) grid(y, x) = 1;
            }
        } else {
            for (int y = 0; y < n; ++y) {
                const double t = (y - c) / dy;
                const int x = static_cast<int>(std::lround(c + t * dx));
                if (x >= 0 && x < n) grid(y, x) = 1;
            }
        }
    }
    return grid;
}

SamplingMask SamplingMask::full(int n, int frames) {
    SamplingMask m;
    m.kind_ = MaskKind::full;
    m.n_ = n;
    m.frames_ = frames;
    return m;
}

SamplingMask SamplingMask::cartesian(int n, int frames, int s) {
    if (s < 1 || n % s != 0) throw std::invalid_argument("SamplingMask: s must divide N");
    SamplingMask m;
    m.kind_ = MaskKind::cartesian;
    m.n_ = n;
    m.frames_ = frames;
    m.s_ = s;
    return m;
}

SamplingMask SamplingMask::radial(int n, int frames, int p, int s) {
    if (p < s || s < 1) throw std::invalid_argument("SamplingMask: need p >= s >= 1");
    SamplingMask m;
    m.kind_ = MaskKind::radial;
    m.n_ = n;
    m.frames_ = frames;
    m.s_ = s;
    m.p_ = p;
    m.build_radial();
    return m;
}

void SamplingMask::build_radial() {
    radial_period_ = (p_ % s_ == 0) ? p_ / s_ : p_;
    radial_frames_.clear();
    radial_frames_.reserve(radial_period_);
    const int half = n_ / 2;
    for (int ell = 1; ell <= radial_period_; ++ell) {
        const BoolGrid centered = radial_mask_grid(n_, p_, s_, ell);
        BoolGrid unshifted(n_, 0);
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) {
                unshifted(i, j) = centered((i + half) % n_, (j + half) % n_);
            }
        }
        radial_frames_.push_back(std::move(unshifted));
    }
}

bool SamplingMask::sampled(int ell, int row, int col) const {
    switch (kind_) {
        case MaskKind::full:
            return true;
        case MaskKind::cartesian:
            return (row + 1) % s_ == (ell + 1) % s_;
        case MaskKind::radial:
            return radial_frames_[ell % radial_period_](row, col) != 0;
    }
    return true;
}

void SamplingMask::apply(ComplexGrid& frame, int ell) const {
    if (frame.size() != n_) throw std::invalid_argument("SamplingMask: frame size mismatch");
    if (kind_ == MaskKind::full) return;
    if (kind_ == MaskKind::cartesian) {
        const int xi = (ell + 1) % s_;
        for (int i = 0; i < n_; ++i) {
            if ((i + 1) % s_ == xi) continue;
            Complex* row = frame.data() + static_cast<std::size_t>(i) * n_;
            std::fill(row, row + n_, Complex(0.0, 0.0));
        }
        return;
    }
    const BoolGrid& grid = radial_frames_[ell % radial_period_];
    for (std::size_t i = 0; i < frame.count(); ++i) {
        if (!grid[i]) frame[i] = Complex(0.0, 0.0);
    }
}

BoolGrid SamplingMask::frame_grid(int ell) const {
    BoolGrid g(n_, 0);
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) g(i, j) = sampled(ell, i, j) ? 1 : 0;
    }
    return g;
}

BoolGrid SamplingMask::frame_grid_centered(int ell) const {
    const BoolGrid g = frame_grid(ell);
    BoolGrid centered(n_, 0);
    const int half = n_ / 2;
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) centered(i, j) = g((i + half) % n_, (j + half) % n_);
    }
    return centered;
}

double SamplingMask::coverage_fraction_union() const {
    int period = 1;
    if (kind_ == MaskKind::cartesian) period = s_;
    if (kind_ == MaskKind::radial) period = radial_period_;
    BoolGrid covered(n_, 0);
    for (int ell = 0; ell < period; ++ell) {
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) {
                if (sampled(ell, i, j)) covered(i, j) = 1;
            }
        }
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < covered.count(); ++i) hits += covered[i];
    return static_cast<double>(hits) / static_cast<double>(covered.count());
}

std::string SamplingMask::descriptor() const {
    std::ostringstream os;
    switch (kind_) {
        case MaskKind::full:
            os << "full";
            break;
        case MaskKind::cartesian:
            os << "cartesian s=" << s_;
            break;
        case MaskKind::radial:
            os << "radial p=" << p_ << " s=" << s_;
            break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Feasible box and parameter maps

void FeasibleBox::validate() const {
    if (!(t1_lo < t1_hi && t2_lo < t2_hi && rho_re_lo < rho_re_hi && rho_im_lo < rho_im_hi)) {
        throw std::invalid_argument("FeasibleBox: lower bound must be below upper bound");
    }
}

void ParameterMap::recompute_omega() {
    for (std::size_t i = 0; i < rho.count(); ++i) omega[i] = std::abs(rho[i]) > 0.0 ? 1 : 0;
}

std::uint64_t ParameterMap::theta_fingerprint() const {
    std::uint64_t h = fnv1a(&n, sizeof(n));
    h = fnv1a(t1.data(), t1.count() * sizeof(double), h);
    h = fnv1a(t2.data(), t2.count() * sizeof(double), h);
    return h;
}

ParameterMap project_box(const ParameterMap& x, const FeasibleBox& box) {
    box.validate();
    ParameterMap out = x;
    for (std::size_t i = 0; i < out.t1.count(); ++i) {
        out.t1[i] = std::clamp(out.t1[i], box.t1_lo, box.t1_hi);
        out.t2[i] = std::clamp(out.t2[i], box.t2_lo, box.t2_hi);
        const double re = std::clamp(out.rho[i].real(), box.rho_re_lo, box.rho_re_hi);
        const double im = out.complex_rho ? std::clamp(out.rho[i].imag(), box.rho_im_lo, box.rho_im_hi)
                                          : 0.0;
        out.rho[i] = Complex(re, im);
    }
    out.recompute_omega();
    return out;
}

double KSpaceData::norm() const {
    double s = 0.0;
    for (const auto& f : frames) s += squared_norm(f);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Cache, forward operator, Jacobian

BlochCache build_cache(const ParameterMap& x, const PulseSequence& seq, bool with_derivs) {
    const std::size_t l = seq.length();
    const std::size_t npix = x.t1.count();
    BlochCache cache;
    cache.n = x.n;
    cache.frames = l;
    cache.m.assign(npix * l, Complex(0.0, 0.0));
    if (with_derivs) {
        cache.d1.assign(npix * l, Complex(0.0, 0.0));
        cache.d2.assign(npix * l, Complex(0.0, 0.0));
    }
    cache.rho.assign(npix, Complex(0.0, 0.0));
    cache.theta_fingerprint = x.theta_fingerprint();
    cache.seq_fingerprint = seq.fingerprint();

    parallel_chunks(npix, [&](std::size_t begin, std::size_t end) {
        for (std::size_t pix = begin; pix < end; ++pix) {
            cache.rho[pix] = x.rho[pix];
            const double t1 = x.t1[pix], t2 = x.t2[pix];
            if (!(t1 > 0.0 && t2 > 0.0)) continue;  // background stays zero
            const MagnetizationFrames traj = simulate_sequence({t1, t2}, seq, with_derivs);
            for (std::size_t ell = 0; ell < l; ++ell) {
                const std::size_t at = pix * l + ell;
                cache.m[at] = Complex(traj.frames[ell].x(), traj.frames[ell].y());
                if (with_derivs) {
                    cache.d1[at] = Complex(traj.d_t1[ell].x(), traj.d_t1[ell].y());
                    cache.d2[at] = Complex(traj.d_t2[ell].x(), traj.d_t2[ell].y());
                }
            }
        }
    });
    return cache;
}

KSpaceData forward_q_cached(const BlochCache& cache, const SamplingMask& mask) {
    if (mask.size() != cache.n) throw std::invalid_argument("forward_q: map/mask size mismatch");
    const std::size_t l = cache.frames;
    KSpaceData data;
    data.mask = mask;
    data.frames.assign(l, ComplexGrid(cache.n));
    parallel_chunks(l, [&](std::size_t begin, std::size_t end) {
        for (std::size_t ell = begin; ell < end; ++ell) {
            ComplexGrid img(cache.n);
            for (std::size_t pix = 0; pix < img.count(); ++pix) {
                img[pix] = cache.rho[pix] * cache.m[pix * l + ell];
            }
            ComplexGrid spec = dft2(img);
            mask.apply(spec, static_cast<int>(ell));
            data.frames[ell] = std::move(spec);
        }
    });
    return data;
}

KSpaceData forward_q(const ParameterMap& x, const PulseSequence& seq, const SamplingMask& mask) {
    if (mask.size() != x.n) throw std::invalid_argument("forward_q: map/mask size mismatch");
    return forward_q_cached(build_cache(x, seq, /*with_derivs=*/false), mask);
}

double UpdateField::dot(const UpdateField& other) const {
    double s = 0.0;
    for (std::size_t i = 0; i < t1.count(); ++i) {
        s += rho_re[i] * other.rho_re[i] + rho_im[i] * other.rho_im[i] + t1[i] * other.t1[i] +
             t2[i] * other.t2[i];
    }
    return s;
}

void UpdateField::axpy(double a, const UpdateField& other) {
    for (std::size_t i = 0; i < t1.count(); ++i) {
        rho_re[i] += a * other.rho_re[i];
        rho_im[i] += a * other.rho_im[i];
        t1[i] += a * other.t1[i];
        t2[i] += a * other.t2[i];
    }
}

void UpdateField::scale(double a) {
    for (std::size_t i = 0; i < t1.count(); ++i) {
        rho_re[i] *= a;
        rho_im[i] *= a;
        t1[i] *= a;
        t2[i] *= a;
    }
}

namespace {

void check_cache(const ParameterMap& x, const BlochCache& cache) {
    if (cache.n != x.n) throw std::invalid_argument("jacobian: cache/map size mismatch");
    if (cache.theta_fingerprint != x.theta_fingerprint()) {
        throw std::invalid_argument("jacobian: cache was built at a different point");
    }
}

}  // namespace

std::vector<ComplexGrid> jacobian_apply(const ParameterMap& x, const UpdateField& h,
                                        const BlochCache& cache, const SamplingMask& mask) {
    check_cache(x, cache);
    if (cache.d1.empty()) throw std::invalid_argument("jacobian_apply: cache lacks derivatives");
    const std::size_t l = cache.frames;
    std::vector<ComplexGrid> out(l, ComplexGrid(cache.n));
    parallel_chunks(l, [&](std::size_t begin, std::size_t end) {
        for (std::size_t ell = begin; ell < end; ++ell) {
            ComplexGrid img(cache.n);
            for (std::size_t pix = 0; pix < img.count(); ++pix) {
                const std::size_t at = pix * l + ell;
                const Complex h_rho(h.rho_re[pix], h.complex_rho ? h.rho_im[pix] : 0.0);
                img[pix] = h_rho * cache.m[at] +
                           cache.rho[pix] * (h.t1[pix] * cache.d1[at] + h.t2[pix] * cache.d2[at]);
            }
            ComplexGrid spec = dft2(img);
            mask.apply(spec, static_cast<int>(ell));
            out[ell] = std::move(spec);
        }
    });
    return out;
}

UpdateField jacobian_adjoint_apply(const ParameterMap& x, const std::vector<ComplexGrid>& residual,
                                   const BlochCache& cache, const SamplingMask& mask) {
    check_cache(x, cache);
    if (cache.d1.empty()) throw std::invalid_argument("jacobian_adjoint_apply: cache lacks derivatives");
    const std::size_t l = cache.frames;
    if (residual.size() != l) throw std::invalid_argument("jacobian_adjoint_apply: frame count mismatch");

    // Fixed chunking with partial sums merged in chunk order keeps the
    // reduction bit-identical for any worker count.
    const std::size_t chunk_count = std::min<std::size_t>(16, l);
    std::vector<UpdateField> partials(std::max<std::size_t>(chunk_count, 1),
                                      UpdateField(cache.n, x.complex_rho));
    const std::size_t step = (l + chunk_count - 1) / chunk_count;

    parallel_chunks(chunk_count, [&](std::size_t cb, std::size_t ce) {
        for (std::size_t c = cb; c < ce; ++c) {
            UpdateField& g = partials[c];
            const std::size_t lo = c * step;
            const std::size_t hi = std::min(l, lo + step);
            for (std::size_t ell = lo; ell < hi; ++ell) {
                ComplexGrid masked = residual[ell];
                mask.apply(masked, static_cast<int>(ell));
                const ComplexGrid w = idft2(masked);
                for (std::size_t pix = 0; pix < w.count(); ++pix) {
                    const std::size_t at = pix * l + ell;
                    const Complex mw = std::conj(cache.m[at]) * w[pix];
                    g.rho_re[pix] += mw.real();
                    if (x.complex_rho) g.rho_im[pix] += mw.imag();
                    g.t1[pix] += (std::conj(cache.rho[pix] * cache.d1[at]) * w[pix]).real();
                    g.t2[pix] += (std::conj(cache.rho[pix] * cache.d2[at]) * w[pix]).real();
                }
            }
        }
    });

    UpdateField g = std::move(partials.front());
    for (std::size_t c = 1; c < partials.size(); ++c) g.axpy(1.0, partials[c]);
    return g;
}

}  // namespace qmri
