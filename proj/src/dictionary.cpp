#include "qmri/dictionary.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "qmri/parallel.hpp"

namespace qmri {

std::vector<double> arange_grid(double start, double stop, double step) {
    if (!(step > 0.0) || !(stop >= start)) throw std::invalid_argument("arange_grid: bad range");
    std::vector<double> out;
    const double tol = step * 1e-9;
    for (int k = 0;; ++k) {
        const double v = start + k * step;
        if (v > stop + tol) break;
        out.push_back(v);
    }
    return out;
}

Dictionary build_dictionary(const std::vector<double>& t1_grid, const std::vector<double>& t2_grid,
                            const PulseSequence& seq) {
    if (t1_grid.empty() || t2_grid.empty()) throw std::invalid_argument("build_dictionary: empty grid");
    for (double v : t1_grid) {
        if (!(v > 0.0)) throw std::domain_error("build_dictionary: T1 grid values must be positive");
    }
    for (double v : t2_grid) {
        if (!(v > 0.0)) throw std::domain_error("build_dictionary: T2 grid values must be positive");
    }
    const std::size_t l = seq.length();
    const std::size_t j_count = t1_grid.size() * t2_grid.size();

    Dictionary dict;
    dict.frames_ = l;
    dict.theta_.resize(j_count);
    dict.fp_re_.resize(j_count * l);
    dict.fp_im_.resize(j_count * l);
    dict.norms_.resize(j_count);
    dict.t1_grid_ = t1_grid;
    dict.t2_grid_ = t2_grid;
    dict.seq_fingerprint_ = seq.fingerprint();

    parallel_chunks(j_count, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const TissueParams theta{t1_grid[j / t2_grid.size()], t2_grid[j % t2_grid.size()]};
            dict.theta_[j] = theta;
            const std::vector<Complex> traj = transverse(simulate_sequence(theta, seq));
            double norm2 = 0.0;
            for (const Complex& c : traj) norm2 += std::norm(c);
            const double nrm = std::sqrt(norm2);
            dict.norms_[j] = nrm;
            const double inv = nrm > 0.0 ? 1.0 / nrm : 0.0;
            for (std::size_t ell = 0; ell < l; ++ell) {
                dict.fp_re_[j * l + ell] = traj[ell].real() * inv;
                dict.fp_im_[j * l + ell] = traj[ell].imag() * inv;
            }
        }
    });
    return dict;
}

namespace {

struct Best {
    double score = -std::numeric_limits<double>::infinity();
    std::size_t index = 0;
    double ip_re = 0.0, ip_im = 0.0;
};

}  // namespace

std::vector<MatchResult> Dictionary::match_many(std::span<const Complex> trajectories,
                                                std::size_t npix, bool complex_mode) const {
    const std::size_t l = frames_;
    if (trajectories.size() != npix * l) throw std::invalid_argument("match_many: length mismatch");
    const std::size_t j_count = atom_count();

    std::vector<double> q_norm(npix, 0.0);
    std::vector<double> q_re(npix * l), q_im(npix * l);
    for (std::size_t p = 0; p < npix; ++p) {
        double n2 = 0.0;
        for (std::size_t ell = 0; ell < l; ++ell) {
            const Complex c = trajectories[p * l + ell];
            q_re[p * l + ell] = c.real();
            q_im[p * l + ell] = c.imag();
            n2 += std::norm(c);
        }
        q_norm[p] = std::sqrt(n2);
    }

    std::vector<Best> best(npix);
    // Blocked scan: each worker owns a block of pixels and streams the whole
    // atom matrix once, so the inner loops stay in cache.
    parallel_chunks(npix, [&](std::size_t pb, std::size_t pe) {
        constexpr std::size_t kBlock = 48;  // keeps the query block in L2 while
                                            // amortizing the atom-matrix stream
        for (std::size_t b0 = pb; b0 < pe; b0 += kBlock) {
            const std::size_t b1 = std::min(pe, b0 + kBlock);
            for (std::size_t j = 0; j < j_count; ++j) {
                const double* fr = fp_re_.data() + j * l;
                const double* fi = fp_im_.data() + j * l;
                for (std::size_t p = b0; p < b1; ++p) {
                    if (q_norm[p] == 0.0) continue;
                    const double* xr = q_re.data() + p * l;
                    const double* xi = q_im.data() + p * l;
                    // Four-way striped accumulators break the FP dependency
                    // chain; the summation order is fixed, so results stay
                    // deterministic.
                    double re0 = 0.0, re1 = 0.0, re2 = 0.0, re3 = 0.0;
                    double im0 = 0.0, im1 = 0.0, im2 = 0.0, im3 = 0.0;
                    std::size_t ell = 0;
                    if (complex_mode) {
                        // <f, x> = sum conj(f) * x
                        for (; ell + 4 <= l; ell += 4) {
                            re0 += fr[ell] * xr[ell] + fi[ell] * xi[ell];
                            im0 += fr[ell] * xi[ell] - fi[ell] * xr[ell];
                            re1 += fr[ell + 1] * xr[ell + 1] + fi[ell + 1] * xi[ell + 1];
                            im1 += fr[ell + 1] * xi[ell + 1] - fi[ell + 1] * xr[ell + 1];
                            re2 += fr[ell + 2] * xr[ell + 2] + fi[ell + 2] * xi[ell + 2];
                            im2 += fr[ell + 2] * xi[ell + 2] - fi[ell + 2] * xr[ell + 2];
                            re3 += fr[ell + 3] * xr[ell + 3] + fi[ell + 3] * xi[ell + 3];
                            im3 += fr[ell + 3] * xi[ell + 3] - fi[ell + 3] * xr[ell + 3];
                        }
                        for (; ell < l; ++ell) {
                            re0 += fr[ell] * xr[ell] + fi[ell] * xi[ell];
                            im0 += fr[ell] * xi[ell] - fi[ell] * xr[ell];
                        }
                    } else {
                        for (; ell + 4 <= l; ell += 4) {
                            re0 += fr[ell] * xr[ell] + fi[ell] * xi[ell];
                            re1 += fr[ell + 1] * xr[ell + 1] + fi[ell + 1] * xi[ell + 1];
                            re2 += fr[ell + 2] * xr[ell + 2] + fi[ell + 2] * xi[ell + 2];
                            re3 += fr[ell + 3] * xr[ell + 3] + fi[ell + 3] * xi[ell + 3];
                        }
                        for (; ell < l; ++ell) {
                            re0 += fr[ell] * xr[ell] + fi[ell] * xi[ell];
                        }
                    }
                    const double re = (re0 + re1) + (re2 + re3);
                    const double im = (im0 + im1) + (im2 + im3);
                    const double score = complex_mode ? re * re + im * im : re;
                    if (score > best[p].score) {
                        best[p] = Best{score, j, re, im};
                    }
                }
            }
        }
    });

    std::vector<MatchResult> out(npix);
    for (std::size_t p = 0; p < npix; ++p) {
        if (q_norm[p] == 0.0) continue;  // background: zero theta, no atom
        MatchResult& r = out[p];
        const std::size_t j = best[p].index;
        r.theta = theta_[j];
        r.atom_index = j;
        r.rho_mag = q_norm[p] / norms_[j];
        if (complex_mode) {
            const double mag = std::hypot(best[p].ip_re, best[p].ip_im);
            r.rho = mag > 0.0 ? Complex(best[p].ip_re / mag, best[p].ip_im / mag) * r.rho_mag
                              : Complex(r.rho_mag, 0.0);
        } else {
            r.rho = Complex(r.rho_mag, 0.0);
        }
    }
    return out;
}

MatchResult Dictionary::match_pixel(std::span<const Complex> trajectory, bool complex_mode) const {
    if (trajectory.size() != frames_) throw std::invalid_argument("match_pixel: length mismatch");
    return match_many(trajectory, 1, complex_mode).front();
}

}  // namespace qmri
