#include <doctest.h>

#include <cmath>

#include "qmri/baselines.hpp"
#include "qmri/metrics.hpp"
#include "qmri/phantom.hpp"

using namespace qmri;

namespace {
constexpr double kPi = 3.14159265358979323846;

/// Phantom whose parameter values sit exactly on the test dictionary grid.
ParameterMap grid_phantom(int n) {
    PhantomSpec spec;
    spec.n = n;
    spec.regions = {
        {0.0, 0.0, 0.8, 0.8, 0.0, 900.0, 60.0, Complex(90.0, 0.0)},
        {0.1, 0.1, 0.35, 0.3, 0.0, 1800.0, 120.0, Complex(95.0, 0.0)},
    };
    return make_phantom(spec);
}

Dictionary grid_dictionary(const PulseSequence& seq) {
    return build_dictionary(arange_grid(300.0, 2700.0, 300.0), arange_grid(30.0, 270.0, 30.0), seq);
}

}  // namespace

TEST_CASE("MRF recovers an on-grid phantom exactly from fully sampled data") {
    const int n = 16;
    const ParameterMap truth = grid_phantom(n);
    const PulseSequence seq = PulseSequence::constant(8, 40.0 * kPi / 180.0, 40.0);
    const Dictionary dict = grid_dictionary(seq);
    const SynthesisResult syn = synthesize_data(truth, seq, SamplingMask::full(n, 8), 0.0, 1);

    const ParameterMap rec = mrf_reconstruct(syn.kspace, dict);
    for (std::size_t i = 0; i < truth.t1.count(); ++i) {
        if (!truth.omega[i]) {
            // FFT round-trip dust can leave ~1e-14 in background trajectories.
            CHECK(std::abs(rec.rho[i]) < 1e-10);
            continue;
        }
        CHECK(rec.t1[i] == truth.t1[i]);
        CHECK(rec.t2[i] == truth.t2[i]);
        CHECK(std::abs(rec.rho[i] - truth.rho[i]) < 1e-10);
    }
}

TEST_CASE("MRF maps all-zero data to the all-zero map") {
    const PulseSequence seq = PulseSequence::constant(4, 0.6, 40.0);
    const Dictionary dict = grid_dictionary(seq);
    KSpaceData zero;
    zero.mask = SamplingMask::full(8, 4);
    zero.frames.assign(4, ComplexGrid(8));
    const ParameterMap rec = mrf_reconstruct(zero, dict);
    CHECK(squared_norm(rec.t1) == 0.0);
    CHECK(squared_norm(rec.rho) == 0.0);
}

TEST_CASE("sub-sampling degrades MRF relative to full sampling") {
    const int n = 16;
    const ParameterMap truth = grid_phantom(n);
    const PulseSequence seq = PulseSequence::constant(8, 40.0 * kPi / 180.0, 40.0);
    const Dictionary dict = grid_dictionary(seq);

    const auto full = synthesize_data(truth, seq, SamplingMask::full(n, 8), 0.0, 1);
    const auto sub = synthesize_data(truth, seq, SamplingMask::cartesian(n, 8, 4), 0.0, 1);
    const ErrorReport e_full = error_rate(mrf_reconstruct(full.kspace, dict), truth);
    const ErrorReport e_sub = error_rate(mrf_reconstruct(sub.kspace, dict), truth);
    CHECK(e_sub.t1 > e_full.t1);
    CHECK(e_full.t1 < 1e-12);
}

TEST_CASE("BLIP with one full-sampling step at mu=1 lands on the truth") {
    const int n = 16;
    const ParameterMap truth = grid_phantom(n);
    const PulseSequence seq = PulseSequence::constant(6, 40.0 * kPi / 180.0, 40.0);
    const Dictionary dict = grid_dictionary(seq);
    const auto syn = synthesize_data(truth, seq, SamplingMask::full(n, 6), 0.0, 1);

    BlipConfig cfg;
    cfg.iterations = 1;
    cfg.mu = 1.0;
    const BlipResult rec = blip_reconstruct(syn.kspace, dict, cfg);
    const ErrorReport err = error_rate(rec.map, truth);
    CHECK(err.t1 < 1e-12);
    CHECK(err.t2 < 1e-12);
    CHECK(err.rho < 1e-12);
}

TEST_CASE("BLIP with mu=0 returns the projected zero initialization") {
    const int n = 8;
    const ParameterMap truth = grid_phantom(n);
    const PulseSequence seq = PulseSequence::constant(4, 0.6, 40.0);
    const Dictionary dict = grid_dictionary(seq);
    const auto syn = synthesize_data(truth, seq, SamplingMask::full(n, 4), 0.0, 1);

    BlipConfig cfg;
    cfg.iterations = 3;
    cfg.mu = 0.0;  // explicit zero: no data flow
    const BlipResult rec = blip_reconstruct(syn.kspace, dict, cfg);
    CHECK(squared_norm(rec.map.t1) == 0.0);
    CHECK(squared_norm(rec.map.rho) == 0.0);
}

TEST_CASE("a Landweber step with mu <= 1 does not increase the data residual") {
    const int n = 16;
    const ParameterMap truth = grid_phantom(n);
    const PulseSequence seq = PulseSequence::constant(6, 40.0 * kPi / 180.0, 40.0);
    const Dictionary dict = grid_dictionary(seq);
    const SamplingMask mask = SamplingMask::cartesian(n, 6, 4);
    const auto syn = synthesize_data(truth, seq, mask, 0.0, 1);

    BlipConfig cfg;
    cfg.iterations = 2;
    cfg.mu = 0.9;
    const BlipResult state = blip_reconstruct(syn.kspace, dict, cfg);

    // One more gradient step by hand on the projected magnetization.
    const std::size_t l = syn.kspace.frame_count();
    double before = 0.0, after = 0.0;
    for (std::size_t ell = 0; ell < l; ++ell) {
        ComplexGrid spec = dft2(state.magnetization[ell]);
        mask.apply(spec, static_cast<int>(ell));
        ComplexGrid resid = spec;
        for (std::size_t i = 0; i < resid.count(); ++i) resid[i] -= syn.kspace.frames[ell][i];
        before += squared_norm(resid);

        const ComplexGrid grad = idft2(resid);
        ComplexGrid stepped = state.magnetization[ell];
        for (std::size_t i = 0; i < stepped.count(); ++i) stepped[i] -= 0.9 * grad[i];
        ComplexGrid spec2 = dft2(stepped);
        mask.apply(spec2, static_cast<int>(ell));
        for (std::size_t i = 0; i < spec2.count(); ++i) spec2[i] -= syn.kspace.frames[ell][i];
        after += squared_norm(spec2);
    }
    CHECK(after <= before + 1e-12);
}

TEST_CASE("dictionary projection is idempotent on projected magnetization") {
    const int n = 8;
    const ParameterMap truth = grid_phantom(n);
    const PulseSequence seq = PulseSequence::constant(4, 0.6, 40.0);
    const Dictionary dict = grid_dictionary(seq);
    const auto syn = synthesize_data(truth, seq, SamplingMask::cartesian(n, 4, 2), 0.0, 1);

    BlipConfig cfg;
    cfg.iterations = 2;
    const BlipResult state = blip_reconstruct(syn.kspace, dict, cfg);

    const std::size_t l = syn.kspace.frame_count();
    const std::size_t npix = static_cast<std::size_t>(n) * n;
    std::vector<Complex> x(npix * l);
    for (std::size_t ell = 0; ell < l; ++ell) {
        for (std::size_t pix = 0; pix < npix; ++pix) x[pix * l + ell] = state.magnetization[ell][pix];
    }
    const auto matches = dict.match_many(x, npix);
    for (std::size_t pix = 0; pix < npix; ++pix) {
        if (!matches[pix].atom_index) continue;
        const std::size_t j = *matches[pix].atom_index;
        for (std::size_t ell = 0; ell < l; ++ell) {
            const Complex reproj = matches[pix].rho_mag * dict.norm(j) * dict.fingerprint(j, ell);
            CHECK(std::abs(reproj - x[pix * l + ell]) < 1e-10);
        }
    }
}

TEST_CASE("BLIP runs are bit-reproducible") {
    const int n = 16;
    const ParameterMap truth = grid_phantom(n);
    const PulseSequence seq = PulseSequence::constant(6, 40.0 * kPi / 180.0, 40.0);
    const Dictionary dict = grid_dictionary(seq);
    const auto syn = synthesize_data(truth, seq, SamplingMask::cartesian(n, 6, 4), 0.0, 1);

    BlipConfig cfg;
    cfg.iterations = 5;
    const BlipResult a = blip_reconstruct(syn.kspace, dict, cfg);
    const BlipResult b = blip_reconstruct(syn.kspace, dict, cfg);
    for (std::size_t i = 0; i < a.map.t1.count(); ++i) {
        CHECK(a.map.t1[i] == b.map.t1[i]);
        CHECK(a.map.t2[i] == b.map.t2[i]);
        CHECK(a.map.rho[i] == b.map.rho[i]);
    }
    CHECK(a.residuals == b.residuals);
}

TEST_CASE("BLIP beats MRF on T1 under Cartesian sub-sampling") {
    const int n = 32;
    const ParameterMap truth = grid_phantom(n);
    const PulseSequence seq = PulseSequence::constant(40, 10.0 * kPi / 180.0, 10.0);
    const Dictionary dict = grid_dictionary(seq);
    const auto syn = synthesize_data(truth, seq, SamplingMask::cartesian(n, 40, 8), 0.0, 1);

    const ErrorReport mrf_err = error_rate(mrf_reconstruct(syn.kspace, dict), truth);
    BlipConfig cfg;
    cfg.iterations = 20;
    const ErrorReport blip_err = error_rate(blip_reconstruct(syn.kspace, dict, cfg).map, truth);
    CHECK(blip_err.t1 < mrf_err.t1);
}
