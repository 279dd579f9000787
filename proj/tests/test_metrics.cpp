#include <doctest.h>

#include <cmath>

#include "qmri/metrics.hpp"
#include "qmri/phantom.hpp"

using namespace qmri;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("error_rate is zero iff the maps agree on the effective domain") {
    const ParameterMap truth = make_phantom(default_phantom_spec(16));
    const ErrorReport same = error_rate(truth, truth);
    CHECK(same.t1 == 0.0);
    CHECK(same.t2 == 0.0);
    CHECK(same.rho == 0.0);

    ParameterMap off = truth;
    for (std::size_t i = 0; i < off.t1.count(); ++i) {
        if (off.omega[i]) off.t1[i] += 1.0;
    }
    CHECK(error_rate(off, truth).t1 > 0.0);
}

TEST_CASE("error_rate is scale homogeneous") {
    const ParameterMap truth = make_phantom(default_phantom_spec(16));
    ParameterMap scaled = truth;
    for (std::size_t i = 0; i < scaled.t1.count(); ++i) {
        scaled.t1[i] *= 1.1;
        scaled.t2[i] *= 1.1;
        scaled.rho[i] *= 1.1;
    }
    const ErrorReport rep = error_rate(scaled, truth);
    CHECK(rep.t1 == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(rep.t2 == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(rep.rho == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("error_rate flags an all-zero truth channel as undefined") {
    ParameterMap truth(8);
    truth.rho(2, 2) = Complex(90.0, 0.0);  // omega nonempty, but T1/T2 zero
    truth.recompute_omega();
    const ErrorReport rep = error_rate(truth, truth);
    CHECK_FALSE(rep.t1_defined);
    CHECK(rep.rho_defined);
}

TEST_CASE("error_rate only counts the truth effective domain") {
    const ParameterMap truth = make_phantom(default_phantom_spec(16));
    ParameterMap artifacts = truth;
    for (std::size_t i = 0; i < artifacts.t1.count(); ++i) {
        if (!truth.omega[i]) artifacts.t1[i] = 4000.0;  // off-domain junk
    }
    CHECK(error_rate(artifacts, truth).t1 == 0.0);
}

TEST_CASE("iterate_ratios of geometric steps is constant") {
    SolveReport report;
    report.iterations = 6;
    for (int i = 0; i < 6; ++i) {
        const double step = std::pow(0.5, i);
        report.step_t1.push_back(step);
        report.step_t2.push_back(step);
        report.step_rho.push_back(step);
    }
    const RatioSeries r = iterate_ratios(report);
    REQUIRE(r.t1.size() == 5);
    for (double v : r.t1) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("iterate_ratios truncates at a zero step and handles short runs") {
    SolveReport one;
    one.iterations = 1;
    one.step_t1 = {0.3};
    one.step_t2 = {0.3};
    one.step_rho = {0.3};
    CHECK(iterate_ratios(one).t1.empty());

    SolveReport zero_step;
    zero_step.iterations = 4;
    zero_step.step_t1 = {0.5, 0.25, 0.0, 0.0};
    zero_step.step_t2 = {0.5, 0.25, 0.0, 0.0};
    zero_step.step_rho = {0.5, 0.25, 0.0, 0.0};
    const RatioSeries r = iterate_ratios(zero_step);
    CHECK(r.t1.size() == 2);  // 0.25/0.5 and 0/0.25, then truncation
}

TEST_CASE("chebyshev: zero noise never exceeds any epsilon") {
    ChebyshevConfig cfg;
    cfg.sigma = 0.0;
    cfg.trials = 200;
    cfg.frame_counts = {4, 16};
    const auto table = chebyshev_trial(cfg);
    for (const ChebyshevRow& row : table) CHECK(row.empirical == 0.0);
}

TEST_CASE("chebyshev: empirical probability stays below the bound, trace scales as 1/L") {
    ChebyshevConfig cfg;
    cfg.trials = 2000;
    cfg.sigma = 0.1;
    cfg.epsilons = {0.05, 0.1};
    const auto table = chebyshev_trial(cfg);
    REQUIRE(!table.empty());
    for (const ChebyshevRow& row : table) {
        CHECK(row.empirical <= row.bound);
    }
    // Doubling L halves Tr((A^T A)^{-1}) within a 2x band.
    double trace4 = 0.0, trace16 = 0.0, trace64 = 0.0;
    for (const ChebyshevRow& row : table) {
        if (row.frames == 4) trace4 = row.trace_inv_gram;
        if (row.frames == 16) trace16 = row.trace_inv_gram;
        if (row.frames == 64) trace64 = row.trace_inv_gram;
    }
    CHECK(trace4 / trace16 == doctest::Approx(4.0).epsilon(0.5));
    CHECK(trace16 / trace64 == doctest::Approx(4.0).epsilon(0.5));
}

TEST_CASE("chebyshev rejects p > d") {
    ChebyshevConfig cfg;
    cfg.dims = 10;
    cfg.rows = 4;
    CHECK_THROWS_AS(chebyshev_trial(cfg), std::invalid_argument);
}

TEST_CASE("nonconvexity margin vanishes for equal endpoints") {
    const PulseSequence seq = PulseSequence::constant(10, 40.0 * kPi / 180.0, 40.0);
    const NonconvexityCertificate cert =
        nonconvexity_certificate({800.0, 80.0}, {800.0, 80.0}, seq);
    CHECK(cert.margin < 1e-4);
}

TEST_CASE("nonconvexity margin is symmetric in the endpoints") {
    const PulseSequence seq = PulseSequence::constant(10, 40.0 * kPi / 180.0, 40.0);
    const NonconvexityCertificate ab = nonconvexity_certificate({800.0, 80.0}, {3000.0, 300.0}, seq);
    const NonconvexityCertificate ba = nonconvexity_certificate({3000.0, 300.0}, {800.0, 80.0}, seq);
    CHECK(ab.margin == doctest::Approx(ba.margin).epsilon(1e-12));
    CHECK(ab.margin > 0.0);
}

TEST_CASE("nonconvexity margin grows with the endpoint separation") {
    const PulseSequence seq = PulseSequence::constant(10, 40.0 * kPi / 180.0, 40.0);
    const TissueParams base{800.0, 80.0};
    const double m1 = nonconvexity_certificate(base, {1200.0, 120.0}, seq).margin;
    const double m2 = nonconvexity_certificate(base, {2000.0, 200.0}, seq).margin;
    const double m3 = nonconvexity_certificate(base, {3000.0, 300.0}, seq).margin;
    CHECK(m1 < m2);
    CHECK(m2 < m3);
}
