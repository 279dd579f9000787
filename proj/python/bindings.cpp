// Python bindings for the qmri core: Bloch simulation, Fourier encoding,
// dictionary matching, phantoms and the reconstruction solvers.

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qmri/baselines.hpp"
#include "qmri/dictionary.hpp"
#include "qmri/metrics.hpp"
#include "qmri/phantom.hpp"
#include "qmri/solver.hpp"

namespace py = pybind11;
using namespace qmri;

namespace {

PulseSequence make_sequence(std::size_t l, double alpha, double tr, double phi) {
    return PulseSequence::constant(l, alpha, tr, phi);
}

SamplingMask make_mask(const std::string& mode, int n, int frames, int s, int p) {
    if (mode == "full") return SamplingMask::full(n, frames);
    if (mode == "cartesian") return SamplingMask::cartesian(n, frames, s);
    if (mode == "radial") return SamplingMask::radial(n, frames, p, s);
    throw std::invalid_argument("mask mode must be full, cartesian or radial");
}

py::array_t<double> vec3_array(const Eigen::Vector3d& v) {
    py::array_t<double> out(3);
    auto r = out.mutable_unchecked<1>();
    for (int i = 0; i < 3; ++i) r(i) = v[i];
    return out;
}

py::array_t<double> frames_array(const std::vector<Eigen::Vector3d>& frames) {
    py::array_t<double> out({static_cast<py::ssize_t>(frames.size()), py::ssize_t(3)});
    auto r = out.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < r.shape(0); ++i) {
        for (int j = 0; j < 3; ++j) r(i, j) = frames[i][j];
    }
    return out;
}

ComplexGrid grid_from_array(const py::array_t<Complex, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) {
        throw std::invalid_argument("expected a square 2-D array");
    }
    ComplexGrid g(static_cast<int>(a.shape(0)));
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i) {
        for (py::ssize_t j = 0; j < a.shape(1); ++j) g(i, j) = r(i, j);
    }
    return g;
}

py::array_t<Complex> array_from_grid(const ComplexGrid& g) {
    py::array_t<Complex> out({py::ssize_t(g.size()), py::ssize_t(g.size())});
    auto r = out.mutable_unchecked<2>();
    for (int i = 0; i < g.size(); ++i) {
        for (int j = 0; j < g.size(); ++j) r(i, j) = g(i, j);
    }
    return out;
}

py::array_t<double> array_from_real(const RealGrid& g) {
    py::array_t<double> out({py::ssize_t(g.size()), py::ssize_t(g.size())});
    auto r = out.mutable_unchecked<2>();
    for (int i = 0; i < g.size(); ++i) {
        for (int j = 0; j < g.size(); ++j) r(i, j) = g(i, j);
    }
    return out;
}

std::vector<ComplexGrid> frames_from_array(const py::array_t<Complex, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(1) != a.shape(2)) {
        throw std::invalid_argument("expected an (L, N, N) complex array");
    }
    std::vector<ComplexGrid> frames(a.shape(0), ComplexGrid(static_cast<int>(a.shape(1))));
    auto r = a.unchecked<3>();
    for (py::ssize_t ell = 0; ell < a.shape(0); ++ell) {
        for (py::ssize_t i = 0; i < a.shape(1); ++i) {
            for (py::ssize_t j = 0; j < a.shape(2); ++j) frames[ell](i, j) = r(ell, i, j);
        }
    }
    return frames;
}

py::array_t<Complex> array_from_frames(const std::vector<ComplexGrid>& frames) {
    const py::ssize_t n = frames.empty() ? 0 : frames.front().size();
    py::array_t<Complex> out({static_cast<py::ssize_t>(frames.size()), n, n});
    auto r = out.mutable_unchecked<3>();
    for (py::ssize_t ell = 0; ell < r.shape(0); ++ell) {
        for (py::ssize_t i = 0; i < n; ++i) {
            for (py::ssize_t j = 0; j < n; ++j) r(ell, i, j) = frames[ell](i, j);
        }
    }
    return out;
}

ParameterMap map_from_arrays(const py::array_t<double>& t1, const py::array_t<double>& t2,
                             const py::array_t<Complex>& rho, bool complex_rho) {
    if (t1.ndim() != 2 || t1.shape(0) != t1.shape(1)) {
        throw std::invalid_argument("expected square 2-D arrays");
    }
    ParameterMap map(static_cast<int>(t1.shape(0)), complex_rho);
    auto rt1 = t1.unchecked<2>();
    auto rt2 = t2.unchecked<2>();
    auto rrho = rho.unchecked<2>();
    for (int i = 0; i < map.n; ++i) {
        for (int j = 0; j < map.n; ++j) {
            map.t1(i, j) = rt1(i, j);
            map.t2(i, j) = rt2(i, j);
            map.rho(i, j) = rrho(i, j);
        }
    }
    map.recompute_omega();
    return map;
}

py::dict report_dict(const SolveReport& report) {
    py::dict d;
    d["residuals"] = report.residuals;
    d["lambdas"] = report.lambdas;
    d["step_t1"] = report.step_t1;
    d["step_t2"] = report.step_t2;
    d["step_rho"] = report.step_rho;
    d["iterations"] = report.iterations;
    d["termination"] = report.termination;
    d["cg_converged"] = report.cg_converged;
    d["frozen_pixels"] = report.frozen_pixels;
    d["wall_seconds"] = report.wall_seconds;
    return d;
}

SolverConfig solver_config(std::optional<double> lambda0, double beta, double epsilon,
                           int max_iters, bool project, double cg_tol, int cg_max_iters) {
    SolverConfig cfg;
    cfg.lambda0 = lambda0;
    cfg.beta = beta;
    cfg.epsilon = epsilon;
    cfg.max_iters = max_iters;
    cfg.project = project;
    cfg.cg.tol = cg_tol;
    cfg.cg.max_iters = cg_max_iters;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(qmri, m) {
    m.doc() = "Quantitative MRI toolkit: Bloch simulation, fingerprinting baselines and "
              "projected Gauss-Newton / Levenberg-Marquardt reconstruction";

    py::class_<ParameterMap>(m, "ParameterMap")
        .def_readonly("n", &ParameterMap::n)
        .def_readonly("complex_rho", &ParameterMap::complex_rho)
        .def_property_readonly("t1", [](const ParameterMap& x) { return array_from_real(x.t1); })
        .def_property_readonly("t2", [](const ParameterMap& x) { return array_from_real(x.t2); })
        .def_property_readonly("rho", [](const ParameterMap& x) { return array_from_grid(x.rho); })
        .def_property_readonly("omega", [](const ParameterMap& x) {
            py::array_t<bool> out({py::ssize_t(x.n), py::ssize_t(x.n)});
            auto r = out.mutable_unchecked<2>();
            for (int i = 0; i < x.n; ++i) {
                for (int j = 0; j < x.n; ++j) r(i, j) = x.omega(i, j) != 0;
            }
            return out;
        })
        .def_static("from_arrays", &map_from_arrays, py::arg("t1"), py::arg("t2"), py::arg("rho"),
                    py::arg("complex_rho") = false);

    m.def("rotation_matrix", [](double alpha, double phi) {
        const Eigen::Matrix3d r = rotation_matrix(alpha, phi);
        py::array_t<double> out({py::ssize_t(3), py::ssize_t(3)});
        auto w = out.mutable_unchecked<2>();
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) w(i, j) = r(i, j);
        }
        return out;
    }, py::arg("alpha"), py::arg("phi") = 0.0);

    m.def("relaxation_factors", [](double tr, double t1, double t2) {
        const RelaxationFactors f = relaxation_factors(tr, {t1, t2});
        return py::make_tuple(vec3_array(f.e1_diag), f.e2);
    }, py::arg("tr"), py::arg("t1"), py::arg("t2"));

    m.def("simulate_sequence", [](double t1, double t2, std::size_t l, double alpha, double tr,
                                  double phi, bool with_derivs) {
        const MagnetizationFrames out =
            simulate_sequence({t1, t2}, make_sequence(l, alpha, tr, phi), with_derivs);
        py::dict d;
        d["frames"] = frames_array(out.frames);
        if (with_derivs) {
            d["d_t1"] = frames_array(out.d_t1);
            d["d_t2"] = frames_array(out.d_t2);
        }
        return d;
    }, py::arg("t1"), py::arg("t2"), py::arg("L"), py::arg("alpha"), py::arg("tr"),
       py::arg("phi") = 0.0, py::arg("with_derivs") = false);

    m.def("closed_form_solution", [](const std::string& which, double t, double t1, double t2,
                                     double omega0, double alpha,
                                     const std::array<double, 3>& m0) {
        ContinuousBlochSetup setup;
        setup.theta = {t1, t2};
        setup.omega0 = omega0;
        setup.alpha = alpha;
        setup.m0 = Eigen::Vector3d(m0[0], m0[1], m0[2]);
        BlochCase which_case;
        if (which == "free_precession") which_case = BlochCase::free_precession;
        else if (which == "relaxation") which_case = BlochCase::relaxation;
        else if (which == "excitation_only") which_case = BlochCase::excitation_only;
        else if (which == "excitation_relaxation") which_case = BlochCase::excitation_relaxation;
        else throw std::invalid_argument("unknown Bloch case: " + which);
        return vec3_array(closed_form_solution(setup, which_case, t));
    }, py::arg("case"), py::arg("t"), py::arg("t1") = 0.0, py::arg("t2") = 0.0,
       py::arg("omega0") = 0.0, py::arg("alpha") = 0.0,
       py::arg("m0") = std::array<double, 3>{0.0, 0.0, 1.0});

    m.def("invert_from_trajectory", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples,
                                       double tau, const std::array<double, 3>& b, double gamma) {
        if (samples.ndim() != 2 || samples.shape(1) != 3) {
            throw std::invalid_argument("expected an (n, 3) trajectory");
        }
        std::vector<Eigen::Vector3d> traj(samples.shape(0));
        auto r = samples.unchecked<2>();
        for (py::ssize_t i = 0; i < samples.shape(0); ++i) {
            traj[i] = Eigen::Vector3d(r(i, 0), r(i, 1), r(i, 2));
        }
        const TrajectoryInversion inv =
            invert_from_trajectory(traj, tau, Eigen::Vector3d(b[0], b[1], b[2]), gamma);
        py::dict d;
        d["t1"] = inv.theta.t1;
        d["t2"] = inv.theta.t2;
        d["big_theta"] = vec3_array(inv.big_theta);
        return d;
    }, py::arg("samples"), py::arg("tau"), py::arg("b_field"), py::arg("gamma") = 1.0);

    m.def("dft2", [](const py::array_t<Complex, py::array::c_style | py::array::forcecast>& a) {
        return array_from_grid(dft2(grid_from_array(a)));
    });
    m.def("idft2", [](const py::array_t<Complex, py::array::c_style | py::array::forcecast>& a) {
        return array_from_grid(idft2(grid_from_array(a)));
    });

    m.def("cartesian_mask_rows", &cartesian_mask_rows, py::arg("n"), py::arg("s"), py::arg("ell"));
    m.def("radial_mask", [](int n, int p, int s, int ell) {
        const BoolGrid g = radial_mask_grid(n, p, s, ell);
        py::array_t<bool> out({py::ssize_t(n), py::ssize_t(n)});
        auto r = out.mutable_unchecked<2>();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) r(i, j) = g(i, j) != 0;
        }
        return out;
    }, py::arg("n"), py::arg("p"), py::arg("s"), py::arg("ell"));

    py::class_<Dictionary>(m, "Dictionary")
        .def_property_readonly("atom_count", &Dictionary::atom_count)
        .def_property_readonly("frame_count", &Dictionary::frame_count)
        .def("theta", [](const Dictionary& d, std::size_t j) {
            return py::make_tuple(d.theta(j).t1, d.theta(j).t2);
        })
        .def("match", [](const Dictionary& d, const std::vector<Complex>& traj, bool complex_mode) {
            const MatchResult r = d.match_pixel(traj, complex_mode);
            py::dict out;
            out["t1"] = r.theta.t1;
            out["t2"] = r.theta.t2;
            out["rho_mag"] = r.rho_mag;
            out["rho"] = r.rho;
            out["atom_index"] = r.atom_index ? py::cast(*r.atom_index) : py::none();
            return out;
        }, py::arg("trajectory"), py::arg("complex_mode") = false);

    m.def("build_dictionary", [](const std::vector<double>& t1_grid, const std::vector<double>& t2_grid,
                                 std::size_t l, double alpha, double tr, double phi) {
        return build_dictionary(t1_grid, t2_grid, make_sequence(l, alpha, tr, phi));
    }, py::arg("t1_grid"), py::arg("t2_grid"), py::arg("L"), py::arg("alpha"), py::arg("tr"),
       py::arg("phi") = 0.0);
    m.def("arange_grid", &arange_grid, py::arg("start"), py::arg("stop"), py::arg("step"));

    m.def("make_phantom", [](const std::string& builtin, int n) {
        if (builtin == "default") return make_phantom(default_phantom_spec(n));
        if (builtin == "on_grid") return make_phantom(on_grid_phantom_spec(n));
        if (builtin == "complex") return make_phantom(complex_phantom_spec(n));
        throw std::invalid_argument("unknown builtin phantom: " + builtin);
    }, py::arg("builtin"), py::arg("n"));

    m.def("shrink_average", &shrink_average, py::arg("map"));

    m.def("synthesize_data", [](const ParameterMap& map, std::size_t l, double alpha, double tr,
                                const std::string& mask_mode, int s, int p, double sigma,
                                std::uint64_t seed) {
        const SamplingMask mask = make_mask(mask_mode, map.n, static_cast<int>(l), s, p);
        const SynthesisResult syn =
            synthesize_data(map, make_sequence(l, alpha, tr, 0.0), mask, sigma, seed);
        py::dict d;
        d["kspace"] = array_from_frames(syn.kspace.frames);
        d["clean_magnetization"] = array_from_frames(syn.clean_magnetization);
        d["snr"] = syn.snr;
        return d;
    }, py::arg("map"), py::arg("L"), py::arg("alpha"), py::arg("tr"), py::arg("mask_mode") = "full",
       py::arg("s") = 1, py::arg("p") = 0, py::arg("sigma") = 0.0, py::arg("seed") = 0);

    m.def("mrf_reconstruct", [](const py::array_t<Complex, py::array::c_style | py::array::forcecast>& kspace,
                                const std::string& mask_mode, int s, int p, const Dictionary& dict,
                                bool complex_rho) {
        KSpaceData data;
        data.frames = frames_from_array(kspace);
        data.mask = make_mask(mask_mode, data.size(), static_cast<int>(data.frame_count()), s, p);
        return mrf_reconstruct(data, dict, complex_rho);
    }, py::arg("kspace"), py::arg("mask_mode"), py::arg("s"), py::arg("p"), py::arg("dict"),
       py::arg("complex_rho") = false);

    m.def("blip_reconstruct", [](const py::array_t<Complex, py::array::c_style | py::array::forcecast>& kspace,
                                 const std::string& mask_mode, int s, int p, const Dictionary& dict,
                                 int iterations, std::optional<double> mu, bool complex_rho,
                                 const std::string& step_rule) {
        KSpaceData data;
        data.frames = frames_from_array(kspace);
        data.mask = make_mask(mask_mode, data.size(), static_cast<int>(data.frame_count()), s, p);
        BlipConfig cfg;
        cfg.iterations = iterations;
        cfg.mu = mu;
        cfg.complex_rho = complex_rho;
        cfg.step_rule = step_rule == "halving" ? BlipStepRule::halving : BlipStepRule::constant;
        const BlipResult r = blip_reconstruct(data, dict, cfg);
        return py::make_tuple(r.map, r.residuals);
    }, py::arg("kspace"), py::arg("mask_mode"), py::arg("s"), py::arg("p"), py::arg("dict"),
       py::arg("iterations") = 20, py::arg("mu") = std::nullopt, py::arg("complex_rho") = false,
       py::arg("step_rule") = "constant");

    m.def("solve_lm", [](const ParameterMap& x0,
                         const py::array_t<Complex, py::array::c_style | py::array::forcecast>& kspace,
                         const std::string& mask_mode, int s, int p, std::size_t l, double alpha,
                         double tr, std::optional<double> lambda0, double beta, double epsilon,
                         int max_iters, bool project, double cg_tol, int cg_max_iters) {
        KSpaceData data;
        data.frames = frames_from_array(kspace);
        data.mask = make_mask(mask_mode, data.size(), static_cast<int>(data.frame_count()), s, p);
        const auto [x, report] =
            solve_lm(x0, data, make_sequence(l, alpha, tr, 0.0),
                     solver_config(lambda0, beta, epsilon, max_iters, project, cg_tol, cg_max_iters));
        return py::make_tuple(x, report_dict(report));
    }, py::arg("x0"), py::arg("kspace"), py::arg("mask_mode"), py::arg("s"), py::arg("p"),
       py::arg("L"), py::arg("alpha"), py::arg("tr"), py::arg("lambda0") = std::nullopt,
       py::arg("beta") = 0.01, py::arg("epsilon") = 0.0, py::arg("max_iters") = 25,
       py::arg("project") = true, py::arg("cg_tol") = 1e-8, py::arg("cg_max_iters") = 200);

    m.def("solve_gauss_newton", [](const ParameterMap& x0,
                                   const py::array_t<Complex, py::array::c_style | py::array::forcecast>& kspace,
                                   const std::string& mask_mode, int s, int p, std::size_t l,
                                   double alpha, double tr, int max_iters) {
        KSpaceData data;
        data.frames = frames_from_array(kspace);
        data.mask = make_mask(mask_mode, data.size(), static_cast<int>(data.frame_count()), s, p);
        SolverConfig cfg;
        cfg.max_iters = max_iters;
        const auto [x, report] = solve_gauss_newton(x0, data, make_sequence(l, alpha, tr, 0.0), cfg);
        return py::make_tuple(x, report_dict(report));
    }, py::arg("x0"), py::arg("kspace"), py::arg("mask_mode"), py::arg("s"), py::arg("p"),
       py::arg("L"), py::arg("alpha"), py::arg("tr"), py::arg("max_iters") = 25);

    m.def("error_rate", [](const ParameterMap& computed, const ParameterMap& truth) {
        const ErrorReport rep = error_rate(computed, truth);
        py::dict d;
        d["t1"] = rep.t1;
        d["t2"] = rep.t2;
        d["rho"] = rep.rho;
        d["rho_re"] = rep.rho_re;
        d["rho_im"] = rep.rho_im;
        return d;
    }, py::arg("computed"), py::arg("truth"));

    m.attr("__version__") = "0.1.0";
}
