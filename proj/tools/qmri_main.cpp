// qmri: command-line driver for the quantitative-MRI pipeline.
//
//   qmri simulate    <config.json>   phantom + k-space synthesis
//   qmri dict        <config.json>   fingerprint dictionary build
//   qmri reconstruct <config.json>   mrf | blip | gn | lm
//   qmri compare     <truth_dir> <run_dir>...
//
// Exit codes: 0 success, 1 numerical failure, 2 configuration error.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "qmri/io.hpp"
#include "qmri/metrics.hpp"
#include "qmri/parallel.hpp"
#include "qmri/rng.hpp"

using namespace qmri;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

json load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
}

const json& require(const json& j, const std::string& field, const std::string& where) {
    if (!j.contains(field)) throw ConfigError("missing config field: " + where + "." + field);
    return j.at(field);
}

PulseSequence sequence_from(const json& cfg) {
    const json& seq_cfg = require(cfg, "sequence", "config");
    const std::size_t l = require(seq_cfg, "L", "sequence").get<std::size_t>();
    double alpha;
    if (seq_cfg.contains("alpha_deg")) {
        alpha = seq_cfg.at("alpha_deg").get<double>() * kPi / 180.0;
    } else {
        alpha = require(seq_cfg, "alpha", "sequence").get<double>();
    }
    const double tr = require(seq_cfg, "TR", "sequence").get<double>();
    const double phi = seq_cfg.value("phi", 0.0);
    PulseSequence seq = PulseSequence::constant(l, alpha, tr, phi);
    seq.validate();
    return seq;
}

SamplingMask mask_from(const json& cfg, int n, int frames) {
    const json& s_cfg = require(cfg, "sampling", "config");
    const std::string mode = require(s_cfg, "mode", "sampling").get<std::string>();
    if (mode == "full") return SamplingMask::full(n, frames);
    if (mode == "cartesian") {
        return SamplingMask::cartesian(n, frames, require(s_cfg, "s", "sampling").get<int>());
    }
    if (mode == "radial") {
        return SamplingMask::radial(n, frames, require(s_cfg, "p", "sampling").get<int>(),
                                    require(s_cfg, "s", "sampling").get<int>());
    }
    throw ConfigError("sampling.mode must be full, cartesian or radial");
}

ParameterMap phantom_from(const json& cfg) {
    const json& p = require(cfg, "phantom", "config");
    if (p.contains("builtin")) {
        const int n = require(p, "N", "phantom").get<int>();
        const std::string name = p.at("builtin").get<std::string>();
        if (name == "default") return make_phantom(default_phantom_spec(n));
        if (name == "on_grid") return make_phantom(on_grid_phantom_spec(n));
        if (name == "complex") return make_phantom(complex_phantom_spec(n));
        throw ConfigError("phantom.builtin must be default, on_grid or complex");
    }
    if (p.contains("spec")) {
        const fs::path path = p.at("spec").get<std::string>();
        if (!fs::exists(path)) throw ConfigError("phantom.spec file not found: " + path.string());
        return make_phantom(load_phantom_spec(path));
    }
    if (p.contains("raw")) {
        const json& r = p.at("raw");
        for (const char* field : {"t1", "t2", "rho", "mask"}) {
            const fs::path path = require(r, field, "phantom.raw").get<std::string>();
            if (!fs::exists(path)) {
                throw ConfigError(std::string("phantom.raw.") + field + " file not found: " +
                                  path.string());
            }
        }
        return load_raw_map(r.at("t1").get<std::string>(), r.at("t2").get<std::string>(),
                            r.at("rho").get<std::string>(), r.at("mask").get<std::string>());
    }
    throw ConfigError("phantom needs one of: builtin, spec, raw");
}

std::vector<double> grid_from(const json& g, const std::string& where) {
    return arange_grid(require(g, "start", where).get<double>(),
                       require(g, "stop", where).get<double>(),
                       require(g, "step", where).get<double>());
}

Dictionary dictionary_from(const json& d_cfg, const PulseSequence& seq) {
    if (d_cfg.contains("path")) {
        const fs::path path = d_cfg.at("path").get<std::string>();
        if (!fs::exists(path)) throw ConfigError("dictionary.path not found: " + path.string());
        Dictionary dict = load_dictionary(path);
        if (dict.frame_count() != seq.length()) {
            throw ConfigError("dictionary frame count does not match the sequence length");
        }
        return dict;
    }
    return build_dictionary(grid_from(require(d_cfg, "t1", "dictionary"), "dictionary.t1"),
                            grid_from(require(d_cfg, "t2", "dictionary"), "dictionary.t2"), seq);
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    std::uint64_t seed, double wall_seconds) {
    json m;
    m["command"] = command;
    m["config"] = config;
    const std::string dump = config.dump();
    m["config_hash"] = fnv1a(dump.data(), dump.size());
    m["seed"] = seed;
    m["threads"] = worker_count();
    m["version"] = kFormatVersion;
    m["wall_seconds"] = wall_seconds;
    std::ofstream out(dir / "manifest.json");
    out << m.dump(2) << "\n";
}

int cmd_simulate(const fs::path& config_path, const std::optional<std::string>& out_override,
                 const std::optional<std::uint64_t>& seed_override) {
    json cfg = load_config(config_path);
    const auto t0 = std::chrono::steady_clock::now();

    const ParameterMap truth = phantom_from(cfg);
    const PulseSequence seq = sequence_from(cfg);
    const SamplingMask mask = mask_from(cfg, truth.n, static_cast<int>(seq.length()));

    const json noise = cfg.value("noise", json::object());
    std::uint64_t seed = noise.value("seed", 0ULL);
    if (seed_override) seed = *seed_override;
    double sigma = noise.value("sigma", 0.0);
    if (noise.contains("target_snr")) {
        sigma = calibrate_sigma(truth, seq, mask, noise.at("target_snr").get<double>(), seed);
        std::cout << "calibrated sigma = " << sigma << "\n";
    }

    const fs::path out =
        out_override ? fs::path(*out_override) : fs::path(require(cfg, "output", "config").get<std::string>());
    fs::create_directories(out);

    const SynthesisResult syn = synthesize_data(truth, seq, mask, sigma, seed);
    save_kspace(out / "kspace.bin", syn.kspace);
    save_map(out / "truth", truth);
    std::cout << "mask: " << mask.descriptor() << "\n";
    std::cout << "SNR: " << syn.snr << "\n";

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out, "simulate", cfg, seed, wall);
    return 0;
}

int cmd_dict(const fs::path& config_path, const std::optional<std::string>& out_override) {
    json cfg = load_config(config_path);
    const auto t0 = std::chrono::steady_clock::now();
    const PulseSequence seq = sequence_from(cfg);
    const Dictionary dict = dictionary_from(require(cfg, "dictionary", "config"), seq);
    const fs::path out =
        out_override ? fs::path(*out_override) : fs::path(require(cfg, "output", "config").get<std::string>());
    fs::create_directories(out);
    save_dictionary(out / "dict.bin", dict);
    std::cout << "atoms: " << dict.atom_count() << "\n";
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out, "dict", cfg, 0, wall);
    return 0;
}

SolverConfig solver_config_from(const json& m) {
    SolverConfig cfg;
    if (m.contains("lambda0")) cfg.lambda0 = m.at("lambda0").get<double>();
    cfg.beta = m.value("beta", cfg.beta);
    cfg.epsilon = m.value("epsilon", cfg.epsilon);
    cfg.max_iters = m.value("max_iters", cfg.max_iters);
    cfg.project = m.value("project", true);
    if (m.contains("cg_tol")) cfg.cg.tol = m.at("cg_tol").get<double>();
    if (m.contains("cg_max_iters")) cfg.cg.max_iters = m.at("cg_max_iters").get<int>();
    if (m.contains("discrepancy")) {
        DiscrepancyStop stop;
        stop.varrho = m.at("discrepancy").value("varrho", stop.varrho);
        stop.delta = m.at("discrepancy").value("delta", 0.0);
        cfg.discrepancy = stop;
    }
    if (m.contains("box")) {
        const json& b = m.at("box");
        cfg.box.t1_hi = b.value("t1_hi", cfg.box.t1_hi);
        cfg.box.t2_hi = b.value("t2_hi", cfg.box.t2_hi);
        cfg.box.rho_re_hi = b.value("rho_hi", cfg.box.rho_re_hi);
        cfg.box.rho_im_hi = b.value("rho_hi", cfg.box.rho_im_hi);
    }
    return cfg;
}

json default_coarse_dictionary() {
    return json{{"t1", {{"start", 200.0}, {"stop", 5500.0}, {"step", 200.0}}},
                {"t2", {{"start", 20.0}, {"stop", 550.0}, {"step", 20.0}}}};
}

int cmd_reconstruct(const fs::path& config_path, const std::optional<std::string>& out_override,
                    const std::optional<std::string>& method_override) {
    json cfg = load_config(config_path);
    const auto t0 = std::chrono::steady_clock::now();

    const fs::path kspace_path =
        require(require(cfg, "input", "config"), "kspace", "input").get<std::string>();
    if (!fs::exists(kspace_path)) throw ConfigError("input.kspace not found: " + kspace_path.string());
    const KSpaceData data = load_kspace(kspace_path);

    const PulseSequence seq = sequence_from(cfg);
    if (seq.length() != data.frame_count()) {
        throw ConfigError("sequence.L does not match the k-space frame count");
    }

    json m_cfg = require(cfg, "method", "config");
    std::string method = require(m_cfg, "name", "method").get<std::string>();
    if (method_override) method = *method_override;
    const bool complex_rho = m_cfg.value("rho_complex", false);

    const fs::path out =
        out_override ? fs::path(*out_override) : fs::path(require(cfg, "output", "config").get<std::string>());
    fs::create_directories(out);

    ParameterMap result;
    if (method == "mrf") {
        const Dictionary dict = dictionary_from(require(m_cfg, "dictionary", "method"), seq);
        result = mrf_reconstruct(data, dict, complex_rho);
    } else if (method == "blip") {
        const Dictionary dict = dictionary_from(require(m_cfg, "dictionary", "method"), seq);
        BlipConfig bc;
        bc.iterations = m_cfg.value("iterations", bc.iterations);
        if (m_cfg.contains("mu")) bc.mu = m_cfg.at("mu").get<double>();
        if (m_cfg.value("step_rule", "constant") == std::string("halving")) {
            bc.step_rule = BlipStepRule::halving;
        }
        bc.complex_rho = complex_rho;
        const BlipResult blip = blip_reconstruct(data, dict, bc);
        result = blip.map;
        save_residual_trace(out / "residuals.csv", blip.residuals);
    } else if (method == "gn" || method == "lm") {
        ParameterMap x0;
        if (m_cfg.contains("init") && m_cfg.at("init").contains("path")) {
            const fs::path init_path = m_cfg.at("init").at("path").get<std::string>();
            if (!fs::exists(init_path)) {
                throw ConfigError("method.init.path not found: " + init_path.string());
            }
            x0 = load_map(init_path);
        } else {
            // Coarse-dictionary BLIP initialization.
            const json init_cfg = m_cfg.value("init", json::object());
            const json d_cfg = init_cfg.value("dictionary", default_coarse_dictionary());
            const Dictionary coarse = dictionary_from(d_cfg, seq);
            BlipConfig bc;
            bc.iterations = init_cfg.value("iterations", 20);
            bc.complex_rho = complex_rho;
            x0 = blip_reconstruct(data, coarse, bc).map;
        }
        x0.complex_rho = complex_rho;

        const SolverConfig sc = solver_config_from(m_cfg);
        const auto [solution, report] =
            method == "gn" ? solve_gauss_newton(x0, data, seq, sc) : solve_lm(x0, data, seq, sc);
        result = solution;
        save_solve_report(out / "report.csv", report);
        save_map(out / "init", x0);
        std::cout << "iterations: " << report.iterations << " (" << report.termination << ")\n";
        if (!report.cg_converged) {
            std::cout << "warning: CG hit its iteration cap in at least one step\n";
        }
    } else {
        throw ConfigError("method.name must be mrf, blip, gn or lm");
    }

    save_map(out / "maps", result);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out, "reconstruct", cfg, data.seed, wall);
    std::cout << "wrote " << (out / "maps").string() << "\n";
    return 0;
}

int cmd_compare(const fs::path& truth_dir, const std::vector<std::string>& run_dirs,
                const std::optional<std::string>& out_path) {
    const ParameterMap truth = load_map(truth_dir);
    std::ostringstream table;
    table << "label,time_s,err_T1,err_T2,err_rho\n";
    table.precision(12);
    for (const std::string& run : run_dirs) {
        const fs::path dir(run);
        const ParameterMap computed = load_map(dir / "maps");
        if (computed.n != truth.n) throw ConfigError("grid mismatch for run: " + run);
        const ErrorReport err = error_rate(computed, truth);
        double wall = 0.0;
        const fs::path manifest = dir / "manifest.json";
        if (fs::exists(manifest)) {
            std::ifstream in(manifest);
            wall = json::parse(in).value("wall_seconds", 0.0);
        }
        table << dir.filename().string() << ',' << wall << ',' << err.t1 << ',' << err.t2 << ','
              << err.rho << "\n";
    }
    std::cout << table.str();
    if (out_path) {
        std::ofstream out(*out_path);
        out << table.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qMRI toolkit: simulation, dictionaries and reconstruction"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::string> out_override, method_override;
    std::optional<std::uint64_t> seed_override;

    auto add_common = [&](CLI::App* sub, bool with_seed, bool with_method) {
        sub->add_option("config", config, "JSON run configuration")->required();
        sub->add_option("--out", [&](const std::vector<std::string>& v) {
            out_override = v.front();
            return true;
        }, "Override the output directory");
        if (with_seed) {
            sub->add_option("--seed", [&](const std::vector<std::string>& v) {
                seed_override = std::stoull(v.front());
                return true;
            }, "Override the noise seed");
        }
        if (with_method) {
            sub->add_option("--method", [&](const std::vector<std::string>& v) {
                method_override = v.front();
                return true;
            }, "Override method.name");
        }
    };

    CLI::App* sim = app.add_subcommand("simulate", "Generate a phantom and synthetic k-space data");
    add_common(sim, true, false);
    CLI::App* dict = app.add_subcommand("dict", "Build and store a fingerprint dictionary");
    add_common(dict, false, false);
    CLI::App* rec = app.add_subcommand("reconstruct", "Reconstruct parameter maps from k-space data");
    add_common(rec, false, true);

    CLI::App* cmp = app.add_subcommand("compare", "Tabulate error rates against a truth map");
    std::string truth_dir;
    std::vector<std::string> run_dirs;
    std::optional<std::string> cmp_out;
    cmp->add_option("truth", truth_dir, "Directory holding the truth map CSVs")->required();
    cmp->add_option("runs", run_dirs, "Reconstruction output directories")->required();
    cmp->add_option("--out", [&](const std::vector<std::string>& v) {
        cmp_out = v.front();
        return true;
    }, "Also write the table to this CSV file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config, out_override, seed_override);
        if (dict->parsed()) return cmd_dict(config, out_override);
        if (rec->parsed()) return cmd_reconstruct(config, out_override, method_override);
        if (cmp->parsed()) return cmd_compare(truth_dir, run_dirs, cmp_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
