#include "qmri/io.hpp"

#include <bit>
#include <fstream>
#include <json.hpp>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "k-space binaries are little-endian; big-endian hosts need byte swaps");

namespace qmri {

using nlohmann::json;

namespace {

json mask_to_json(const SamplingMask& mask) {
    json j;
    switch (mask.kind()) {
        case MaskKind::full:
            j["mode"] = "full";
            break;
        case MaskKind::cartesian:
            j["mode"] = "cartesian";
            j["s"] = mask.cartesian_factor();
            break;
        case MaskKind::radial:
            j["mode"] = "radial";
            j["p"] = mask.radial_angles();
            j["s"] = mask.radial_lines();
            break;
    }
    return j;
}

SamplingMask mask_from_json(const json& j, int n, int frames) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "full") return SamplingMask::full(n, frames);
    if (mode == "cartesian") return SamplingMask::cartesian(n, frames, j.at("s").get<int>());
    if (mode == "radial") {
        return SamplingMask::radial(n, frames, j.at("p").get<int>(), j.at("s").get<int>());
    }
    throw ConfigError("unknown mask mode: " + mode);
}

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path,
                          std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw ConfigError("cannot write file: " + path.string());
    return out;
}

void write_csv_grid(const std::filesystem::path& path, const RealGrid& g) {
    std::ofstream out = open_output(path);
    out.precision(17);
    out << "N," << g.size() << "\n";
    for (int i = 0; i < g.size(); ++i) {
        for (int j = 0; j < g.size(); ++j) {
            out << g(i, j) << (j + 1 < g.size() ? "," : "\n");
        }
    }
}

RealGrid read_csv_grid(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("N,", 0) != 0) {
        throw ConfigError("map CSV missing N header: " + path.string());
    }
    const int n = std::stoi(line.substr(2));
    RealGrid g(n);
    for (int i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw ConfigError("map CSV truncated: " + path.string());
        std::istringstream row(line);
        std::string cell;
        for (int j = 0; j < n; ++j) {
            if (!std::getline(row, cell, ',')) {
                throw ConfigError("map CSV short row: " + path.string());
            }
            g(i, j) = std::stod(cell);
        }
    }
    return g;
}

}  // namespace

void save_kspace(const std::filesystem::path& bin_path, const KSpaceData& data) {
    std::ofstream out = open_output(bin_path, std::ios::binary);
    for (const ComplexGrid& frame : data.frames) {
        out.write(reinterpret_cast<const char*>(frame.data()),
                  static_cast<std::streamsize>(frame.count() * sizeof(Complex)));
    }
    json sidecar;
    sidecar["N"] = data.size();
    sidecar["L"] = data.frame_count();
    sidecar["mask"] = mask_to_json(data.mask);
    sidecar["sigma"] = data.sigma;
    sidecar["seed"] = data.seed;
    sidecar["version"] = kFormatVersion;
    std::filesystem::path side = bin_path;
    side += ".json";
    open_output(side) << sidecar.dump(2) << "\n";
}

KSpaceData load_kspace(const std::filesystem::path& bin_path) {
    std::filesystem::path side = bin_path;
    side += ".json";
    json sidecar = json::parse(open_input(side));
    const int n = sidecar.at("N").get<int>();
    const int l = sidecar.at("L").get<int>();

    KSpaceData data;
    data.mask = mask_from_json(sidecar.at("mask"), n, l);
    data.sigma = sidecar.value("sigma", 0.0);
    data.seed = sidecar.value("seed", 0ULL);
    data.frames.assign(l, ComplexGrid(n));
    std::ifstream in = open_input(bin_path, std::ios::binary);
    for (ComplexGrid& frame : data.frames) {
        in.read(reinterpret_cast<char*>(frame.data()),
                static_cast<std::streamsize>(frame.count() * sizeof(Complex)));
        if (!in) throw ConfigError("k-space binary truncated: " + bin_path.string());
    }
    return data;
}

void save_map(const std::filesystem::path& dir, const ParameterMap& map) {
    std::filesystem::create_directories(dir);
    write_csv_grid(dir / "t1.csv", map.t1);
    write_csv_grid(dir / "t2.csv", map.t2);
    RealGrid re(map.n), im(map.n);
    for (std::size_t i = 0; i < map.rho.count(); ++i) {
        re[i] = map.rho[i].real();
        im[i] = map.rho[i].imag();
    }
    write_csv_grid(dir / "rho_re.csv", re);
    write_csv_grid(dir / "rho_im.csv", im);
}

ParameterMap load_map(const std::filesystem::path& dir) {
    const RealGrid t1 = read_csv_grid(dir / "t1.csv");
    const RealGrid t2 = read_csv_grid(dir / "t2.csv");
    const RealGrid re = read_csv_grid(dir / "rho_re.csv");
    const RealGrid im = read_csv_grid(dir / "rho_im.csv");
    ParameterMap map(t1.size());
    map.t1 = t1;
    map.t2 = t2;
    bool any_imag = false;
    for (std::size_t i = 0; i < map.rho.count(); ++i) {
        map.rho[i] = Complex(re[i], im[i]);
        any_imag = any_imag || im[i] != 0.0;
    }
    map.complex_rho = any_imag;
    map.recompute_omega();
    return map;
}

ParameterMap load_raw_map(const std::filesystem::path& t1_csv, const std::filesystem::path& t2_csv,
                          const std::filesystem::path& rho_csv,
                          const std::filesystem::path& mask_csv) {
    const RealGrid t1 = read_csv_grid(t1_csv);
    const RealGrid t2 = read_csv_grid(t2_csv);
    const RealGrid rho = read_csv_grid(rho_csv);
    const RealGrid mask = read_csv_grid(mask_csv);
    if (t2.size() != t1.size() || rho.size() != t1.size() || mask.size() != t1.size()) {
        throw ConfigError("raw map channels have mismatched grid sizes");
    }
    ParameterMap map(t1.size());
    for (std::size_t i = 0; i < map.rho.count(); ++i) {
        if (mask[i] != 0.0) {
            map.t1[i] = t1[i];
            map.t2[i] = t2[i];
            map.rho[i] = Complex(rho[i], 0.0);
        }
    }
    map.recompute_omega();
    return map;
}

void save_dictionary(const std::filesystem::path& bin_path, const Dictionary& dict) {
    std::ofstream out = open_output(bin_path, std::ios::binary);
    const std::size_t j_count = dict.atom_count();
    const std::size_t l = dict.frame_count();
    std::vector<double> buffer;
    buffer.reserve(2 * l);
    for (std::size_t j = 0; j < j_count; ++j) {
        buffer.clear();
        for (std::size_t ell = 0; ell < l; ++ell) {
            const Complex f = dict.fingerprint(j, ell);
            buffer.push_back(f.real());
            buffer.push_back(f.imag());
        }
        out.write(reinterpret_cast<const char*>(buffer.data()),
                  static_cast<std::streamsize>(buffer.size() * sizeof(double)));
    }
    std::vector<double> norms(j_count);
    for (std::size_t j = 0; j < j_count; ++j) norms[j] = dict.norm(j);
    out.write(reinterpret_cast<const char*>(norms.data()),
              static_cast<std::streamsize>(norms.size() * sizeof(double)));

    json header;
    header["L"] = l;
    header["t1_grid"] = dict.t1_grid();
    header["t2_grid"] = dict.t2_grid();
    header["seq_hash"] = dict.sequence_fingerprint();
    header["version"] = kFormatVersion;
    std::filesystem::path side = bin_path;
    side += ".json";
    open_output(side) << header.dump(2) << "\n";
}

struct DictionaryCodec {
    static Dictionary decode(std::size_t l, std::vector<TissueParams> theta, std::vector<double> re,
                             std::vector<double> im, std::vector<double> norms,
                             std::vector<double> t1_grid, std::vector<double> t2_grid,
                             std::uint64_t seq_hash) {
        Dictionary d;
        d.frames_ = l;
        d.theta_ = std::move(theta);
        d.fp_re_ = std::move(re);
        d.fp_im_ = std::move(im);
        d.norms_ = std::move(norms);
        d.t1_grid_ = std::move(t1_grid);
        d.t2_grid_ = std::move(t2_grid);
        d.seq_fingerprint_ = seq_hash;
        return d;
    }
};

Dictionary load_dictionary(const std::filesystem::path& bin_path) {
    std::filesystem::path side = bin_path;
    side += ".json";
    json header = json::parse(open_input(side));
    const std::size_t l = header.at("L").get<std::size_t>();
    const auto t1_grid = header.at("t1_grid").get<std::vector<double>>();
    const auto t2_grid = header.at("t2_grid").get<std::vector<double>>();
    const std::size_t j_count = t1_grid.size() * t2_grid.size();

    std::vector<TissueParams> theta(j_count);
    for (std::size_t j = 0; j < j_count; ++j) {
        theta[j] = TissueParams{t1_grid[j / t2_grid.size()], t2_grid[j % t2_grid.size()]};
    }

    std::vector<double> re(j_count * l), im(j_count * l), norms(j_count);
    std::ifstream in = open_input(bin_path, std::ios::binary);
    std::vector<double> buffer(2 * l);
    for (std::size_t j = 0; j < j_count; ++j) {
        in.read(reinterpret_cast<char*>(buffer.data()),
                static_cast<std::streamsize>(buffer.size() * sizeof(double)));
        for (std::size_t ell = 0; ell < l; ++ell) {
            re[j * l + ell] = buffer[2 * ell];
            im[j * l + ell] = buffer[2 * ell + 1];
        }
    }
    in.read(reinterpret_cast<char*>(norms.data()),
            static_cast<std::streamsize>(norms.size() * sizeof(double)));
    if (!in) throw ConfigError("dictionary binary truncated: " + bin_path.string());

    return DictionaryCodec::decode(l, std::move(theta), std::move(re), std::move(im),
                                   std::move(norms), t1_grid, t2_grid,
                                   header.at("seq_hash").get<std::uint64_t>());
}

void save_solve_report(const std::filesystem::path& csv_path, const SolveReport& report) {
    std::ofstream out = open_output(csv_path);
    out.precision(17);
    out << "iteration,residual,lambda,step_T1,step_T2,step_rho\n";
    for (int n = 0; n < report.iterations; ++n) {
        out << (n + 1) << ',' << report.residuals[n + 1] << ',' << report.lambdas[n] << ','
            << report.step_t1[n] << ',' << report.step_t2[n] << ',' << report.step_rho[n] << "\n";
    }
}

void save_residual_trace(const std::filesystem::path& csv_path,
                         const std::vector<double>& residuals) {
    std::ofstream out = open_output(csv_path);
    out.precision(17);
    out << "iteration,residual\n";
    for (std::size_t i = 0; i < residuals.size(); ++i) out << (i + 1) << ',' << residuals[i] << "\n";
}

void save_chebyshev_table(const std::filesystem::path& csv_path,
                          const std::vector<ChebyshevRow>& table) {
    std::ofstream out = open_output(csv_path);
    out.precision(12);
    out << "L,epsilon,empirical,bound,trace_inv_gram\n";
    for (const ChebyshevRow& row : table) {
        out << row.frames << ',' << row.epsilon << ',' << row.empirical << ',' << row.bound << ','
            << row.trace_inv_gram << "\n";
    }
}

PhantomSpec load_phantom_spec(const std::filesystem::path& json_path) {
    json j = json::parse(open_input(json_path));
    PhantomSpec spec;
    spec.n = j.at("N").get<int>();
    spec.complex_rho = j.value("complex_rho", false);
    if (j.contains("ranges")) {
        const json& r = j["ranges"];
        spec.ranges.t1_lo = r.value("t1_lo", spec.ranges.t1_lo);
        spec.ranges.t1_hi = r.value("t1_hi", spec.ranges.t1_hi);
        spec.ranges.t2_lo = r.value("t2_lo", spec.ranges.t2_lo);
        spec.ranges.t2_hi = r.value("t2_hi", spec.ranges.t2_hi);
        spec.ranges.rho_lo = r.value("rho_lo", spec.ranges.rho_lo);
        spec.ranges.rho_hi = r.value("rho_hi", spec.ranges.rho_hi);
    }
    for (const json& rj : j.at("regions")) {
        TissueRegion r;
        r.cx = rj.value("cx", 0.0);
        r.cy = rj.value("cy", 0.0);
        r.rx = rj.at("rx").get<double>();
        r.ry = rj.at("ry").get<double>();
        r.angle = rj.value("angle", 0.0);
        r.t1 = rj.at("t1").get<double>();
        r.t2 = rj.at("t2").get<double>();
        r.rho = Complex(rj.at("rho").get<double>(), rj.value("rho_im", 0.0));
        spec.regions.push_back(r);
    }
    return spec;
}

void save_phantom_spec(const std::filesystem::path& json_path, const PhantomSpec& spec) {
    json j;
    j["N"] = spec.n;
    j["complex_rho"] = spec.complex_rho;
    j["regions"] = json::array();
    for (const TissueRegion& r : spec.regions) {
        json rj;
        rj["cx"] = r.cx;
        rj["cy"] = r.cy;
        rj["rx"] = r.rx;
        rj["ry"] = r.ry;
        rj["angle"] = r.angle;
        rj["t1"] = r.t1;
        rj["t2"] = r.t2;
        rj["rho"] = r.rho.real();
        if (r.rho.imag() != 0.0) rj["rho_im"] = r.rho.imag();
        j["regions"].push_back(rj);
    }
    open_output(json_path) << j.dump(2) << "\n";
}

SamplingMask mask_from_descriptor(const std::string& json_text) {
    json j = json::parse(json_text);
    return mask_from_json(j.at("mask"), j.at("N").get<int>(), j.at("L").get<int>());
}

}  // namespace qmri
