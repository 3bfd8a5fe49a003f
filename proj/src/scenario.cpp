#include "wgqed/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "wgqed/gme.hpp"
#include "wgqed/greens.hpp"
#include "wgqed/single_photon.hpp"
#include "wgqed/transient.hpp"
#include "wgqed/two_photon.hpp"

namespace wgqed {

using nlohmann::json;

const char* task_name(Task t) {
    switch (t) {
    case Task::Spectrum: return "spectrum";
    case Task::G2: return "g2";
    case Task::TransientSpontaneous: return "transient_spontaneous";
    case Task::TransientAbsorption: return "transient_absorption";
    case Task::StimulatedOptimum: return "stimulated_optimum";
    case Task::ArrayRetardation: return "array_retardation";
    case Task::MirrorEntanglement: return "mirror_entanglement";
    case Task::PolaritonSingle: return "polariton_single";
    case Task::PolaritonPair: return "polariton_pair";
    case Task::GmeEvolve: return "gme_evolve";
    }
    return "unknown";
}

Task task_from_name(const std::string& name) {
    for (int i = 0; i <= static_cast<int>(Task::GmeEvolve); ++i) {
        if (name == task_name(static_cast<Task>(i))) return static_cast<Task>(i);
    }
    throw Error(Errc::InvalidConfig, "unknown task '" + name + "'");
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

namespace {

Grid grid_from_json(const json& j) {
    Grid g;
    if (j.contains("points")) {
        g.points = j["points"].get<std::vector<double>>();
    } else {
        const double lo = j.at("min").get<double>();
        const double hi = j.at("max").get<double>();
        const int n = j.at("n").get<int>();
        if (n < 1) throw Error(Errc::NonMonotoneGrid, "grid needs n >= 1");
        g.points.resize(n);
        for (int i = 0; i < n; ++i) {
            g.points[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
        }
    }
    for (std::size_t i = 1; i < g.points.size(); ++i) {
        if (!(g.points[i] > g.points[i - 1])) {
            throw Error(Errc::NonMonotoneGrid, "grid points must be strictly increasing");
        }
    }
    return g;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Column table serialized as CSV (complex values pre-split by the caller) or as
// a JSON array of row objects.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void add_row(std::initializer_list<double> vals) { rows.emplace_back(vals); }
    void add_row(const std::vector<double>& vals) { rows.push_back(vals); }
};

void write_atomic(const std::string& path, const std::string& body) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(Errc::IoError, "cannot open " + tmp.string());
        out << body;
        if (!out) throw Error(Errc::IoError, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw Error(Errc::IoError, "rename failed for " + target.string());
}

void write_table(const Table& t, const std::string& path, const std::string& format) {
    std::ostringstream out;
    if (format == "csv") {
        for (std::size_t i = 0; i < t.header.size(); ++i) {
            out << (i ? "," : "") << t.header[i];
        }
        out << "\n";
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                out << (i ? "," : "") << fmt(row[i]);
            }
            out << "\n";
        }
    } else if (format == "json") {
        json arr = json::array();
        for (const auto& row : t.rows) {
            json obj;
            for (std::size_t i = 0; i < row.size(); ++i) obj[t.header[i]] = row[i];
            arr.push_back(obj);
        }
        out << arr.dump(1) << "\n";
    } else {
        throw Error(Errc::InvalidConfig, "format must be csv or json");
    }
    write_atomic(path, out.str());
}

json options_of(const Scenario& s) { return json::parse(s.options_json); }

Wavepacket packet_from_options(const json& o, const char* key) {
    if (!o.contains(key)) throw Error(Errc::InvalidConfig, std::string(key) + " missing");
    return wavepacket_from_json(o[key].dump());
}

HMode mode_from_string(const std::string& s) {
    if (s == "exact") return HMode::Exact;
    if (s == "markov") return HMode::Markov;
    throw Error(Errc::InvalidConfig, "mode must be exact|markov|both");
}

// ------------------------------- tasks ------------------------------------

RunSummary task_spectrum(const Scenario& s, const std::string& out_path, unsigned threads) {
    const json o = options_of(s);
    const std::string mode = o.value("mode", "both");
    const bool exact = mode == "exact" || mode == "both";
    const bool markov = mode == "markov" || mode == "both";
    const auto& ks = s.k_grid.points;
    Table t;
    t.header = {"k"};
    if (exact) {
        t.header.insert(t.header.end(),
                        {"r_re", "r_im", "t_re", "t_im", "refl", "trans", "flux"});
    }
    if (markov) {
        t.header.insert(t.header.end(), {"r_markov_re", "r_markov_im", "t_markov_re",
                                         "t_markov_im", "refl_markov", "trans_markov",
                                         "flux_markov"});
    }
    std::vector<std::vector<double>> rows(ks.size());
    parallel_for(ks.size(), threads, [&](std::size_t i) {
        std::vector<double> row{ks[i]};
        auto push = [&](const RTPoint& p) {
            row.insert(row.end(), {p.r.real(), p.r.imag(), p.t.real(), p.t.imag(),
                                   std::norm(p.r), std::norm(p.t), p.flux()});
        };
        if (exact) push(rt_point(s.system, ks[i], HMode::Exact));
        if (markov) push(rt_point(s.system, ks[i], HMode::Markov));
        rows[i] = std::move(row);
    });
    for (auto& r : rows) t.add_row(r);
    write_table(t, out_path, s.format);

    RunSummary sum;
    sum.headline_name = "trans_mid";
    std::size_t mid = 0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (std::abs(ks[i]) < std::abs(ks[mid])) mid = i;
    }
    const RTPoint p = rt_point(s.system, ks[mid], exact ? HMode::Exact : HMode::Markov);
    sum.headline = std::norm(p.t);
    return sum;
}

PairWavefunction psi_for(const SystemConfig& c, double k1, double k2, HMode mode, Complex eta) {
    switch (c.model) {
    case Model::TwoLevel: return psi2_two_level(k1, k2, c.gamma_at(0));
    case Model::JaynesCummings: return psi2_jc(k1, k2, c.jc->g, c.gamma_at(0));
    case Model::TwoLevelArray: return psi2_array(c, k1, k2, mode, eta);
    case Model::RydbergEitArray: return psi2_rydberg(c, k1, k2, eta);
    case Model::MirrorTwoLevel: {
        // coordinate wavefunction via the kernel Fourier path
        throw Error(Errc::InvalidConfig, "g2 task does not cover the mirror model");
    }
    }
    throw Error(Errc::InvalidConfig, "unknown model");
}

Complex g2_normalization(const SystemConfig& c, double k1, double k2, HMode mode,
                         PairChannel channel) {
    const RTPoint p1 = rt_point(c, k1, mode);
    const RTPoint p2 = rt_point(c, k2, mode);
    return channel == PairChannel::ReflectedPair ? p1.r * p2.r : p1.t * p2.t;
}

RunSummary task_g2(const Scenario& s, const std::string& out_path, unsigned threads) {
    const json o = options_of(s);
    const SystemConfig& c = s.system;
    const Complex eta(0.0, o.value("eta", 0.0));
    const std::string mode_s = o.value("mode", c.model == Model::TwoLevelArray ? "both" : "markov");
    const bool exact = mode_s == "exact" || mode_s == "both";
    const bool markov = mode_s == "markov" || mode_s == "both";
    const PairChannel channel = c.model == Model::RydbergEitArray
                                    ? PairChannel::TransmittedPair
                                    : PairChannel::ReflectedPair;
    const std::string scan = o.value("scan", "x");

    RunSummary sum;
    Table t;
    if (scan == "x") {
        const double k1 = o.value("k1", 0.5 * o.value("E", 0.0));
        const double k2 = o.value("k2", 0.5 * o.value("E", 0.0));
        t.header = {"x"};
        std::vector<std::vector<double>> cols;
        if (exact && (c.model == Model::TwoLevelArray || c.model == Model::TwoLevel)) {
            const PairWavefunction psi = psi2_array(c, k1, k2, HMode::Exact, eta);
            const Complex norm = g2_normalization(c, k1, k2, HMode::Exact, channel);
            cols.push_back(g2(psi, norm, s.x_grid.points));
            t.header.push_back("g2");
        } else if (exact) {
            const PairWavefunction psi = psi_for(c, k1, k2, HMode::Exact, eta);
            const Complex norm = g2_normalization(c, k1, k2, HMode::Exact, channel);
            cols.push_back(g2(psi, norm, s.x_grid.points));
            t.header.push_back("g2");
        }
        if (markov) {
            const PairWavefunction psi = psi_for(c, k1, k2, HMode::Markov, eta);
            const Complex norm = g2_normalization(c, k1, k2, HMode::Markov, channel);
            cols.push_back(g2(psi, norm, s.x_grid.points));
            t.header.push_back(exact ? "g2_markov" : "g2");
        }
        for (std::size_t i = 0; i < s.x_grid.points.size(); ++i) {
            std::vector<double> row{s.x_grid.points[i]};
            for (const auto& col : cols) row.push_back(col[i]);
            t.add_row(row);
        }
        std::size_t mid = 0;
        for (std::size_t i = 0; i < s.x_grid.points.size(); ++i) {
            if (std::abs(s.x_grid.points[i]) < std::abs(s.x_grid.points[mid])) mid = i;
        }
        sum.headline_name = "g2_0";
        sum.headline = cols.front()[mid];
    } else if (scan == "total_momentum") {
        t.header = {"E"};
        if (exact) t.header.push_back("g2_0");
        if (markov) t.header.push_back(exact ? "g2_0_markov" : "g2_0");
        const auto& es = s.k_grid.points;
        std::vector<std::vector<double>> rows(es.size());
        parallel_for(es.size(), threads, [&](std::size_t i) {
            const double half = 0.5 * es[i];
            std::vector<double> row{es[i]};
            const std::vector<double> origin{0.0};
            if (exact) {
                const PairWavefunction psi = psi_for(c, half, half, HMode::Exact, eta);
                row.push_back(
                    g2(psi, g2_normalization(c, half, half, HMode::Exact, channel), origin)[0]);
            }
            if (markov) {
                const PairWavefunction psi = psi_for(c, half, half, HMode::Markov, eta);
                row.push_back(
                    g2(psi, g2_normalization(c, half, half, HMode::Markov, channel), origin)[0]);
            }
            rows[i] = std::move(row);
        });
        for (auto& r : rows) t.add_row(r);
        sum.headline_name = "g2_0_last";
        sum.headline = t.rows.back()[1];
    } else {
        throw Error(Errc::InvalidConfig, "g2 scan must be x|total_momentum");
    }

    if (o.value("tmatrix_elements", false)) {
        const double e_probe = o.value("tmatrix_E", 1.0);
        const auto add_t = [&](HMode m, const char* tag) {
            const PairBasisOperator top = tmatrix(c, Complex(e_probe, 0.0) + eta, m);
            sum.extras.push_back({std::string("t11_abs_") + tag, std::abs(top.matrix(0, 0))});
            if (top.matrix.rows() > 1) {
                sum.extras.push_back({std::string("t12_abs_") + tag,
                                      std::abs(top.matrix(0, 1))});
            }
        };
        add_t(HMode::Exact, "exact");
        add_t(HMode::Markov, "markov");
    }
    write_table(t, out_path, s.format);
    return sum;
}

RunSummary task_spontaneous(const Scenario& s, const std::string& out_path, unsigned) {
    const json o = options_of(s);
    const double t_end = o.value("T", 10.0);
    const double gamma = s.system.gamma_at(0);
    Table t;
    t.header = {"x", "psi_re", "psi_im", "density"};
    for (double x : s.x_grid.points) {
        const Complex v = spontaneous_field(gamma, x, t_end, Direction::Right);
        t.add_row({x, v.real(), v.imag(), std::norm(v)});
    }
    write_table(t, out_path, s.format);
    RunSummary sum;
    sum.headline_name = "emitted_norm";
    sum.headline = 1.0 - std::exp(-2.0 * gamma * t_end);
    return sum;
}

RunSummary task_absorption(const Scenario& s, const std::string& out_path, unsigned) {
    const json o = options_of(s);
    const Wavepacket wp = packet_from_options(o, "wavepacket");
    const double gamma = s.system.gamma_at(0);
    Table t;
    t.header = {"t", "a_re", "a_im", "prob"};
    double peak = 0.0;
    for (double tt : s.t_grid.points) {
        const Complex a = absorption_amplitude(gamma, wp.width_rate, wp.center, tt);
        peak = std::max(peak, std::norm(a));
        t.add_row({tt, a.real(), a.imag(), std::norm(a)});
    }
    write_table(t, out_path, s.format);
    RunSummary sum;
    sum.headline_name = "peak_excitation";
    sum.headline = peak;
    return sum;
}

RunSummary task_stimulated(const Scenario& s, const std::string& out_path, unsigned) {
    const json o = options_of(s);
    const StimulatedOptimum opt = stimulated_optimum(
        s.system.gamma_at(0), o.value("box", 12.0), o.value("n_coarse", 1201));
    Table t;
    t.header = {"x", "f_opt", "f_analytic"};
    const double gamma = s.system.gamma_at(0);
    for (std::size_t i = 0; i < opt.x.size(); ++i) {
        t.add_row({opt.x[i], opt.f[i],
                   2.0 * std::sqrt(gamma) * std::exp(2.0 * gamma * opt.x[i])});
    }
    write_table(t, out_path, s.format);
    RunSummary sum;
    sum.headline_name = "lambda_max";
    sum.headline = opt.lambda_max;
    sum.extras.push_back({"lambda_coarse", opt.lambda_coarse});
    sum.extras.push_back({"lambda_fine", opt.lambda_fine});
    sum.extras.push_back({"l2_distance", opt.l2_distance_analytic});
    return sum;
}

RunSummary task_retardation(const Scenario& s, const std::string& out_path, unsigned threads) {
    const json o = options_of(s);
    const std::string kind = o.value("output_kind", "excitation");
    const SystemConfig& c = s.system;
    const int n = c.n_emitters();
    Table t;
    RunSummary sum;
    if (kind == "excitation") {
        t.header = {"t"};
        for (int j = 0; j < n; ++j) {
            const std::string tag = std::to_string(j + 1);
            t.header.insert(t.header.end(),
                            {"a" + tag + "_re", "a" + tag + "_im", "p" + tag,
                             "p" + tag + "_markov"});
        }
        std::vector<std::vector<double>> rows(s.t_grid.points.size());
        parallel_for(s.t_grid.points.size(), threads, [&](std::size_t i) {
            const double tt = s.t_grid.points[i];
            std::vector<double> row{tt};
            for (int j = 0; j < n; ++j) {
                const Complex a = excitation_amplitude(c, j, tt, HMode::Exact);
                const Complex am = excitation_amplitude(c, j, tt, HMode::Markov);
                row.insert(row.end(), {a.real(), a.imag(), std::norm(a), std::norm(am)});
            }
            rows[i] = std::move(row);
        });
        for (auto& r : rows) t.add_row(r);
        double pe = 0.0;
        {
            const double t_last = s.t_grid.points.back();
            const Complex a1 = excitation_amplitude(c, 0, t_last, HMode::Exact);
            const Complex a2 = excitation_amplitude(c, n > 1 ? 1 : 0, t_last, HMode::Exact);
            pe = 0.5 * std::norm(a1 - a2);
        }
        sum.headline_name = "steady_entangled_prob";
        sum.headline = pe;
    } else if (kind == "field") {
        const std::vector<double> times = o.at("times").get<std::vector<double>>();
        t.header = {"t", "x", "ar_re", "ar_im", "ar2", "al_re", "al_im", "al2"};
        for (double tt : times) {
            for (double x : s.x_grid.points) {
                const Complex ar = field_amplitude(c, x, tt, Direction::Right, HMode::Exact);
                const Complex al = field_amplitude(c, x, tt, Direction::Left, HMode::Exact);
                t.add_row({tt, x, ar.real(), ar.imag(), std::norm(ar), al.real(), al.imag(),
                           std::norm(al)});
            }
        }
        sum.headline_name = "final_field_peak";
        double peak = 0.0;
        for (const auto& r : t.rows) peak = std::max(peak, r[4] + r[7]);
        sum.headline = peak;
    } else {
        throw Error(Errc::InvalidConfig, "output_kind must be excitation|field");
    }
    write_table(t, out_path, s.format);
    return sum;
}

RunSummary task_mirror_entanglement(const Scenario& s, const std::string& out_path, unsigned) {
    const json o = options_of(s);
    const Wavepacket wp = packet_from_options(o, "wavepacket");
    const auto& ps = s.k_grid.points;
    Eigen::VectorXd grid(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) grid(i) = ps[i];
    const double dp = ps.size() > 1 ? ps[1] - ps[0] : 1.0;
    Eigen::MatrixXcd psi = entangled_pair(s.system, wp, grid);
    const double raw_norm = fold_and_normalize(psi, dp);
    const double entropy = von_neumann_entropy(psi);

    Eigen::BDCSVD<Eigen::MatrixXcd> svd(psi);
    Table t;
    t.header = {"index", "schmidt_lambda"};
    for (int i = 0; i < svd.singularValues().size(); ++i) {
        t.add_row({static_cast<double>(i), svd.singularValues()(i)});
    }
    write_table(t, out_path, s.format);
    RunSummary sum;
    sum.headline_name = "von_neumann_entropy";
    sum.headline = entropy;
    sum.extras.push_back({"raw_norm", raw_norm});
    return sum;
}

RunSummary task_polariton_single(const Scenario& s, const std::string& out_path,
                                 unsigned threads) {
    const json o = options_of(s);
    const Wavepacket wp = packet_from_options(o, "wavepacket");
    const SystemConfig& c = s.system;
    const int n = c.n_emitters();
    Table t;
    t.header = {"t", "site", "p_e", "p_s"};
    double max_stored = 0.0;
    std::vector<Eigen::VectorXcd> amps(s.t_grid.points.size());
    parallel_for(s.t_grid.points.size(), threads, [&](std::size_t i) {
        amps[i] = wavepacket_excitation(c, wp, s.t_grid.points[i]);
    });
    for (std::size_t i = 0; i < s.t_grid.points.size(); ++i) {
        double stored = 0.0;
        for (int site = 0; site < n; ++site) {
            const double pe = std::norm(amps[i](site));
            const double psr =
                c.model == Model::RydbergEitArray ? std::norm(amps[i](n + site)) : 0.0;
            stored += pe + psr;
            t.add_row({s.t_grid.points[i], static_cast<double>(site + 1), pe, psr});
        }
        max_stored = std::max(max_stored, stored);
    }
    write_table(t, out_path, s.format);
    RunSummary sum;
    sum.headline_name = "peak_stored";
    sum.headline = max_stored;
    return sum;
}

RunSummary task_polariton_pair(const Scenario& s, const std::string& out_path, unsigned) {
    const json o = options_of(s);
    const Wavepacket wp1 = packet_from_options(o, "wavepacket");
    const Wavepacket wp2 = o.contains("wavepacket2") ? packet_from_options(o, "wavepacket2")
                                                     : wp1;
    const std::string geom_s = o.value("geometry", "co");
    const PairGeometry geom = geom_s == "counter" ? PairGeometry::Counter : PairGeometry::Co;
    PairEvaluator ev = PairEvaluator::Auto;
    const std::string ev_s = o.value("evaluator", "auto");
    if (ev_s == "spectral") ev = PairEvaluator::Spectral;
    if (ev_s == "propagator") ev = PairEvaluator::Propagator;
    const std::vector<double> times = o.at("times").get<std::vector<double>>();
    const SystemConfig& c = s.system;
    const int n = c.n_emitters();
    const double in_norm2 = geom == PairGeometry::Co ? 0.5 : 1.0;

    Table t;
    t.header = {"t", "i1", "i2", "p_ss"};
    double total_last = 0.0;
    const std::vector<Eigen::MatrixXcd> maps =
        polariton_pair_maps(c, wp1, wp2, geom, times, ev);
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const Eigen::MatrixXcd& pair = maps[ti];
        total_last = 0.0;
        for (int i1 = 0; i1 < n; ++i1) {
            for (int i2 = i1 + 1; i2 < n; ++i2) {
                const int a = c.model == Model::RydbergEitArray ? n + i1 : i1;
                const int b = c.model == Model::RydbergEitArray ? n + i2 : i2;
                const double p = in_norm2 * std::norm(pair(a, b));
                total_last += p;
                t.add_row({times[ti], static_cast<double>(i1 + 1),
                           static_cast<double>(i2 + 1), p});
            }
        }
    }
    write_table(t, out_path, s.format);
    RunSummary sum;
    sum.headline_name = "final_pair_population";
    sum.headline = total_last;
    return sum;
}

RunSummary task_gme(const Scenario& s, const std::string& out_path, unsigned) {
    const json o = options_of(s);
    const Wavepacket wp = packet_from_options(o, "wavepacket");
    const int photons = o.value("photons", 1);
    const int order = o.value("order", photons * 2);
    const double dt = o.at("dt").get<double>();
    const double t_end = s.t_grid.points.back();
    const gme::HierarchyResult res =
        gme::evolve_hierarchy(s.system, wp, order, t_end, dt, s.t_grid.points);

    const int dim = static_cast<int>(res.snapshots.front().comp.begin()->second.rows());
    Table t;
    t.header = {"t", "component_m", "component_n"};
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            t.header.push_back("r" + std::to_string(i) + "c" + std::to_string(j) + "_re");
            t.header.push_back("r" + std::to_string(i) + "c" + std::to_string(j) + "_im");
        }
    }
    double peak_excited = 0.0;
    for (const auto& snap : res.snapshots) {
        for (const auto& [key, mat] : snap.comp) {
            std::vector<double> row{snap.t, static_cast<double>(key.first),
                                    static_cast<double>(key.second)};
            for (int i = 0; i < dim; ++i) {
                for (int j = 0; j < dim; ++j) {
                    row.push_back(mat(i, j).real());
                    row.push_back(mat(i, j).imag());
                }
            }
            t.add_row(row);
        }
        const Eigen::MatrixXcd rho = gme::reduced_density(snap, photons);
        // vacuum state is the first enumerated occupation
        peak_excited = std::max(peak_excited, 1.0 - rho(0, 0).real());
        std::vector<double> row{snap.t, -1.0, -1.0};
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                row.push_back(rho(i, j).real());
                row.push_back(rho(i, j).imag());
            }
        }
        t.add_row(row);
    }
    write_table(t, out_path, s.format);
    RunSummary sum;
    sum.headline_name = "peak_excited_population";
    sum.headline = peak_excited;
    sum.extras.push_back({"halving_error", res.halving_error});
    return sum;
}

}  // namespace

Scenario scenario_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("scenario parse failed: ") + e.what());
    }
    Scenario s;
    s.raw_json = json::parse(text).dump();  // canonical ordering for hashing
    try {
        s.name = j.at("name").get<std::string>();
        s.system = config_from_json(j.at("system").dump());
        s.task = task_from_name(j.at("task").get<std::string>());
        if (j.contains("grids")) {
            const json& g = j["grids"];
            if (g.contains("k")) s.k_grid = grid_from_json(g["k"]);
            if (g.contains("x")) s.x_grid = grid_from_json(g["x"]);
            if (g.contains("t")) s.t_grid = grid_from_json(g["t"]);
        }
        if (j.contains("output")) {
            s.output_path = j["output"].value("path", s.name + ".csv");
            s.format = j["output"].value("format", "csv");
        } else {
            s.output_path = s.name + ".csv";
        }
        if (s.format != "csv" && s.format != "json") {
            throw Error(Errc::InvalidConfig, "output format must be csv or json");
        }
        s.options_json = j.value("options", json::object()).dump();
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("scenario field error: ") + e.what());
    }
    return s;
}

Scenario scenario_from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot read " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return scenario_from_json(text.str());
}

RunSummary run(const Scenario& s, const std::string& output_dir, unsigned threads) {
    const auto start = std::chrono::steady_clock::now();
    namespace fs = std::filesystem;
    const std::string out_path = (fs::path(output_dir) / s.output_path).string();

    RunSummary sum;
    switch (s.task) {
    case Task::Spectrum: sum = task_spectrum(s, out_path, threads); break;
    case Task::G2: sum = task_g2(s, out_path, threads); break;
    case Task::TransientSpontaneous: sum = task_spontaneous(s, out_path, threads); break;
    case Task::TransientAbsorption: sum = task_absorption(s, out_path, threads); break;
    case Task::StimulatedOptimum: sum = task_stimulated(s, out_path, threads); break;
    case Task::ArrayRetardation: sum = task_retardation(s, out_path, threads); break;
    case Task::MirrorEntanglement: sum = task_mirror_entanglement(s, out_path, threads); break;
    case Task::PolaritonSingle: sum = task_polariton_single(s, out_path, threads); break;
    case Task::PolaritonPair: sum = task_polariton_pair(s, out_path, threads); break;
    case Task::GmeEvolve: sum = task_gme(s, out_path, threads); break;
    }
    sum.name = s.name;
    sum.config_hash = fnv1a_hex(s.raw_json);
    sum.outputs.push_back(out_path);
    sum.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sum;
}

namespace {

void set_json_path(json& doc, const std::string& path, double value) {
    json* node = &doc;
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (!node->is_object() || !node->contains(key)) {
            throw Error(Errc::UnknownParameterPath, "no field '" + path + "'");
        }
        if (dot == std::string::npos) {
            if (!(*node)[key].is_number()) {
                throw Error(Errc::UnknownParameterPath, "'" + path + "' is not a scalar");
            }
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        pos = dot + 1;
    }
}

std::string value_tag(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    std::string tag(buf);
    for (char& ch : tag) {
        if (ch == '.' || ch == '+') ch = 'p';
        if (ch == '-') ch = 'm';
    }
    return tag;
}

}  // namespace

std::vector<RunSummary> sweep(const Scenario& base, const std::string& param_path,
                              const std::vector<double>& values, const std::string& output_dir,
                              unsigned threads) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());

    std::vector<RunSummary> summaries(sorted.size());
    parallel_for(sorted.size(), threads, [&](std::size_t i) {
        json doc = json::parse(base.raw_json);
        set_json_path(doc, param_path, sorted[i]);
        doc["name"] = base.name + "_" + value_tag(sorted[i]);
        if (doc.contains("output") && doc["output"].contains("path")) {
            const std::string p = doc["output"]["path"].get<std::string>();
            const std::size_t dot = p.rfind('.');
            doc["output"]["path"] = dot == std::string::npos
                                        ? p + "_" + value_tag(sorted[i])
                                        : p.substr(0, dot) + "_" + value_tag(sorted[i]) +
                                              p.substr(dot);
        }
        Scenario s = scenario_from_json(doc.dump());
        summaries[i] = run(s, output_dir, 1);
    });

    Table index;
    index.header = {"value", "headline"};
    if (!summaries.empty()) {
        for (const auto& e : summaries.front().extras) index.header.push_back(e.name);
    }
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        std::vector<double> row{sorted[i], summaries[i].headline};
        for (const auto& e : summaries[i].extras) row.push_back(e.value);
        index.add_row(row);
    }
    namespace fs = std::filesystem;
    const std::string index_path =
        (fs::path(output_dir) / (base.name + "_index.csv")).string();
    write_table(index, index_path, "csv");
    return summaries;
}

}  // namespace wgqed
