#include "wgqed/gme.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "wgqed/greens.hpp"

namespace wgqed {
namespace gme {

namespace {

// Enumerate occupation states subject to per-component caps, an optional total
// cap, and per-site single-occupancy groups (Rydberg e/s pairs).
HilbertSpace build_space(const SystemConfig& c, const EmitterBasis& b) {
    HilbertSpace s;
    s.n_comp = b.dim;
    std::vector<int> cap(b.dim);
    int total_cap = 2;
    for (int a = 0; a < b.dim; ++a) cap[a] = b.hardcore[a] ? 1 : 2;
    if (c.model == Model::JaynesCummings) {
        cap[0] = 4;  // cavity cutoff
        total_cap = 5;
    }
    std::vector<std::pair<int, int>> groups;  // single-occupancy component pairs
    if (c.model == Model::RydbergEitArray) {
        const int n = c.n_emitters();
        for (int i = 0; i < n; ++i) groups.emplace_back(i, n + i);
    }

    std::vector<int> occ(b.dim, 0);
    std::function<void(int, int)> recurse = [&](int comp, int used) {
        if (comp == b.dim) {
            s.states.push_back(occ);
            return;
        }
        for (int k = 0; k <= std::min(cap[comp], total_cap - used); ++k) {
            occ[comp] = k;
            bool ok = true;
            for (const auto& [g1, g2] : groups) {
                if (g2 == comp && occ[g1] + occ[g2] > 1) ok = false;
            }
            if (ok) recurse(comp + 1, used + k);
        }
        occ[comp] = 0;
    };
    recurse(0, 0);
    return s;
}

}  // namespace

int HilbertSpace::index(const std::vector<int>& occ) const {
    for (int i = 0; i < dim(); ++i) {
        if (states[i] == occ) return i;
    }
    return -1;
}

Eigen::MatrixXcd HilbertSpace::lowering(int comp) const {
    const int d = dim();
    Eigen::MatrixXcd op = Eigen::MatrixXcd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        if (states[i][comp] == 0) continue;
        std::vector<int> lowered = states[i];
        lowered[comp] -= 1;
        const int j = index(lowered);
        if (j >= 0) op(j, i) = std::sqrt(static_cast<double>(states[i][comp]));
    }
    return op;
}

Generator lindblad_generator(const SystemConfig& c) {
    Generator g;
    g.config = c;
    const EmitterBasis b = emitter_basis(c);
    g.space = build_space(c, b);
    const int d = g.space.dim();
    const int n1 = b.dim;

    std::vector<Eigen::MatrixXcd> lower(n1);
    for (int a = 0; a < n1; ++a) lower[a] = g.space.lowering(a);

    // System Hamiltonian: detunings, static couplings, Rydberg ss interaction.
    g.h_static = Eigen::MatrixXcd::Zero(d, d);
    for (int a = 0; a < n1; ++a) {
        const Eigen::MatrixXcd num = lower[a].adjoint() * lower[a];
        g.h_static += b.diagonal(a).real() * num;
        for (int bb = 0; bb < n1; ++bb) {
            if (b.static_coupling(a, bb) != Complex(0.0, 0.0)) {
                g.h_static += 0.5 * b.static_coupling(a, bb) * (lower[a].adjoint() * lower[bb]) +
                              0.5 * std::conj(b.static_coupling(a, bb)) *
                                  (lower[bb].adjoint() * lower[a]);
            }
        }
    }
    if (c.model == Model::RydbergEitArray) {
        const int n = c.n_emitters();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double u = rydberg_interaction(*c.rydberg, c, i, j);
                if (u == 0.0) continue;
                g.h_static += 0.5 * u * (lower[n + i].adjoint() * lower[n + i]) *
                              (lower[n + j].adjoint() * lower[n + j]);
            }
        }
    }

    // Waveguide-coupled jumps with the collective cos rate matrix and the
    // sin exchange term folded into the Hamiltonian.
    std::vector<int> wg;
    for (int a = 0; a < n1; ++a) {
        if (b.sqrt_gamma(a) > 0.0) wg.push_back(a);
    }
    const int nw = static_cast<int>(wg.size());
    g.jump_wg.resize(nw);
    g.wg_position.resize(nw);
    g.wg_sqrt_rate.resize(nw);
    g.collective_rate.resize(nw, nw);
    for (int i = 0; i < nw; ++i) {
        g.jump_wg[i] = lower[wg[i]];
        g.wg_position[i] = b.positions(wg[i]);
        g.wg_sqrt_rate[i] = b.sqrt_gamma(wg[i]);
    }
    for (int i = 0; i < nw; ++i) {
        for (int j = 0; j < nw; ++j) {
            const double gij = b.sqrt_gamma(wg[i]) * b.sqrt_gamma(wg[j]);
            const double dx = b.positions(wg[i]) - b.positions(wg[j]);
            g.collective_rate(i, j) = 2.0 * gij * std::cos(reduce_phase(c.k0, dx));
            g.h_static += gij * std::sin(reduce_phase(c.k0, std::abs(dx))) *
                          (lower[wg[i]].adjoint() * lower[wg[j]]);
        }
    }

    // Free-space channels: per-component lowering at rate Gamma_f of its site.
    for (int a = 0; a < n1; ++a) {
        double rate = 0.0;
        if (c.model == Model::JaynesCummings) {
            rate = c.gamma_f_at(0);  // both cavity and atom leak
        } else if (c.model == Model::RydbergEitArray) {
            const int n = c.n_emitters();
            if (a < n) rate = c.gamma_f_at(a);  // only e decays to free space
        } else if (c.model == Model::MirrorTwoLevel) {
            if (a == 0) rate = c.gamma_f_at(0);
        } else {
            rate = c.gamma_f_at(a);
        }
        if (rate > 0.0) {
            g.jump_free.push_back(lower[a]);
            g.free_rate.push_back(rate);
        }
    }

    g.anticomm = Eigen::MatrixXcd::Zero(d, d);
    for (int i = 0; i < nw; ++i) {
        for (int j = 0; j < nw; ++j) {
            g.anticomm += g.collective_rate(i, j) * (g.jump_wg[i].adjoint() * g.jump_wg[j]);
        }
    }
    for (std::size_t f = 0; f < g.jump_free.size(); ++f) {
        g.anticomm += 2.0 * g.free_rate[f] * (g.jump_free[f].adjoint() * g.jump_free[f]);
    }
    return g;
}

Eigen::MatrixXcd Generator::apply(const Eigen::MatrixXcd& rho) const {
    const int nw = static_cast<int>(jump_wg.size());
    Eigen::MatrixXcd out = -0.5 * (anticomm * rho + rho * anticomm);
    for (int i = 0; i < nw; ++i) {
        for (int j = 0; j < nw; ++j) {
            if (collective_rate(i, j) == 0.0) continue;
            out += collective_rate(i, j) * (jump_wg[i] * rho * jump_wg[j].adjoint());
        }
    }
    for (std::size_t f = 0; f < jump_free.size(); ++f) {
        out += 2.0 * free_rate[f] * (jump_free[f] * rho * jump_free[f].adjoint());
    }
    return out;
}

namespace {

// Envelopes participate only once their arrival lies at or before
// active_cutoff; freezing the cutoff per integration piece keeps every RK4
// stage on a smooth segment.
Eigen::MatrixXcd drive_raising_gated(const Generator& gen, const Wavepacket& packet, double t,
                                     double active_cutoff) {
    const SystemConfig& c = gen.config;
    const int sigma = sigma_of(packet.direction);
    const double gw = packet.width_rate;
    const Complex envelope =
        (packet.direction == Direction::Right ? -I : I) * std::sqrt(2.0 * gw);
    const int d = gen.space.dim();
    Eigen::MatrixXcd raise = Eigen::MatrixXcd::Zero(d, d);
    for (std::size_t j = 0; j < gen.jump_wg.size(); ++j) {
        const double arr = std::max(sigma * (gen.wg_position[j] - packet.center), 0.0);
        if (arr > active_cutoff + 1e-12) continue;
        const double tau = t - arr;
        if (tau < 0.0) continue;
        const Complex w = gen.wg_sqrt_rate[j] *
                          std::exp(I * static_cast<double>(sigma) *
                                   reduce_phase(c.k0, gen.wg_position[j])) *
                          envelope * std::exp(-gw * tau);
        raise += w * gen.jump_wg[j].adjoint();
    }
    return raise;
}

}  // namespace

Eigen::MatrixXcd drive_raising(const Generator& gen, const Wavepacket& packet, double t) {
    return drive_raising_gated(gen, packet, t, t);
}

Eigen::MatrixXcd driven_hamiltonian(const SystemConfig& c, const Wavepacket& packet, double t) {
    const Generator gen = lindblad_generator(c);
    const Eigen::MatrixXcd raise = drive_raising(gen, packet, t);
    return gen.h_static + raise + raise.adjoint();
}

namespace {

struct Stack {
    int mmax{1};
    std::vector<Eigen::MatrixXcd> comp;  // indexed (m * (mmax+1) + n)

    int at(int m, int n) const { return m * (mmax + 1) + n; }
};

Stack zero_stack(int mmax, int dim) {
    Stack s;
    s.mmax = mmax;
    s.comp.assign((mmax + 1) * (mmax + 1), Eigen::MatrixXcd::Zero(dim, dim));
    return s;
}

void rhs(const Generator& gen, const Eigen::MatrixXcd& raise, const Stack& state, Stack& out) {
    const int mmax = state.mmax;
    const Eigen::MatrixXcd lower_drive = raise.adjoint();
    for (int m = 0; m <= mmax; ++m) {
        for (int n = 0; n <= mmax; ++n) {
            const Eigen::MatrixXcd& rho = state.comp[state.at(m, n)];
            Eigen::MatrixXcd d = -I * (gen.h_static * rho - rho * gen.h_static);
            d += gen.apply(rho);
            if (m > 0) {
                const Eigen::MatrixXcd& lo = state.comp[state.at(m - 1, n)];
                d += -I * (raise * lo - lo * raise);
            }
            if (n > 0) {
                const Eigen::MatrixXcd& lo = state.comp[state.at(m, n - 1)];
                d += -I * (lower_drive * lo - lo * lower_drive);
            }
            out.comp[out.at(m, n)] = std::move(d);
        }
    }
}

std::vector<HierarchySnapshot> run_fixed(const Generator& gen, const Wavepacket& packet,
                                         int mmax, double t_end, double dt,
                                         const std::vector<double>& record_times) {
    const int dim = gen.space.dim();
    Stack state = zero_stack(mmax, dim);
    // rho^(0,0) starts in the emitter ground state (first enumerated state is
    // the vacuum occupation).
    std::vector<int> vac(gen.space.n_comp, 0);
    const int gidx = gen.space.index(vac);
    state.comp[state.at(0, 0)](gidx, gidx) = 1.0;

    // Piece boundaries: envelope arrivals (smoothness) and record times (exact
    // snapshot instants).
    std::vector<double> breaks{0.0, t_end};
    const int sigma = sigma_of(packet.direction);
    for (std::size_t j = 0; j < gen.jump_wg.size(); ++j) {
        const double arr = sigma * (gen.wg_position[j] - packet.center);
        if (arr > 0.0 && arr < t_end) breaks.push_back(arr);
    }
    for (double r : record_times) {
        if (r > 0.0 && r < t_end) breaks.push_back(r);
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 breaks.end());

    std::vector<HierarchySnapshot> snaps;
    std::size_t next_record = 0;
    auto record = [&](double t) {
        while (next_record < record_times.size() &&
               record_times[next_record] <= t + 1e-12) {
            HierarchySnapshot snap;
            snap.t = record_times[next_record];
            for (int m = 0; m <= mmax; ++m) {
                for (int n = 0; n <= mmax; ++n) {
                    snap.comp[{m, n}] = state.comp[state.at(m, n)];
                }
            }
            snaps.push_back(std::move(snap));
            ++next_record;
        }
    };
    record(0.0);

    Stack k1 = zero_stack(mmax, dim), k2 = k1, k3 = k1, k4 = k1, tmp = k1;
    for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
        const double a = breaks[seg];
        const double b = breaks[seg + 1];
        const long steps = std::max(1L, static_cast<long>(std::ceil((b - a) / dt - 1e-12)));
        const double h = (b - a) / steps;
        double t = a;
        for (long s = 0; s < steps; ++s) {
            const Eigen::MatrixXcd r1 = drive_raising_gated(gen, packet, t, a);
            const Eigen::MatrixXcd r2 = drive_raising_gated(gen, packet, t + 0.5 * h, a);
            const Eigen::MatrixXcd r3 = drive_raising_gated(gen, packet, t + h, a);
            rhs(gen, r1, state, k1);
            for (std::size_t i = 0; i < state.comp.size(); ++i) {
                tmp.comp[i] = state.comp[i] + 0.5 * h * k1.comp[i];
            }
            rhs(gen, r2, tmp, k2);
            for (std::size_t i = 0; i < state.comp.size(); ++i) {
                tmp.comp[i] = state.comp[i] + 0.5 * h * k2.comp[i];
            }
            rhs(gen, r2, tmp, k3);
            for (std::size_t i = 0; i < state.comp.size(); ++i) {
                tmp.comp[i] = state.comp[i] + h * k3.comp[i];
            }
            rhs(gen, r3, tmp, k4);
            for (std::size_t i = 0; i < state.comp.size(); ++i) {
                state.comp[i] +=
                    h / 6.0 * (k1.comp[i] + 2.0 * k2.comp[i] + 2.0 * k3.comp[i] + k4.comp[i]);
            }
            t += h;
        }
        record(b);
    }
    return snaps;
}

}  // namespace

HierarchyResult evolve_hierarchy(const SystemConfig& c, const Wavepacket& packet, int order,
                                 double t_end, double dt,
                                 const std::vector<double>& record_times) {
    if (order != 2 && order != 4) {
        throw Error(Errc::InsufficientOrder, "hierarchy order must be 2 or 4");
    }
    const Generator gen = lindblad_generator(c);
    double rate = packet.width_rate;
    for (int i = 0; i < c.n_emitters(); ++i) {
        rate = std::max(rate, c.gamma_at(i) + c.gamma_f_at(i));
    }
    if (c.rydberg) rate = std::max(rate, c.rydberg->omega);
    if (dt > 0.01 / rate + 1e-15) {
        throw Error(Errc::StepTooLarge, "dt exceeds 0.01/max rate");
    }
    const int mmax = order / 2;

    std::vector<double> want = record_times;
    if (want.empty() || std::abs(want.back() - t_end) > 1e-12) want.push_back(t_end);
    HierarchyResult result;
    result.snapshots = run_fixed(gen, packet, mmax, t_end, dt, want);
    const auto fine = run_fixed(gen, packet, mmax, t_end, 0.5 * dt, {t_end});

    const HierarchySnapshot& last = result.snapshots.back();
    double err = 0.0;
    for (const auto& [key, mat] : last.comp) {
        err = std::max(err, (mat - fine.back().comp.at(key)).cwiseAbs().maxCoeff());
    }
    result.halving_error = err;
    if (err > 1e-4) {
        throw Error(Errc::StepTooLarge, "step-halving estimate exceeds 1e-4");
    }
    return result;
}

Eigen::MatrixXcd reduced_density(const HierarchySnapshot& snap, int photons) {
    auto get = [&](int m, int n) -> const Eigen::MatrixXcd& {
        const auto it = snap.comp.find({m, n});
        if (it == snap.comp.end()) {
            throw Error(Errc::InsufficientOrder, "hierarchy lacks the required component");
        }
        return it->second;
    };
    if (photons == 0) return get(0, 0);
    if (photons == 1) return get(0, 0) + get(1, 1);
    if (photons == 2) return get(0, 0) + 2.0 * get(1, 1) + 2.0 * get(2, 2);
    throw Error(Errc::InsufficientOrder, "photon number must be 0, 1, or 2");
}

}  // namespace gme
}  // namespace wgqed
