#include "wgqed/transient.hpp"

#include <algorithm>
#include <cmath>

#include "wgqed/quadrature.hpp"

namespace wgqed {

Complex spontaneous_momentum(double gamma, double p, double t, Direction dir) {
    const double sp = sigma_of(dir) * p;
    return std::sqrt(gamma / two_pi) *
           (std::exp(-I * sp * t) - std::exp(Complex(-gamma * t, 0.0))) / Complex(sp, gamma);
}

Complex spontaneous_field(double gamma, double x, double t, Direction dir) {
    const double sx = sigma_of(dir) * x;
    if (sx < 0.0 || sx > t) return Complex(0.0, 0.0);
    return -I * std::sqrt(gamma) * std::exp(-gamma * (t - sx));
}

Complex absorption_amplitude(double gamma, double gamma_wp, double x0, double t) {
    const double tau = x0 + t;
    if (tau < 0.0) return Complex(0.0, 0.0);
    const double pref = std::sqrt(2.0 * gamma_wp * gamma);
    const double dg = gamma - gamma_wp;
    if (std::abs(dg * tau) < 1e-12) {
        return Complex(-pref * tau * std::exp(-gamma * tau), 0.0);
    }
    // e^{-G tau} - e^{-g tau} = -e^{-G tau} expm1((G - g) tau)
    return Complex(-pref * std::exp(-gamma * tau) * std::expm1(dg * tau) / dg, 0.0);
}

double stimulated_kernel(double gamma, double x, double y) {
    if (x > 0.0 || y > 0.0) return 0.0;
    return 0.25 * gamma *
           (3.0 * std::exp(gamma * (x + y)) - std::exp(-gamma * std::abs(x - y)));
}

namespace {

struct NystromResult {
    double lambda;
    Eigen::VectorXd f;  // eigenfunction with trapezoid weights removed
    Eigen::VectorXd x;
};

NystromResult nystrom_largest(double gamma, double box, int n) {
    const double l = box / gamma;
    const double h = l / (n - 1);
    Eigen::VectorXd x(n), w(n);
    for (int i = 0; i < n; ++i) {
        x(i) = -l + i * h;
        w(i) = (i == 0 || i == n - 1) ? 0.5 * h : h;
    }
    // Symmetrized A = 1/2 I + sqrt(w) K sqrt(w); same spectrum as the weighted
    // Nystrom operator, delta term handled exactly.
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            const double v =
                std::sqrt(w(i) * w(j)) * stimulated_kernel(gamma, x(i), x(j));
            a(i, j) = v;
            a(j, i) = v;
        }
        a(i, i) += 0.5;
    }
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = std::exp(2.0 * gamma * x(i));
    v.normalize();
    double lambda = 0.0;
    for (int iter = 0; iter < 5000; ++iter) {
        Eigen::VectorXd av = a * v;
        const double next = v.dot(av);
        av.normalize();
        v = av;
        if (std::abs(next - lambda) < 1e-14 * std::max(1.0, std::abs(next)) && iter > 10) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    NystromResult r;
    r.lambda = lambda;
    r.x = x;
    r.f = v.array() / w.array().sqrt();
    const double norm = std::sqrt((r.f.array().square() * w.array()).sum());
    r.f /= norm;
    if (r.f(n - 1) < 0.0) r.f = -r.f;
    return r;
}

}  // namespace

StimulatedOptimum stimulated_optimum(double gamma, double box, int n_coarse) {
    const NystromResult coarse = nystrom_largest(gamma, box, n_coarse);
    const int n_fine = 2 * n_coarse - 1;
    const NystromResult fine = nystrom_largest(gamma, box, n_fine);
    if (std::abs(fine.lambda - coarse.lambda) > 1e-4) {
        throw Error(Errc::GridTooCoarse, "Nystrom eigenvalue moved by > 1e-4 under doubling");
    }
    StimulatedOptimum out;
    out.lambda_coarse = coarse.lambda;
    out.lambda_fine = fine.lambda;
    out.lambda_max = (4.0 * fine.lambda - coarse.lambda) / 3.0;
    out.x.assign(fine.x.data(), fine.x.data() + fine.x.size());
    out.f.assign(fine.f.data(), fine.f.data() + fine.f.size());
    const double l = box / gamma;
    const double h = l / (n_fine - 1);
    double dist2 = 0.0;
    for (int i = 0; i < n_fine; ++i) {
        const double w = (i == 0 || i == n_fine - 1) ? 0.5 * h : h;
        const double exact = 2.0 * std::sqrt(gamma) * std::exp(2.0 * gamma * fine.x(i));
        dist2 += w * (fine.f(i) - exact) * (fine.f(i) - exact);
    }
    out.l2_distance_analytic = std::sqrt(dist2);
    return out;
}

namespace {

Complex excitation_markov(const SystemConfig& c, int site, double t) {
    const Spectrum s = eigendecompose(build_h0(c, Complex(0.0, 0.0), HMode::Markov));
    return s.propagator(t)(site, 0);
}

// Exact N>2 amplitudes: RK4 integration of the retarded emitter equations
//   A_i' = -(Gf_i + G_i) A_i - sum_{j != i} sqrt(Gi Gj) e^{i k0 |xij|} A_j(t - |xij|)
// with the delays aligned on the step grid (uniform lattice).
Eigen::VectorXcd excitation_exact_dde(const SystemConfig& c, double t_end) {
    const int n = c.n_emitters();
    const double d = c.spacing();
    double rate_max = 0.0;
    for (int i = 0; i < n; ++i) rate_max = std::max(rate_max, c.gamma_at(i) + c.gamma_f_at(i));
    const int sub = std::max(1, static_cast<int>(std::ceil(d * rate_max / 2e-3)));
    const double dt = d / sub;
    const long steps = static_cast<long>(std::ceil(t_end / dt)) + 1;
    if (steps > 40'000'000L) {
        throw Error(Errc::SeriesOverflow, "delay integration grid exceeds the budget");
    }

    Eigen::MatrixXcd hop(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            hop(i, j) = std::sqrt(c.gamma_at(i) * c.gamma_at(j)) *
                        std::exp(I * reduce_phase(c.k0, std::abs(i - j) * d));
        }
    }
    std::vector<Eigen::VectorXcd> hist(steps + 1, Eigen::VectorXcd::Zero(n));
    hist[0](0) = 1.0;

    // Left-continuous gate: a query at exactly t = 0 reads the pre-switch-on
    // history, which keeps the retardation zeros exact.
    auto delayed = [&](int comp, double t_query) -> Complex {
        if (t_query <= 0.0) return Complex(0.0, 0.0);
        const double idx = t_query / dt;
        long i1 = static_cast<long>(std::floor(idx));
        i1 = std::max(1L, std::min(i1, static_cast<long>(hist.size()) - 3));
        const double u = idx - i1;
        const double c0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        const double c1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        const double c2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
        const double c3 = (u + 1.0) * u * (u - 1.0) / 6.0;
        return c0 * hist[i1 - 1](comp) + c1 * hist[i1](comp) + c2 * hist[i1 + 1](comp) +
               c3 * hist[i1 + 2](comp);
    };
    auto rhs = [&](double tq, const Eigen::VectorXcd& a) -> Eigen::VectorXcd {
        Eigen::VectorXcd out(n);
        for (int i = 0; i < n; ++i) {
            Complex v = -(c.gamma_at(i) + c.gamma_f_at(i)) * a(i);
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                v -= hop(i, j) * delayed(j, tq - std::abs(i - j) * d);
            }
            out(i) = v;
        }
        return out;
    };
    auto rk4_step = [&](double t, double h, const Eigen::VectorXcd& a) -> Eigen::VectorXcd {
        const Eigen::VectorXcd k1 = rhs(t, a);
        const Eigen::VectorXcd k2 = rhs(t + 0.5 * h, a + 0.5 * h * k1);
        const Eigen::VectorXcd k3 = rhs(t + 0.5 * h, a + 0.5 * h * k2);
        const Eigen::VectorXcd k4 = rhs(t + h, a + h * k3);
        return a + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };
    long s = 0;
    while ((s + 1) * dt <= t_end + 1e-12) {
        hist[s + 1] = rk4_step(s * dt, dt, hist[s]);
        ++s;
    }
    const double rest = t_end - s * dt;
    if (rest > 1e-12) return rk4_step(s * dt, rest, hist[s]);
    return hist[s];
}

}  // namespace

Complex excitation_amplitude(const SystemConfig& c, int site, double t, HMode mode) {
    if (c.model != Model::TwoLevelArray && c.model != Model::TwoLevel) {
        throw Error(Errc::InvalidConfig, "excitation_amplitude expects a two-level array");
    }
    if (t < 0.0) return site == 0 ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
    if (mode == HMode::Markov) return excitation_markov(c, site, t);
    const int n = c.n_emitters();
    if (n == 1) return std::exp(-(c.gamma_at(0) + c.gamma_f_at(0)) * t) * Complex(1.0, 0.0);
    if (n == 2) {
        const Complex cp = retardation_series(c, t, +1);
        const Complex cm = retardation_series(c, t, -1);
        const double rate = c.gamma_at(0) + c.gamma_f_at(0);
        const Complex damp = std::exp(Complex(-rate * t, 0.0));
        return site == 0 ? 0.5 * damp * (cp + cm) : 0.5 * damp * (cm - cp);
    }
    return excitation_exact_dde(c, t)(site);
}

Complex field_amplitude(const SystemConfig& c, double x, double t, Direction dir, HMode mode) {
    const int sigma = sigma_of(dir);
    const int n = c.n_emitters();
    Complex sum(0.0, 0.0);
    for (int j = 0; j < n; ++j) {
        const double xj = c.positions[j];
        const double delay = sigma * (x - xj);
        if (delay < 0.0 || delay > t) continue;
        const Complex phase = std::exp(-I * static_cast<double>(sigma) *
                                       reduce_phase(c.k0, xj));
        sum += std::sqrt(c.gamma_at(j)) * phase * excitation_amplitude(c, j, t - delay, mode);
    }
    return -I * sum;
}

namespace {

struct PacketGeometry {
    int sigma;
    std::vector<double> arrival;  // per emitter site, >= 0
    Complex envelope_phase;       // (-+ i) sqrt(2 gamma)
};

PacketGeometry packet_geometry(const SystemConfig& c, const Wavepacket& packet) {
    PacketGeometry g;
    g.sigma = sigma_of(packet.direction);
    const int n = c.n_emitters();
    g.arrival.resize(n);
    for (int j = 0; j < n; ++j) {
        g.arrival[j] = g.sigma * (c.positions[j] - packet.center);
        if (g.arrival[j] < -1e-12) {
            throw Error(Errc::InvalidConfig,
                        "wavepacket must start outside the array on its incoming side");
        }
        g.arrival[j] = std::max(g.arrival[j], 0.0);
    }
    g.envelope_phase =
        (packet.direction == Direction::Right ? -I : I) * std::sqrt(2.0 * packet.width_rate);
    return g;
}

Eigen::VectorXcd packet_amplitudes_at(const SystemConfig& c, const EmitterBasis& b,
                                      const Spectrum& s, const PacketGeometry& g,
                                      double width, double t) {
    const int n1 = b.dim;
    const int n = c.n_emitters();
    Eigen::VectorXcd amp = Eigen::VectorXcd::Zero(n1);
    if (t <= 0.0) return amp;
    const double sig = g.sigma;
    for (int l = 0; l < n1; ++l) {
        const Complex eps = s.eigenvalues(l);
        Complex fsum(0.0, 0.0);
        for (int j = 0; j < n; ++j) {
            const double tau = t - g.arrival[j];
            if (tau <= 0.0) continue;
            const int e_j = b.e_index(j);
            const Complex phase = std::exp(I * sig * reduce_phase(c.k0, c.positions[j]));
            fsum += std::sqrt(c.gamma_at(j)) * phase * std::conj(s.left(e_j, l)) *
                    (std::exp(Complex(-width * tau, 0.0)) - std::exp(-I * eps * tau));
        }
        amp += s.right.col(l) * (fsum / (eps + I * width));
    }
    const Complex pref = I * sig * std::sqrt(2.0 * width);
    return pref * amp;
}

}  // namespace

PacketAmplitudes::PacketAmplitudes(const SystemConfig& config, const Wavepacket& packet)
    : config_(config),
      packet_(packet),
      basis_(emitter_basis(config)),
      spectrum_(eigendecompose(build_h0(config, Complex(0.0, 0.0), HMode::Markov))) {
    const PacketGeometry g = packet_geometry(config_, packet_);
    arrival_ = g.arrival;
    envelope_phase_ = g.envelope_phase;
}

Eigen::VectorXcd PacketAmplitudes::at(double t) const {
    PacketGeometry g;
    g.sigma = sigma_of(packet_.direction);
    g.arrival = arrival_;
    g.envelope_phase = envelope_phase_;
    return packet_amplitudes_at(config_, basis_, spectrum_, g, packet_.width_rate, t);
}

Complex PacketAmplitudes::field(double x, double t, Direction dir) const {
    const int sigma = sigma_of(dir);
    Complex value(0.0, 0.0);
    if (dir == packet_.direction) {
        // free one-sided exponential behind the front
        const double u = sigma_of(packet_.direction) * (x - packet_.center) - t;
        if (u <= 0.0) {
            value += envelope_phase_ * std::exp(packet_.width_rate * u);
        }
    }
    for (int j = 0; j < config_.n_emitters(); ++j) {
        const double delay = sigma * (x - config_.positions[j]);
        if (delay < 0.0 || delay > t) continue;
        const int e_j = basis_.e_index(j);
        const Complex amp = at(t - delay)(e_j);
        const Complex phase = std::exp(-I * static_cast<double>(sigma) *
                                       reduce_phase(config_.k0, config_.positions[j]));
        value += -I * std::sqrt(config_.gamma_at(j)) * phase * amp;
    }
    return value;
}

Eigen::VectorXcd wavepacket_excitation(const SystemConfig& c, const Wavepacket& packet,
                                       double t) {
    return PacketAmplitudes(c, packet).at(t);
}

Complex polariton_single(const SystemConfig& c, const Wavepacket& packet, int site, int species,
                         double t) {
    const int n = c.n_emitters();
    const int idx = species == 0 ? site : n + site;
    return wavepacket_excitation(c, packet, t)(idx);
}

Complex scattered_field(const SystemConfig& c, const Wavepacket& packet, double x, double t,
                        Direction dir) {
    return PacketAmplitudes(c, packet).field(x, t, dir);
}

// ---------------------------------------------------------------------------
// Two-excitation transport
// ---------------------------------------------------------------------------

namespace {

struct PairWorkspace {
    EmitterBasis basis;
    Spectrum spectrum;
    Eigen::MatrixXd u_diag;          // finite pair interaction
    Eigen::ArrayXXd mask;            // 1 on allowed ordered pairs
    // bosonic (symmetrized) basis over allowed pairs a <= b
    std::vector<std::pair<int, int>> sym_basis;
    Eigen::VectorXi sym_of_flat;     // ordered (a,b) -> symmetric index
    bool have_spectral{false};
    Eigen::VectorXcd pair_eps;
    Eigen::MatrixXcd pair_right;     // on the symmetric basis
    Eigen::MatrixXcd pair_left;
};

PairWorkspace make_pair_workspace(const SystemConfig& c, bool spectral) {
    PairWorkspace w;
    w.basis = emitter_basis(c);
    w.spectrum = eigendecompose(build_h0(c, Complex(0.0, 0.0), HMode::Markov));
    const int n1 = w.basis.dim;
    const int n = c.n_emitters();

    w.u_diag = Eigen::MatrixXd::Zero(n1, n1);
    w.mask = Eigen::ArrayXXd::Ones(n1, n1);
    const bool rydberg = c.model == Model::RydbergEitArray;
    // Same-site double occupancy: excluded exactly in hardcore-limit mode,
    // penalized by the finite u0 otherwise (u0 = 0 turns it off entirely).
    if (rydberg) {
        const RydbergParams& r = *c.rydberg;
        for (int i = 0; i < n; ++i) {
            const int combos[4][2] = {{i, i}, {i, n + i}, {n + i, i}, {n + i, n + i}};
            for (const auto& ab : combos) {
                if (r.exact_hardcore) {
                    w.mask(ab[0], ab[1]) = 0.0;
                } else {
                    w.u_diag(ab[0], ab[1]) = r.u0;
                }
            }
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i != j) w.u_diag(n + i, n + j) = rydberg_interaction(r, c, i, j);
            }
        }
    } else {
        for (int a = 0; a < n1; ++a) {
            if (!w.basis.hardcore[a]) continue;
            if (c.exact_hardcore) {
                w.mask(a, a) = 0.0;
            } else {
                w.u_diag(a, a) = c.u0;
            }
        }
    }

    w.sym_of_flat = Eigen::VectorXi::Constant(n1 * n1, -1);
    for (int a = 0; a < n1; ++a) {
        for (int b = a; b < n1; ++b) {
            if (w.mask(a, b) == 0.0) continue;
            const int k = static_cast<int>(w.sym_basis.size());
            w.sym_basis.emplace_back(a, b);
            w.sym_of_flat(a * n1 + b) = k;
            w.sym_of_flat(b * n1 + a) = k;
        }
    }

    if (spectral) {
        // Two-body matrix in the bosonic (symmetrized) basis; the exchange
        // degeneracy of the ordered basis is gone here, so the eigenbasis stays
        // well conditioned. M_sym = U^T M U with the real isometry U whose
        // column (a<=b) carries 1/sqrt(2) on |ab> and |ba> (1 on |aa>).
        const int ms = static_cast<int>(w.sym_basis.size());
        const Eigen::MatrixXcd h = build_h0(c, Complex(0.0, 0.0), HMode::Markov).matrix;
        auto weight = [](int a, int b) { return a == b ? 1.0 : std::sqrt(0.5); };
        auto members = [](int a, int b) {
            return a == b ? std::vector<std::pair<int, int>>{{a, b}}
                          : std::vector<std::pair<int, int>>{{a, b}, {b, a}};
        };
        Eigen::MatrixXcd h2 = Eigen::MatrixXcd::Zero(ms, ms);
        for (int row = 0; row < ms; ++row) {
            const auto [a, b] = w.sym_basis[row];
            const double wr = weight(a, b);
            for (int col = 0; col < ms; ++col) {
                const auto [cc, dd] = w.sym_basis[col];
                const double wc = weight(cc, dd);
                Complex v(0.0, 0.0);
                for (const auto& [p, q] : members(a, b)) {
                    for (const auto& [r, s] : members(cc, dd)) {
                        if (q == s) v += h(p, r);
                        if (p == r) v += h(q, s);
                        if (p == r && q == s) v += w.u_diag(p, q);
                    }
                }
                h2(row, col) = wr * wc * v;
            }
        }
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(h2);
        if (solver.info() != Eigen::Success) {
            throw Error(Errc::DefectiveMatrix, "pair eigensolver failed");
        }
        w.pair_eps = solver.eigenvalues();
        w.pair_right = solver.eigenvectors();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(w.pair_right);
        const auto& sv = svd.singularValues();
        if (!(sv(ms - 1) > 0.0) || sv(0) / sv(ms - 1) > 1e10) {
            throw Error(Errc::DegenerateSpectrum,
                        "pair spectrum too degenerate for the spectral evaluator");
        }
        w.pair_left = w.pair_right.inverse().adjoint();
        w.have_spectral = true;
    }
    return w;
}

struct DriveMode {
    PacketGeometry geom;
    double width;
    Eigen::VectorXcd v_weight;  // sqrt(G) e^{i sigma k0 x} * (-+ i sqrt(2g)) per component
};

DriveMode make_drive(const SystemConfig& c, const EmitterBasis& b, const Wavepacket& packet) {
    DriveMode d;
    d.geom = packet_geometry(c, packet);
    d.width = packet.width_rate;
    d.v_weight = Eigen::VectorXcd::Zero(b.dim);
    for (int j = 0; j < c.n_emitters(); ++j) {
        const int e_j = b.e_index(j);
        d.v_weight(e_j) = d.geom.envelope_phase * std::sqrt(c.gamma_at(j)) *
                          std::exp(I * static_cast<double>(d.geom.sigma) *
                                   reduce_phase(c.k0, c.positions[j]));
    }
    return d;
}

// Drive vector with the active set frozen per integration piece: an envelope
// participates only when its arrival lies at or before the piece start, which
// keeps every RK4 stage one-sidedly smooth.
Eigen::VectorXcd drive_vector(const DriveMode& d, const EmitterBasis& b, double t,
                              double piece_start) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(b.dim);
    for (int j = 0; j < static_cast<int>(d.geom.arrival.size()); ++j) {
        if (d.geom.arrival[j] > piece_start + 1e-12) continue;
        const double tau = t - d.geom.arrival[j];
        if (tau < 0.0) continue;
        const int e_j = b.e_index(j);
        v(e_j) = d.v_weight(e_j) * std::exp(-d.width * tau);
    }
    return v;
}

// psi_b(t) = sum_l chi_l(b) f_l(t) with
// f_l(t) = sum_j q(l,j) [e^{-g(t-a_j)} - e^{-i eps_l (t-a_j)}] theta(t-a_j).
struct SingleTerms {
    Eigen::MatrixXcd q;  // n1 x n_sites
};

SingleTerms single_terms(const SystemConfig& c, const PairWorkspace& w, const DriveMode& d) {
    const int n1 = w.basis.dim;
    const int n = c.n_emitters();
    SingleTerms st;
    st.q.resize(n1, n);
    for (int l = 0; l < n1; ++l) {
        for (int j = 0; j < n; ++j) {
            const int e_j = w.basis.e_index(j);
            st.q(l, j) = -d.v_weight(e_j) * std::conj(w.spectrum.left(e_j, l)) /
                         (w.spectrum.eigenvalues(l) + I * d.width);
        }
    }
    return st;
}

std::vector<Eigen::MatrixXcd> propagate_pair(const SystemConfig& c, const PairWorkspace& w,
                                             const std::vector<DriveMode>& drives,
                                             PairGeometry geometry,
                                             const std::vector<double>& record_times) {
    const double t_end = record_times.back();
    const int n1 = w.basis.dim;
    const Eigen::MatrixXcd h = build_h0(c, Complex(0.0, 0.0), HMode::Markov).matrix;
    double rate = 0.0;
    for (int i = 0; i < n1; ++i) {
        rate = std::max(rate, std::abs(h(i, i)));
        for (int j = 0; j < n1; ++j) rate = std::max(rate, std::abs(w.u_diag(i, j)));
    }
    for (const auto& d : drives) rate = std::max(rate, d.width);
    rate = std::max(rate, 1e-6);
    const double dt_target = (t_end > 100.0 ? 0.01 : 0.005) / rate;

    const bool co = geometry == PairGeometry::Co;
    Eigen::VectorXcd psi_a = Eigen::VectorXcd::Zero(n1);
    Eigen::VectorXcd psi_b = Eigen::VectorXcd::Zero(n1);
    Eigen::MatrixXcd pair = Eigen::MatrixXcd::Zero(n1, n1);

    const Eigen::ArrayXXcd maskc = w.mask.cast<Complex>();
    const Eigen::ArrayXXcd uarr = w.u_diag.cast<Complex>();

    auto rhs_all = [&](double t, double piece_start, const Eigen::VectorXcd& pa,
                       const Eigen::VectorXcd& pb, const Eigen::MatrixXcd& pr,
                       Eigen::VectorXcd& da, Eigen::VectorXcd& db, Eigen::MatrixXcd& dpair) {
        const Eigen::VectorXcd va = drive_vector(drives[0], w.basis, t, piece_start);
        da = -I * (h * pa) - I * va;
        Eigen::MatrixXcd source;
        if (co) {
            db.setZero(n1);
            source = -I * (va * pa.transpose() + pa * va.transpose());
        } else {
            const Eigen::VectorXcd vb = drive_vector(drives[1], w.basis, t, piece_start);
            db = -I * (h * pb) - I * vb;
            source = -I * (va * pb.transpose() + pb * va.transpose() + vb * pa.transpose() +
                           pa * vb.transpose());
        }
        dpair = -I * (h * pr + pr * h);
        dpair.array() += -I * uarr * pr.array();
        dpair += source;
        dpair.array() *= maskc;
    };

    // Breakpoints at the envelope arrivals keep RK4 stages on smooth pieces;
    // record times become exact piece boundaries.
    std::vector<double> breaks{0.0, t_end};
    for (const auto& d : drives) {
        for (double a : d.geom.arrival) {
            if (a > 0.0 && a < t_end) breaks.push_back(a);
        }
    }
    for (double r : record_times) {
        if (r > 0.0 && r < t_end) breaks.push_back(r);
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 breaks.end());

    std::vector<Eigen::MatrixXcd> out;
    std::size_t next = 0;
    const double scale = co ? 2.0 : 1.0;
    auto record = [&](double t) {
        while (next < record_times.size() && record_times[next] <= t + 1e-12) {
            out.push_back(scale * pair);
            ++next;
        }
    };
    record(0.0);

    Eigen::VectorXcd k1a, k2a, k3a, k4a, k1b, k2b, k3b, k4b;
    Eigen::MatrixXcd k1p, k2p, k3p, k4p;
    for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
        const double a = breaks[seg];
        const double b = breaks[seg + 1];
        const long steps = std::max(1L, static_cast<long>(std::ceil((b - a) / dt_target)));
        const double hstep = (b - a) / steps;
        double t = a;
        for (long s = 0; s < steps; ++s) {
            rhs_all(t, a, psi_a, psi_b, pair, k1a, k1b, k1p);
            rhs_all(t + 0.5 * hstep, a, psi_a + 0.5 * hstep * k1a, psi_b + 0.5 * hstep * k1b,
                    pair + 0.5 * hstep * k1p, k2a, k2b, k2p);
            rhs_all(t + 0.5 * hstep, a, psi_a + 0.5 * hstep * k2a, psi_b + 0.5 * hstep * k2b,
                    pair + 0.5 * hstep * k2p, k3a, k3b, k3p);
            rhs_all(t + hstep, a, psi_a + hstep * k3a, psi_b + hstep * k3b,
                    pair + hstep * k3p, k4a, k4b, k4p);
            psi_a += hstep / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            psi_b += hstep / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
            pair += hstep / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            t += hstep;
        }
        record(b);
    }
    return out;
}

Eigen::MatrixXcd spectral_pair(const SystemConfig& c, const PairWorkspace& w,
                               const std::vector<DriveMode>& drives, PairGeometry geometry,
                               double t_end) {
    const int n1 = w.basis.dim;
    const int ms = static_cast<int>(w.sym_basis.size());
    const int n = c.n_emitters();
    const bool co = geometry == PairGeometry::Co;

    std::vector<std::pair<int, int>> combos;  // (drive mode, single mode)
    if (co) {
        combos = {{0, 0}};
    } else {
        combos = {{0, 1}, {1, 0}};
    }
    std::vector<SingleTerms> terms;
    terms.reserve(drives.size());
    for (const auto& d : drives) terms.push_back(single_terms(c, w, d));

    // Left-eigenvector weights on ordered pairs: W_m(ab) collapses the source
    // lift; the sqrt(2) embedding weights fold in here.
    auto sym_weight = [&](int a, int b) { return a == b ? 1.0 : std::sqrt(0.5); };

    Eigen::VectorXcd weight = Eigen::VectorXcd::Zero(ms);
    for (int m = 0; m < ms; ++m) {
        const Complex em = w.pair_eps(m);
        Complex total(0.0, 0.0);
        for (const auto& [vm, pm] : combos) {
            const DriveMode& dv = drives[vm];
            const DriveMode& dp = drives[pm];
            const SingleTerms& st = terms[pm];
            for (int l = 0; l < n1; ++l) {
                const Complex eps_l = w.spectrum.eigenvalues(l);
                for (int jv = 0; jv < n; ++jv) {
                    const int av = w.basis.e_index(jv);
                    const double arr_v = dv.geom.arrival[jv];
                    if (arr_v >= t_end) continue;
                    // sum_b conj(X~_m[sym(av,b)]) * w_sym * chi_l(b) for both lift slots
                    Complex gcoef(0.0, 0.0);
                    for (int b = 0; b < n1; ++b) {
                        const int k = w.sym_of_flat(av * n1 + b);
                        if (k < 0) continue;
                        gcoef += 2.0 * sym_weight(av, b) * std::conj(w.pair_left(k, m)) *
                                 w.spectrum.right(b, l);
                    }
                    if (gcoef == Complex(0.0, 0.0)) continue;
                    const Complex vw = dv.v_weight(av);
                    for (int jp = 0; jp < n; ++jp) {
                        const double arr_p = dp.geom.arrival[jp];
                        const double t0 = std::max(arr_v, arr_p);
                        if (t0 >= t_end) continue;
                        const Complex qlj = st.q(l, jp);
                        if (qlj == Complex(0.0, 0.0)) continue;
                        for (int sgn = 0; sgn < 2; ++sgn) {
                            const Complex s_p =
                                sgn == 0 ? Complex(dp.width, 0.0) : I * eps_l;
                            const Complex coef = (sgn == 0 ? 1.0 : -1.0) * vw * qlj *
                                                 std::exp(dv.width * arr_v + s_p * arr_p);
                            const Complex expo = I * em - (dv.width + s_p);
                            if (std::abs(expo) < 1e-10) {
                                throw Error(Errc::DegenerateSpectrum,
                                            "pair-energy denominator below 1e-10");
                            }
                            const Complex integral =
                                (std::exp(expo * t_end) - std::exp(expo * t0)) / expo;
                            total += gcoef * coef * integral;
                        }
                    }
                }
            }
        }
        weight(m) = -I * std::exp(-I * em * t_end) * total;
    }

    const Eigen::VectorXcd sym_amp = w.pair_right * weight;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n1, n1);
    for (int k = 0; k < ms; ++k) {
        const auto [a, b] = w.sym_basis[k];
        out(a, b) = sym_amp(k) * sym_weight(a, b);
        out(b, a) = out(a, b);
    }
    return co ? Eigen::MatrixXcd(2.0 * out) : out;
}

}  // namespace

std::vector<Eigen::MatrixXcd> polariton_pair_maps(const SystemConfig& c,
                                                  const Wavepacket& first,
                                                  const Wavepacket& second,
                                                  PairGeometry geometry,
                                                  const std::vector<double>& times,
                                                  PairEvaluator evaluator) {
    const EmitterBasis b = emitter_basis(c);
    if (c.model == Model::RydbergEitArray && c.n_emitters() > 30) {
        throw Error(Errc::BasisTooLarge, "pair map requires N <= 30");
    }
    if (times.empty() || !std::is_sorted(times.begin(), times.end())) {
        throw Error(Errc::NonMonotoneGrid, "pair map times must be sorted and nonempty");
    }
    std::vector<DriveMode> drives;
    drives.push_back(make_drive(c, b, first));
    if (geometry == PairGeometry::Counter) {
        drives.push_back(make_drive(c, b, second));
    } else if (sigma_of(first.direction) != sigma_of(second.direction)) {
        throw Error(Errc::InvalidConfig, "co-propagating pair needs same-direction packets");
    }

    bool spectral;
    switch (evaluator) {
    case PairEvaluator::Spectral: spectral = true; break;
    case PairEvaluator::Propagator: spectral = false; break;
    default: spectral = b.dim * b.dim <= 700; break;
    }
    PairWorkspace w = make_pair_workspace(c, spectral);
    if (spectral) {
        std::vector<Eigen::MatrixXcd> out;
        out.reserve(times.size());
        for (double t : times) out.push_back(spectral_pair(c, w, drives, geometry, t));
        return out;
    }
    return propagate_pair(c, w, drives, geometry, times);
}

Eigen::MatrixXcd polariton_pair_map(const SystemConfig& c, const Wavepacket& first,
                                    const Wavepacket& second, PairGeometry geometry, double t,
                                    PairEvaluator evaluator) {
    return polariton_pair_maps(c, first, second, geometry, {t}, evaluator).front();
}

Complex polariton_pair(const SystemConfig& c, const Wavepacket& first, const Wavepacket& second,
                       int site1, int species1, int site2, int species2, double t,
                       PairGeometry geometry, PairEvaluator evaluator) {
    const int n = c.n_emitters();
    const int i1 = species1 == 0 ? site1 : n + site1;
    const int i2 = species2 == 0 ? site2 : n + site2;
    return polariton_pair_map(c, first, second, geometry, t, evaluator)(i1, i2);
}

}  // namespace wgqed
