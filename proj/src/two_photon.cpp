#include "wgqed/two_photon.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include <unsupported/Eigen/FFT>

namespace wgqed {

PairChannelSpace pair_channel_space(const SystemConfig& c) {
    const EmitterBasis b = emitter_basis(c);
    PairChannelSpace s;
    s.n1 = b.dim;
    const int n = c.n_emitters();

    auto add = [&](int a, int bb, double u, bool hardcore, bool exact_limit) {
        const bool exact_hc = hardcore && exact_limit;
        if (!exact_hc && u == 0.0) return;  // free channel, T vanishes there
        s.channels.emplace_back(a, bb);
        s.u_value.push_back(u);
        s.u_inverse.push_back(exact_hc ? 0.0 : 1.0 / u);
        s.is_hardcore.push_back(hardcore);
    };

    switch (c.model) {
    case Model::TwoLevel:
        add(0, 0, c.u0, true, c.exact_hardcore);
        break;
    case Model::JaynesCummings:
        add(1, 1, c.u0, true, c.exact_hardcore);  // atom double occupancy
        break;
    case Model::TwoLevelArray:
        for (int i = 0; i < n; ++i) add(i, i, c.u0, true, c.exact_hardcore);
        break;
    case Model::MirrorTwoLevel:
        add(0, 0, c.u0, true, c.exact_hardcore);
        break;
    case Model::RydbergEitArray: {
        if (n > 30) throw Error(Errc::BasisTooLarge, "rydberg pair basis requires N <= 30");
        const RydbergParams& r = *c.rydberg;
        for (int i = 0; i < n; ++i) {
            // same-site double occupancy in any species combination
            add(i, i, r.u0, true, r.exact_hardcore);
            add(i, n + i, r.u0, true, r.exact_hardcore);
            add(n + i, i, r.u0, true, r.exact_hardcore);
            add(n + i, n + i, r.u0, true, r.exact_hardcore);
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double u = rydberg_interaction(r, c, i, j);
                add(n + i, n + j, u, false, false);
            }
        }
        break;
    }
    }
    return s;
}

PairContext make_pair_context(const SystemConfig& c) {
    PairContext ctx;
    ctx.config = c;
    ctx.basis = emitter_basis(c);
    ctx.spectrum = eigendecompose(build_h0(c, Complex(0.0, 0.0), HMode::Markov));
    ctx.space = pair_channel_space(c);

    const int n1 = ctx.basis.dim;
    const int na = ctx.space.size();
    ctx.proj_right.resize(na, n1 * n1);
    ctx.proj_left.resize(n1 * n1, na);
    ctx.pair_energy.resize(n1 * n1);
    const auto& eps = ctx.spectrum.eigenvalues;
    const auto& right = ctx.spectrum.right;
    const auto& left = ctx.spectrum.left;
    for (int l = 0; l < n1; ++l) {
        for (int lp = 0; lp < n1; ++lp) {
            ctx.pair_energy(l * n1 + lp) = eps(l) + eps(lp);
        }
    }
    for (int idx = 0; idx < na; ++idx) {
        const auto [a, b] = ctx.space.channels[idx];
        for (int l = 0; l < n1; ++l) {
            for (int lp = 0; lp < n1; ++lp) {
                ctx.proj_right(idx, l * n1 + lp) = right(a, l) * right(b, lp);
                ctx.proj_left(l * n1 + lp, idx) =
                    std::conj(left(a, l)) * std::conj(left(b, lp));
            }
        }
    }
    return ctx;
}

namespace {

void check_pair_pole(const PairContext& ctx, Complex e_total) {
    const double scale = std::max(1.0, std::abs(e_total));
    for (int i = 0; i < ctx.pair_energy.size(); ++i) {
        if (std::abs(e_total - ctx.pair_energy(i)) < 1e-12 * scale) {
            throw Error(Errc::SingularBubble,
                        "E within 1e-12 of a pair pole; shift E into the upper half plane");
        }
    }
}

Eigen::MatrixXcd markov_bubble(const PairContext& ctx, Complex e_total) {
    check_pair_pole(ctx, e_total);
    Eigen::VectorXcd d(ctx.pair_energy.size());
    for (int i = 0; i < d.size(); ++i) d(i) = 1.0 / (e_total - ctx.pair_energy(i));
    return ctx.proj_right * d.asDiagonal() * ctx.proj_left;
}

// Markov Green function applied columnwise on the e-component unit vectors.
Eigen::MatrixXcd markov_green(const PairContext& ctx, Complex omega) {
    const int n1 = ctx.basis.dim;
    Eigen::VectorXcd d(n1);
    for (int l = 0; l < n1; ++l) d(l) = 1.0 / (omega - ctx.spectrum.eigenvalues(l));
    return ctx.spectrum.right * d.asDiagonal() * ctx.spectrum.left.adjoint();
}

Eigen::MatrixXcd exact_green(const PairContext& ctx, Complex omega) {
    const EffectiveHamiltonian h = build_h0(ctx.config, omega, HMode::Exact);
    Eigen::MatrixXcd m = -h.matrix;
    m.diagonal().array() += omega;
    return m.partialPivLu().inverse();
}

Eigen::MatrixXcd bubble_quadrature_impl(const PairContext& ctx, Complex e_total,
                                        bool markov_integrand, const QuadOptions& opts) {
    check_pair_pole(ctx, e_total);
    const Eigen::MatrixXcd pi_ref = markov_bubble(ctx, e_total);

    double min_im = 1e300;
    for (int l = 0; l < ctx.spectrum.eigenvalues.size(); ++l) {
        min_im = std::min(min_im, -ctx.spectrum.eigenvalues(l).imag());
    }
    const double delta = e_total.imag() > 0.0 ? 0.5 * e_total.imag() : 0.0;
    if (delta == 0.0 && min_im < 1e-9) {
        throw Error(Errc::SingularBubble,
                    "dark pole on the integration contour; pass E with Im E > 0");
    }

    const int na = ctx.space.size();
    const double eps_scale = ctx.spectrum.eigenvalues.cwiseAbs().maxCoeff();
    const double scale = std::max({3.0 * eps_scale, std::abs(e_total), 1.0});
    const double center = 0.5 * e_total.real();

    // Entries share the pole structure; per-entry adaptive integration of the
    // Markov-subtracted integrand (decays like 1/w^3) is cheap at desk scale.
    Eigen::MatrixXcd correction = Eigen::MatrixXcd::Zero(na, na);
    QuadOptions o = opts;
    o.abs_tol = std::max(opts.abs_tol, opts.rel_tol * pi_ref.cwiseAbs().maxCoeff());
    for (int r = 0; r < na; ++r) {
        for (int cidx = 0; cidx < na; ++cidx) {
            const auto [a, b] = ctx.space.channels[r];
            const auto [cc, dd] = ctx.space.channels[cidx];
            auto entry = [&, a, b, cc, dd](double t) -> Complex {
                const Complex w(t, delta);
                Complex g1ac, g2bd;
                if (!markov_integrand) {
                    g1ac = exact_green(ctx, w)(a, cc);
                    g2bd = exact_green(ctx, e_total - w)(b, dd);
                } else {
                    g1ac = markov_green(ctx, w)(a, cc);
                    g2bd = markov_green(ctx, e_total - w)(b, dd);
                }
                const Complex m1 = markov_green(ctx, w)(a, cc);
                const Complex m2 = markov_green(ctx, e_total - w)(b, dd);
                return g1ac * g2bd - m1 * m2;
            };
            correction(r, cidx) = integrate_line(entry, center, scale, o).value;
        }
    }
    return pi_ref + Complex(0.0, 1.0) / two_pi * correction;
}

}  // namespace

Eigen::MatrixXcd bubble_matrix(const PairContext& ctx, Complex e_total, HMode mode,
                               const QuadOptions& opts) {
    if (mode == HMode::Markov) return markov_bubble(ctx, e_total);
    if (ctx.config.model == Model::MirrorTwoLevel && ctx.config.mirror->exact_limit) {
        Eigen::MatrixXcd pi(1, 1);
        pi(0, 0) = mirror_bubble(ctx.config, e_total, opts);
        return pi;
    }
    return bubble_quadrature_impl(ctx, e_total, false, opts);
}

Eigen::MatrixXcd bubble_markov_quadrature(const PairContext& ctx, Complex e_total,
                                          const QuadOptions& opts) {
    return bubble_quadrature_impl(ctx, e_total, true, opts);
}

PairBasisOperator bubble(const SystemConfig& c, Complex e_total, HMode mode,
                         const QuadOptions& opts) {
    const PairContext ctx = make_pair_context(c);
    PairBasisOperator op;
    op.space = ctx.space;
    op.matrix = bubble_matrix(ctx, e_total, mode, opts);
    return op;
}

Eigen::MatrixXcd tmatrix_from_bubble(const PairChannelSpace& space,
                                     const Eigen::MatrixXcd& pi) {
    const int na = space.size();
    Eigen::MatrixXcd m = -pi;
    for (int i = 0; i < na; ++i) m(i, i) += space.u_inverse[i];
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
    if (lu.rcond() < 1e-14) {
        throw Error(Errc::IllConditioned, "condition number of U^-1 - Pi exceeds 1e14");
    }
    Eigen::MatrixXcd t = lu.inverse();
    const double resid = (m * t - Eigen::MatrixXcd::Identity(na, na)).cwiseAbs().maxCoeff();
    if (resid > 1e-10 * std::max(1.0, t.cwiseAbs().maxCoeff())) {
        throw Error(Errc::IllConditioned, "Lippmann-Schwinger residual exceeds 1e-10");
    }
    return t;
}

PairBasisOperator tmatrix(const SystemConfig& c, Complex e_total, HMode mode,
                          const QuadOptions& opts) {
    const PairContext ctx = make_pair_context(c);
    PairBasisOperator op;
    op.space = ctx.space;
    op.matrix = tmatrix_from_bubble(ctx.space, bubble_matrix(ctx, e_total, mode, opts));
    return op;
}

namespace {

// In/out leg phase vectors: sqrt(Gamma_j) e^{+-i(k(+k0))x_j} on waveguide-coupled
// components. Reflected pairs carry + phases on both sides; transmitted output
// carries the conjugate carrier phases.
Eigen::VectorXcd leg_source(const EmitterBasis& b, const SystemConfig& c, Complex k, HMode mode,
                            int sign) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(b.dim);
    for (int i = 0; i < b.dim; ++i) {
        if (b.sqrt_gamma(i) == 0.0) continue;
        Complex phase = Complex(0.0, sign * reduce_phase(c.k0, b.positions(i)));
        if (mode == HMode::Exact) phase += I * (static_cast<double>(sign) * k * b.positions(i));
        v(i) = b.sqrt_gamma(i) * std::exp(phase);
    }
    return v;
}

Eigen::VectorXcd leg_amplitude(const PairContext& ctx, Complex p, HMode mode, int sign) {
    const Eigen::VectorXcd s = leg_source(ctx.basis, ctx.config, p, mode, sign);
    if (mode == HMode::Markov) {
        const int n1 = ctx.basis.dim;
        const Eigen::VectorXcd cl = ctx.spectrum.left.adjoint() * s;
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n1);
        for (int l = 0; l < n1; ++l) {
            const Complex den = p - ctx.spectrum.eigenvalues(l);
            if (std::abs(den) < 1e-13 * std::max(1.0, std::abs(p))) {
                if (std::abs(cl(l)) < 1e-10 * std::max(1e-300, s.norm())) continue;
                throw Error(Errc::SingularResolvent, "leg momentum sits on a coupled pole");
            }
            out += ctx.spectrum.right.col(l) * (cl(l) / den);
        }
        return out;
    }
    const EffectiveHamiltonian h = build_h0(ctx.config, p, HMode::Exact);
    Eigen::MatrixXcd m = -h.matrix;
    m.diagonal().array() += p;
    return resolvent_solve(m, s);
}

int out_sign(PairChannel channel) {
    return channel == PairChannel::ReflectedPair ? +1 : -1;
}

Complex disconnected_amp(const SystemConfig& c, double k, HMode mode, PairChannel channel) {
    const RTPoint rt = rt_point(c, k, mode);
    return channel == PairChannel::ReflectedPair ? rt.r : rt.t;
}

Eigen::VectorXcd active_pair_vector(const PairChannelSpace& space, const Eigen::VectorXcd& u1,
                                    const Eigen::VectorXcd& u2) {
    Eigen::VectorXcd v(space.size());
    for (int i = 0; i < space.size(); ++i) {
        const auto [a, b] = space.channels[i];
        v(i) = u1(a) * u2(b);
    }
    return v;
}

}  // namespace

TwoPhotonKernel pipeline_kernel(const SystemConfig& c, double k1, double k2, HMode mode,
                                PairChannel channel, Complex eta, const QuadOptions& opts) {
    auto ctx = std::make_shared<PairContext>(make_pair_context(c));
    const Complex e_total = Complex(k1 + k2, 0.0) + eta;

    const Eigen::MatrixXcd t = tmatrix_from_bubble(ctx->space,
                                                   bubble_matrix(*ctx, e_total, mode, opts));
    const Eigen::VectorXcd u1 = leg_amplitude(*ctx, Complex(k1, 0.0) + 0.5 * eta, mode, +1);
    const Eigen::VectorXcd u2 = leg_amplitude(*ctx, Complex(k2, 0.0) + 0.5 * eta, mode, +1);
    auto tv = std::make_shared<Eigen::VectorXcd>(t * active_pair_vector(ctx->space, u1, u2));

    TwoPhotonKernel kern;
    kern.channel = channel;
    kern.e_total = e_total;
    kern.k1 = k1;
    kern.k2 = k2;
    const Complex a1 = disconnected_amp(c, k1, mode, channel);
    const Complex a2 = disconnected_amp(c, k2, mode, channel);
    kern.disconnected12 = a1 * a2;
    kern.disconnected21 = a1 * a2;
    const int osign = out_sign(channel);
    const HMode kmode = mode;
    kern.connected = [ctx, tv, osign, kmode](Complex p1, Complex p2) -> Complex {
        const Eigen::VectorXcd o1 = leg_amplitude(*ctx, p1, kmode, osign);
        const Eigen::VectorXcd o2 = leg_amplitude(*ctx, p2, kmode, osign);
        Complex sum(0.0, 0.0);
        const auto& space = ctx->space;
        for (int i = 0; i < space.size(); ++i) {
            const auto [a, b] = space.channels[i];
            sum += (o1(a) * o2(b) + o2(a) * o1(b)) * (*tv)(i);
        }
        return -I / two_pi * sum;
    };
    return kern;
}

TwoPhotonKernel s2_two_level(double k1, double k2, double gamma) {
    TwoPhotonKernel kern;
    kern.channel = PairChannel::ReflectedPair;
    kern.e_total = k1 + k2;
    kern.k1 = k1;
    kern.k2 = k2;
    const Complex r1 = rt_two_level(k1, gamma).r;
    const Complex r2 = rt_two_level(k2, gamma).r;
    kern.disconnected12 = kern.disconnected21 = r1 * r2;
    const Complex e_total = kern.e_total;
    kern.connected = [gamma, e_total, k1, k2](Complex p1, Complex p2) -> Complex {
        const Complex ig(0.0, gamma);
        return I * gamma * gamma / pi * (e_total + 2.0 * ig) /
               ((p1 + ig) * (p2 + ig) * (k1 + ig) * (k2 + ig));
    };
    return kern;
}

TwoPhotonKernel s2_jc(double k1, double k2, double g, double gamma) {
    TwoPhotonKernel kern;
    kern.channel = PairChannel::ReflectedPair;
    kern.e_total = k1 + k2;
    kern.k1 = k1;
    kern.k2 = k2;
    const Complex r1 = rt_jc(k1, g, gamma).r;
    const Complex r2 = rt_jc(k2, g, gamma).r;
    kern.disconnected12 = kern.disconnected21 = r1 * r2;
    const Complex e = kern.e_total;
    kern.connected = [g, gamma, e, k1, k2](Complex p1, Complex p2) -> Complex {
        const Complex ig(0.0, gamma);
        const Complex g2v = g * g;
        auto den = [&](Complex k) { return k * (k + ig) - g2v; };
        const Complex pole_factor = (e + ig) * (e + 2.0 * ig) - 2.0 * g2v;
        return I * gamma * gamma / pi * g2v * g2v * (e + ig) *
               (e * (e + 2.0 * ig) - 4.0 * g2v) /
               (pole_factor * den(k1) * den(k2) * den(p1) * den(p2));
    };
    return kern;
}

TwoPhotonKernel s2_array(const SystemConfig& c, double k1, double k2, HMode mode, Complex eta) {
    if (c.model != Model::TwoLevelArray && c.model != Model::TwoLevel) {
        throw Error(Errc::InvalidConfig, "s2_array expects a two-level array config");
    }
    return pipeline_kernel(c, k1, k2, mode, PairChannel::ReflectedPair, eta);
}

TwoPhotonKernel s2_mirror(const SystemConfig& c, double k1, double k2, Complex eta) {
    if (c.model != Model::MirrorTwoLevel) {
        throw Error(Errc::InvalidConfig, "s2_mirror expects a mirror_two_level config");
    }
    if (!c.mirror->exact_limit) {
        return pipeline_kernel(c, k1, k2, HMode::Exact, PairChannel::ReflectedPair, eta);
    }
    TwoPhotonKernel kern;
    kern.channel = PairChannel::ReflectedPair;
    kern.e_total = Complex(k1 + k2, 0.0) + eta;
    kern.k1 = k1;
    kern.k2 = k2;
    const Complex r1 = rt_mirror(c, k1);
    const Complex r2 = rt_mirror(c, k2);
    kern.disconnected12 = kern.disconnected21 = r1 * r2;

    const double gamma = c.gamma_at(0);
    const double ax0 = std::abs(c.mirror->x0);
    const double th0 = reduce_phase(c.k0, ax0);
    const Complex e_total = kern.e_total;
    const Complex pi_e = mirror_bubble(c, e_total);
    const Complex t_e = 1.0 / ((c.exact_hardcore ? 0.0 : 1.0 / c.u0) - pi_e);
    auto legf = [gamma, ax0, th0](Complex p) -> Complex {
        const Complex phi = th0 + p * ax0;
        return std::sin(phi) / (p + I * gamma - I * gamma * std::exp(2.0 * I * phi));
    };
    kern.connected = [gamma, t_e, legf, k1, k2](Complex p1, Complex p2) -> Complex {
        return -I * 16.0 / pi * gamma * gamma * t_e * legf(k1) * legf(k2) * legf(p1) * legf(p2);
    };
    return kern;
}

TwoPhotonKernel s2_rydberg(const SystemConfig& c, double k1, double k2) {
    if (c.model != Model::RydbergEitArray) {
        throw Error(Errc::InvalidConfig, "s2_rydberg expects a rydberg_eit_array config");
    }
    return pipeline_kernel(c, k1, k2, HMode::Markov, PairChannel::TransmittedPair);
}

PairWavefunction psi2_two_level(double k1, double k2, double gamma) {
    PairWavefunction psi;
    psi.channel = PairChannel::ReflectedPair;
    psi.e_total = k1 + k2;
    psi.k_rel = pair_relative(k1, k2);
    const Complex rr = rt_two_level(k1, gamma).r * rt_two_level(k2, gamma).r;
    psi.disconnected = rr;
    const Complex e = psi.e_total;
    psi.connected = [rr, e, gamma](double x) -> Complex {
        return -rr * std::exp((I * 0.5 * e - gamma) * std::abs(x));
    };
    return psi;
}

PairWavefunction psi2_jc(double k1, double k2, double g, double gamma) {
    PairWavefunction psi;
    psi.channel = PairChannel::ReflectedPair;
    psi.e_total = k1 + k2;
    psi.k_rel = pair_relative(k1, k2);
    psi.disconnected = rt_jc(k1, g, gamma).r * rt_jc(k2, g, gamma).r;
    const Complex e = psi.e_total;
    const Complex ig(0.0, gamma);
    const Complex disc = std::sqrt(Complex(4.0 * g * g - gamma * gamma, 0.0));
    const Complex lam_p = 0.5 * (-ig + disc);
    const Complex lam_m = 0.5 * (-ig - disc);
    const Complex g2v = g * g;
    const Complex pole_factor = (e + ig) * (e + 2.0 * ig) - 2.0 * g2v;
    const Complex kden = (k1 * (k1 + ig) - g2v) * (k2 * (k2 + ig) - g2v);
    const Complex pref = -gamma * gamma * g2v * g2v / ((lam_p - lam_m) * pole_factor * kden);
    psi.connected = [pref, e, lam_p, lam_m](double x) -> Complex {
        const double ax = std::abs(x);
        return pref * ((e - 2.0 * lam_p) * std::exp(I * (0.5 * e - lam_m) * ax) -
                       (e - 2.0 * lam_m) * std::exp(I * (0.5 * e - lam_p) * ax));
    };
    return psi;
}

PairWavefunction psi2_markov(const SystemConfig& c, double k1, double k2, PairChannel channel,
                             Complex eta) {
    auto ctx = std::make_shared<PairContext>(make_pair_context(c));
    const Complex e_total = Complex(k1 + k2, 0.0) + eta;
    const Eigen::MatrixXcd t =
        tmatrix_from_bubble(ctx->space, markov_bubble(*ctx, e_total));
    const Eigen::VectorXcd u1 = leg_amplitude(*ctx, Complex(k1, 0.0) + 0.5 * eta, HMode::Markov, +1);
    const Eigen::VectorXcd u2 = leg_amplitude(*ctx, Complex(k2, 0.0) + 0.5 * eta, HMode::Markov, +1);
    const Eigen::VectorXcd v =
        t * (active_pair_vector(ctx->space, u1, u2) + active_pair_vector(ctx->space, u2, u1));

    const int n1 = ctx->basis.dim;
    const Eigen::VectorXcd s_out =
        leg_source(ctx->basis, c, e_total * 0.5, HMode::Markov, out_sign(channel));
    const Eigen::VectorXcd c_l = ctx->spectrum.left.adjoint() * s_out;

    // W_{ll'} = sum_(ab) chi_l(a) chi_l'(b) V_(ab)
    auto w = std::make_shared<Eigen::MatrixXcd>(Eigen::MatrixXcd::Zero(n1, n1));
    for (int i = 0; i < ctx->space.size(); ++i) {
        const auto [a, b] = ctx->space.channels[i];
        *w += v(i) * (ctx->spectrum.right.row(a).transpose() *
                      ctx->spectrum.right.row(b));
    }
    auto cl = std::make_shared<Eigen::VectorXcd>(c_l);

    PairWavefunction psi;
    psi.channel = channel;
    psi.e_total = e_total;
    psi.k_rel = pair_relative(k1, k2);
    const Complex d1 = disconnected_amp(c, k1, HMode::Markov, channel);
    const Complex d2 = disconnected_amp(c, k2, HMode::Markov, channel);
    psi.disconnected = d1 * d2;

    const Eigen::VectorXcd eps = ctx->spectrum.eigenvalues;
    psi.connected = [w, cl, eps, e_total, n1](double x) -> Complex {
        Complex sum(0.0, 0.0);
        for (int l = 0; l < n1; ++l) {
            for (int lp = 0; lp < n1; ++lp) {
                const Complex den = e_total - eps(l) - eps(lp);
                const Complex expo = x >= 0.0 ? std::exp(I * (0.5 * e_total - eps(lp)) * x)
                                              : std::exp(-I * (0.5 * e_total - eps(l)) * x);
                sum += (*w)(l, lp) * (*cl)(l) * (*cl)(lp) * expo / den;
            }
        }
        return -0.5 * sum;
    };
    return psi;
}

PairWavefunction psi2_array(const SystemConfig& c, double k1, double k2, HMode mode,
                            Complex eta) {
    if (mode == HMode::Markov) {
        return psi2_markov(c, k1, k2, PairChannel::ReflectedPair, eta);
    }
    // Exact mode: Markov residue part plus the Fourier transform of the kernel
    // difference, evaluated per point by adaptive quadrature.
    PairWavefunction base = psi2_markov(c, k1, k2, PairChannel::ReflectedPair, eta);
    const TwoPhotonKernel exact = s2_array(c, k1, k2, HMode::Exact, eta);
    const TwoPhotonKernel markov = s2_array(c, k1, k2, HMode::Markov, eta);
    PairWavefunction psi;
    psi.channel = base.channel;
    psi.e_total = base.e_total;
    psi.k_rel = base.k_rel;
    psi.disconnected = exact.disconnected12;
    auto base_conn = base.connected;
    const Complex e_total = base.e_total;
    const double scale = std::max(1.0, c.gamma_at(0));
    psi.connected = [base_conn, exact, markov, e_total, scale](double x) -> Complex {
        auto diff = [&](double q) -> Complex {
            const Complex p1 = 0.5 * e_total + q;
            const Complex p2 = 0.5 * e_total - q;
            return (exact.connected(p1, p2) - markov.connected(p1, p2)) * std::exp(I * q * x);
        };
        QuadOptions o;
        o.rel_tol = 1e-7;
        o.abs_tol = 1e-9;
        const Complex corr = 0.5 * integrate_line(diff, 0.0, 4.0 * scale, o).value;
        return base_conn(x) + corr;
    };
    return psi;
}

PairWavefunction psi2_rydberg(const SystemConfig& c, double k1, double k2, Complex eta) {
    if (c.model != Model::RydbergEitArray) {
        throw Error(Errc::InvalidConfig, "psi2_rydberg expects a rydberg_eit_array config");
    }
    return psi2_markov(c, k1, k2, PairChannel::TransmittedPair, eta);
}

SampledWavefunction connected_by_fft(const TwoPhotonKernel& kernel, double window, int n,
                                     double decay_scale) {
    if (window <= 0.0) window = 40.0 * decay_scale;
    const double l = window;
    const double dq = 2.0 * l / n;
    const double mu = decay_scale;
    const Complex e_total = kernel.e_total;

    std::vector<Complex> samples(n);
    for (int j = 0; j < n; ++j) {
        const double q = -l + j * dq;
        samples[j] = kernel.connected(0.5 * e_total + q, 0.5 * e_total - q);
    }
    // Even 1/(q^2+mu^2) asymptote from the endpoint average; its Fourier
    // transform (pi/mu) e^{-mu|x|} is added back analytically.
    const double q0 = -l;
    const double q1 = -l + (n - 1) * dq;
    const Complex casym = 0.5 * (samples[0] * (q0 * q0 + mu * mu) +
                                 samples[n - 1] * (q1 * q1 + mu * mu));
    for (int j = 0; j < n; ++j) {
        const double q = -l + j * dq;
        samples[j] -= casym / (q * q + mu * mu);
    }

    Eigen::FFT<double> fft;
    std::vector<Complex> spectrum(n);
    fft.inv(spectrum, samples);  // (1/n) sum_j s_j e^{+2pi i jm/n}

    SampledWavefunction out;
    out.x.resize(n);
    out.value.resize(n);
    for (int m = 0; m < n; ++m) {
        const int ms = m < n / 2 ? m : m - n;  // signed frequency index
        const double x = two_pi * ms / (n * dq);
        const int slot = m < n / 2 ? m + n / 2 : m - n / 2;  // ascending-x order
        const Complex dft = static_cast<double>(n) * spectrum[m] * std::exp(-I * l * x);
        out.x[slot] = x;
        out.value[slot] = 0.5 * (dq * dft + casym * pi / mu * std::exp(-mu * std::abs(x)));
    }
    return out;
}

Complex connected_by_quadrature(const TwoPhotonKernel& kernel, double x, double decay_scale,
                                const QuadOptions& opts) {
    const double l = 60.0 * decay_scale;
    const double mu = decay_scale;
    const Complex e_total = kernel.e_total;
    auto ker = [&](double q) -> Complex {
        return kernel.connected(0.5 * e_total + q, 0.5 * e_total - q);
    };
    const Complex casym = 0.5 * (ker(-l) * (l * l + mu * mu) + ker(l) * (l * l + mu * mu));
    auto f = [&](double q) -> Complex {
        return (ker(q) - casym / (q * q + mu * mu)) * std::exp(I * q * x);
    };
    const Complex body = integrate(f, -l, l, opts).value;
    return 0.5 * (body + casym * pi / mu * std::exp(-mu * std::abs(x)));
}

std::vector<double> g2(const PairWavefunction& psi, Complex normalization,
                       const std::vector<double>& x_grid) {
    const double n2 = std::norm(normalization);
    if (!(n2 > 0.0)) throw Error(Errc::ZeroNormalization, "g2 normalization vanishes");
    std::vector<double> out(x_grid.size());
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        out[i] = std::norm(psi(0.0, x_grid[i])) / n2;
    }
    return out;
}

Complex mirror_gee(const SystemConfig& c, Complex omega) {
    const double gamma = c.gamma_at(0);
    const double ax0 = std::abs(c.mirror->x0);
    const double th0 = reduce_phase(c.k0, ax0);
    if (c.mirror->exact_limit) {
        return 1.0 / (omega + I * gamma - I * gamma * std::exp(2.0 * I * (th0 + omega * ax0)));
    }
    const EffectiveHamiltonian h = build_h0(c, omega, HMode::Exact);
    Eigen::MatrixXcd m = -h.matrix;
    m.diagonal().array() += omega;
    return m.partialPivLu().inverse()(0, 0);
}

Complex mirror_bubble(const SystemConfig& c, Complex e_total, const QuadOptions& opts) {
    const double gamma = c.gamma_at(0);
    const double ax0 = std::abs(c.mirror->x0);
    const double th0 = reduce_phase(c.k0, ax0);
    // Single-pole reference: the Markov mirror pole of the emitter component.
    const Complex eps1 = -I * gamma * (1.0 - std::exp(2.0 * I * th0));
    const double delta = e_total.imag() > 0.0 ? 0.5 * e_total.imag() : 0.0;
    if (delta == 0.0 && -eps1.imag() < 1e-9) {
        throw Error(Errc::SingularBubble, "mirror dark pole on the contour; pass Im E > 0");
    }
    const Complex pi_ref = 1.0 / (e_total - 2.0 * eps1);
    auto gref = [&](Complex w) { return 1.0 / (w - eps1); };
    auto diff = [&](double t) -> Complex {
        const Complex w(t, delta);
        return mirror_gee(c, w) * mirror_gee(c, e_total - w) -
               gref(w) * gref(e_total - w);
    };
    QuadOptions o = opts;
    o.abs_tol = std::max(opts.abs_tol, opts.rel_tol * std::abs(pi_ref));
    const double scale = std::max({4.0 * gamma, std::abs(e_total), 1.0});
    const Complex corr = integrate_line(diff, 0.5 * e_total.real(), scale, o).value;
    return pi_ref + I / two_pi * corr;
}

Eigen::MatrixXcd entangled_pair(const SystemConfig& c, const Wavepacket& packet,
                                const Eigen::VectorXd& p_grid, const QuadOptions& opts) {
    if (c.model != Model::MirrorTwoLevel || !c.mirror->exact_limit) {
        throw Error(Errc::InvalidConfig, "entangled_pair requires the exact mirror limit");
    }
    const double gamma = c.gamma_at(0);
    const double ax0 = std::abs(c.mirror->x0);
    const double th0 = reduce_phase(c.k0, ax0);
    const double uinv = c.exact_hardcore ? 0.0 : 1.0 / c.u0;
    const int n = static_cast<int>(p_grid.size());

    auto legf = [&](Complex p) -> Complex {
        const Complex phi = th0 + p * ax0;
        return std::sin(phi) / (p + I * gamma - I * gamma * std::exp(2.0 * I * phi));
    };

    // T(E) F2(E) cached per anti-diagonal of the uniform grid.
    std::map<long, Complex> tf2;
    auto tf2_at = [&](long key, double e_total) -> Complex {
        auto it = tf2.find(key);
        if (it != tf2.end()) return it->second;
        const Complex pi_e = mirror_bubble(c, Complex(e_total, 0.0), opts);
        const Complex t_e = 1.0 / (uinv - pi_e);
        auto f2int = [&](double k) -> Complex {
            return packet.amplitude(0.5 * e_total + k) * legf(0.5 * e_total + k) *
                   packet.amplitude(0.5 * e_total - k) * legf(0.5 * e_total - k);
        };
        QuadOptions o = opts;
        o.abs_tol = std::max(opts.abs_tol, 1e-14);
        const Complex f2 =
            integrate_line(f2int, 0.0, std::max(gamma, packet.width_rate) * 4.0, o).value /
            two_pi;
        const Complex val = t_e * f2;
        tf2.emplace(key, val);
        return val;
    };

    Eigen::VectorXcd refl(n), amp(n);
    for (int i = 0; i < n; ++i) {
        refl(i) = rt_mirror(c, p_grid(i));
        amp(i) = packet.amplitude(p_grid(i));
    }
    Eigen::MatrixXcd psi(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double e_total = p_grid(i) + p_grid(j);
            const Complex tf = tf2_at(static_cast<long>(i) + j, e_total);
            psi(i, j) = amp(i) * amp(j) * refl(i) * refl(j) -
                        16.0 * I * gamma * gamma * tf * legf(p_grid(i)) * legf(p_grid(j));
        }
    }
    return psi;
}

double fold_and_normalize(Eigen::MatrixXcd& psi, double dp) {
    psi *= dp;  // sqrt(dp) per tensor factor
    const double norm = psi.norm();
    if (!(norm > 0.0)) throw Error(Errc::ZeroNormalization, "pair amplitude is zero");
    psi /= norm;
    return norm;
}

double von_neumann_entropy(const Eigen::MatrixXcd& psi_weighted) {
    const double norm = psi_weighted.norm();
    if (std::abs(norm - 1.0) > 1e-6) {
        throw Error(Errc::NotNormalized, "pair amplitude norm deviates from 1 by > 1e-6");
    }
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(psi_weighted);
    const auto& sv = svd.singularValues();
    double s = 0.0;
    for (int i = 0; i < sv.size(); ++i) {
        const double w = sv(i) * sv(i);
        if (w > 1e-24) s -= w * std::log(w);
    }
    return s;
}

}  // namespace wgqed
