#include "wgqed/single_photon.hpp"

#include <cmath>

namespace wgqed {

RTPoint rt_two_level(double k, double gamma) {
    RTPoint p;
    p.k = k;
    const Complex denom(k, gamma);
    p.r = Complex(0.0, -gamma) / denom;
    p.t = k / denom;
    return p;
}

RTPoint rt_jc(double k, double g, double gamma) {
    RTPoint p;
    p.k = k;
    const Complex denom = Complex(k, gamma) * k - g * g;
    p.r = Complex(0.0, -gamma) * k / denom;
    p.t = (k * k - g * g) / denom;
    return p;
}

namespace {

// Phase vectors attached to the in/out legs of the single-photon contraction.
// Reflected output carries the same +(k+k0) phases as the input; transmitted
// output carries the conjugate phases.
Eigen::VectorXcd leg_vector(const EmitterBasis& b, const SystemConfig& c, double k, HMode mode,
                            int sign) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(b.dim);
    for (int i = 0; i < b.dim; ++i) {
        if (b.sqrt_gamma(i) == 0.0) continue;
        double phase = sign * reduce_phase(c.k0, b.positions(i));
        if (mode == HMode::Exact) phase += sign * k * b.positions(i);
        v(i) = b.sqrt_gamma(i) * std::exp(I * phase);
    }
    return v;
}

Eigen::MatrixXcd omega_matrix(const SystemConfig& c, double k, HMode mode) {
    const EffectiveHamiltonian h = build_h0(c, Complex(k, 0.0), mode);
    Eigen::MatrixXcd m = -h.matrix;
    m.diagonal().array() += Complex(k, 0.0);
    return m;
}

RTPoint rt_contraction(const SystemConfig& c, double k, HMode mode) {
    const EmitterBasis b = emitter_basis(c);
    const Eigen::MatrixXcd m = omega_matrix(c, k, mode);
    const Eigen::VectorXcd vin = leg_vector(b, c, k, mode, +1);
    const Eigen::VectorXcd vout_t = leg_vector(b, c, k, mode, -1);
    const Eigen::VectorXcd u = resolvent_solve(m, vin);
    RTPoint p;
    p.k = k;
    p.r = -I * Complex(vin.transpose() * u);
    p.t = 1.0 - I * Complex(vout_t.transpose() * u);
    return p;
}

}  // namespace

RTPoint rt_array(const SystemConfig& c, double k, HMode mode) {
    if (c.model != Model::TwoLevelArray && c.model != Model::TwoLevel) {
        throw Error(Errc::InvalidConfig, "rt_array expects a two-level array config");
    }
    return rt_contraction(c, k, mode);
}

RTPoint rt_eit_array(const SystemConfig& c, double k, HMode mode) {
    if (c.model != Model::RydbergEitArray) {
        throw Error(Errc::InvalidConfig, "rt_eit_array expects a rydberg_eit_array config");
    }
    return rt_contraction(c, k, mode);
}

Complex rt_mirror(const SystemConfig& c, double k) {
    if (c.model != Model::MirrorTwoLevel) {
        throw Error(Errc::InvalidConfig, "rt_mirror expects a mirror_two_level config");
    }
    const double gamma = c.gamma_at(0);
    const double ax0 = std::abs(c.mirror->x0);
    if (c.mirror->exact_limit) {
        const double phi = reduce_phase(c.k0, ax0) + k * ax0;
        const Complex e2 = std::exp(2.0 * I * phi);
        const Complex num = Complex(k, -gamma) + I * gamma * std::conj(e2);
        const Complex den = Complex(k, gamma) - I * gamma * e2;
        return -num / den;
    }
    // Finite mirror rate: contraction through the 2x2 {emitter, mirror} resolvent.
    const EmitterBasis b = emitter_basis(c);
    const Eigen::MatrixXcd m = omega_matrix(c, k, HMode::Exact);
    const Eigen::VectorXcd vin = leg_vector(b, c, k, HMode::Exact, +1);
    return -I * resolvent_contraction(m, vin, vin);
}

RTPoint rt_point(const SystemConfig& c, double k, HMode mode) {
    switch (c.model) {
    case Model::TwoLevel:
        return rt_two_level(k, c.gamma_at(0));
    case Model::JaynesCummings:
        return rt_jc(k, c.jc->g, c.gamma_at(0));
    case Model::TwoLevelArray:
        return rt_array(c, k, mode);
    case Model::MirrorTwoLevel: {
        RTPoint p;
        p.k = k;
        p.r = rt_mirror(c, k);
        p.t = 0.0;  // half-ended waveguide: everything reflects
        return p;
    }
    case Model::RydbergEitArray:
        return rt_eit_array(c, k, mode);
    }
    throw Error(Errc::InvalidConfig, "unknown model");
}

}  // namespace wgqed
