#include "wgqed/greens.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wgqed {

EmitterBasis emitter_basis(const SystemConfig& c) {
    EmitterBasis b;
    const int n = c.n_emitters();
    switch (c.model) {
    case Model::TwoLevel: {
        b.dim = 1;
        b.positions = Eigen::VectorXd::Zero(1);
        b.sqrt_gamma = Eigen::VectorXd::Constant(1, std::sqrt(c.gamma_at(0)));
        b.diagonal = Eigen::VectorXcd::Constant(1, Complex(0.0, -c.gamma_f_at(0)));
        b.static_coupling = Eigen::MatrixXcd::Zero(1, 1);
        b.hardcore = {true};
        b.labels = {"e1"};
        break;
    }
    case Model::JaynesCummings: {
        b.dim = 2;
        b.positions = Eigen::VectorXd::Zero(2);
        b.sqrt_gamma = Eigen::VectorXd::Zero(2);
        b.sqrt_gamma(0) = std::sqrt(c.gamma_at(0));  // waveguide couples to the cavity
        b.diagonal = Eigen::VectorXcd::Zero(2);
        b.diagonal(0) = Complex(c.jc->delta_c, -c.gamma_f_at(0));
        b.diagonal(1) = Complex(c.jc->delta_e, -c.gamma_f_at(0));
        b.static_coupling = Eigen::MatrixXcd::Zero(2, 2);
        b.static_coupling(0, 1) = b.static_coupling(1, 0) = c.jc->g;
        b.hardcore = {false, true};
        b.labels = {"cavity", "atom"};
        break;
    }
    case Model::TwoLevelArray: {
        b.dim = n;
        b.positions = Eigen::Map<const Eigen::VectorXd>(c.positions.data(), n);
        b.sqrt_gamma.resize(n);
        b.diagonal.resize(n);
        for (int i = 0; i < n; ++i) {
            b.sqrt_gamma(i) = std::sqrt(c.gamma_at(i));
            b.diagonal(i) = Complex(0.0, -c.gamma_f_at(i));
        }
        b.static_coupling = Eigen::MatrixXcd::Zero(n, n);
        b.hardcore.assign(n, true);
        b.labels.resize(n);
        for (int i = 0; i < n; ++i) b.labels[i] = "e" + std::to_string(i + 1);
        break;
    }
    case Model::MirrorTwoLevel: {
        b.dim = 2;
        b.positions.resize(2);
        b.positions << c.mirror->x0, 0.0;
        b.sqrt_gamma.resize(2);
        b.sqrt_gamma << std::sqrt(c.gamma_at(0)), std::sqrt(c.mirror->gamma_b);
        b.diagonal.resize(2);
        b.diagonal << Complex(0.0, -c.gamma_f_at(0)), Complex(0.0, 0.0);
        b.static_coupling = Eigen::MatrixXcd::Zero(2, 2);
        b.hardcore = {true, false};  // the mirror mode is a plain boson
        b.labels = {"e1", "mirror"};
        break;
    }
    case Model::RydbergEitArray: {
        b.dim = 2 * n;
        b.positions.resize(2 * n);
        b.sqrt_gamma = Eigen::VectorXd::Zero(2 * n);
        b.diagonal.resize(2 * n);
        b.static_coupling = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
        const RydbergParams& r = *c.rydberg;
        for (int i = 0; i < n; ++i) {
            b.positions(i) = c.positions[i];
            b.positions(n + i) = c.positions[i];
            b.sqrt_gamma(i) = std::sqrt(c.gamma_at(i));
            b.diagonal(i) = Complex(r.delta_e, -c.gamma_f_at(i));
            b.diagonal(n + i) = Complex(r.delta_s, 0.0);
            b.static_coupling(i, n + i) = r.omega;
            b.static_coupling(n + i, i) = r.omega;
        }
        b.hardcore.assign(2 * n, true);
        b.labels.resize(2 * n);
        for (int i = 0; i < n; ++i) {
            b.labels[i] = "e" + std::to_string(i + 1);
            b.labels[n + i] = "s" + std::to_string(i + 1);
        }
        break;
    }
    }
    return b;
}

EffectiveHamiltonian build_h0(const SystemConfig& c, Complex omega, HMode mode) {
    EffectiveHamiltonian h;
    h.basis = emitter_basis(c);
    h.mode = mode;
    h.omega = mode == HMode::Exact ? omega : Complex(0.0, 0.0);
    const EmitterBasis& b = h.basis;
    const int d = b.dim;
    Eigen::MatrixXcd m = b.static_coupling;
    m.diagonal() += b.diagonal;
    for (int i = 0; i < d; ++i) {
        const double gi = b.sqrt_gamma(i);
        if (gi == 0.0) continue;
        for (int j = i; j < d; ++j) {
            const double gj = b.sqrt_gamma(j);
            if (gj == 0.0) continue;
            const double dist = std::abs(b.positions(i) - b.positions(j));
            // Propagation phase e^{i(k0+omega)|x_i-x_j|}; its carrier part is
            // reduced mod 2*pi to survive large k0.
            Complex phase = std::exp(I * reduce_phase(c.k0, dist));
            if (mode == HMode::Exact) phase *= std::exp(I * omega * dist);
            const Complex w = -I * gi * gj * phase;
            m(i, j) += w;
            if (j != i) m(j, i) += w;
        }
    }
    h.matrix = std::move(m);
    return h;
}

Eigen::MatrixXcd resolvent_matrix(const EmitterBasis&, const Eigen::MatrixXcd& h, Complex omega) {
    const int d = static_cast<int>(h.rows());
    Eigen::MatrixXcd m = -h;
    m.diagonal().array() += omega;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv(d - 1) < 1e-12 * std::max(1.0, sv(0))) {
        throw Error(Errc::SingularResolvent, "omega within 1e-12 of an eigenvalue");
    }
    Eigen::MatrixXcd g = m.partialPivLu().inverse();
    return g;
}

Eigen::MatrixXcd green(const SystemConfig& c, Complex omega, HMode mode) {
    const EffectiveHamiltonian h = build_h0(c, omega, mode);
    return resolvent_matrix(h.basis, h.matrix, omega);
}

namespace {

struct LimitSolve {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd;
    double smax;
    bool near_singular;
};

LimitSolve limit_factor(const Eigen::MatrixXcd& m) {
    LimitSolve s{Eigen::JacobiSVD<Eigen::MatrixXcd>(m, Eigen::ComputeFullU | Eigen::ComputeFullV),
                 0.0, false};
    s.smax = s.svd.singularValues()(0);
    const int d = static_cast<int>(m.rows());
    s.near_singular = s.svd.singularValues()(d - 1) < 1e-12 * std::max(1.0, s.smax);
    return s;
}

Eigen::VectorXcd limit_solve(const LimitSolve& s, const Eigen::VectorXcd& v) {
    const auto& sv = s.svd.singularValues();
    const int d = static_cast<int>(sv.size());
    const double cut = 1e-12 * std::max(1.0, s.smax);
    Eigen::VectorXcd uv = s.svd.matrixU().adjoint() * v;
    for (int i = 0; i < d; ++i) {
        if (sv(i) < cut) {
            if (std::abs(uv(i)) > 1e-10 * v.norm()) {
                throw Error(Errc::SingularResolvent,
                            "resolvent limit does not exist (source couples to a dark pole)");
            }
            uv(i) = 0.0;
        } else {
            uv(i) /= sv(i);
        }
    }
    return s.svd.matrixV() * uv;
}

}  // namespace

Eigen::VectorXcd resolvent_solve(const Eigen::MatrixXcd& m_omega, const Eigen::VectorXcd& v) {
    const LimitSolve s = limit_factor(m_omega);
    if (!s.near_singular) return m_omega.partialPivLu().solve(v);
    return limit_solve(s, v);
}

Complex resolvent_contraction(const Eigen::MatrixXcd& m_omega, const Eigen::VectorXcd& w,
                              const Eigen::VectorXcd& v) {
    return w.transpose() * resolvent_solve(m_omega, v);
}

Eigen::MatrixXcd Spectrum::propagator(double t) const {
    const int d = dim();
    Eigen::VectorXcd phases(d);
    for (int l = 0; l < d; ++l) phases(l) = std::exp(-I * eigenvalues(l) * t);
    return right * phases.asDiagonal() * left.adjoint();
}

Spectrum eigendecompose(const EffectiveHamiltonian& h) {
    if (h.mode != HMode::Markov) {
        throw Error(Errc::InvalidConfig, "eigendecompose requires a Markov Hamiltonian");
    }
    const int d = static_cast<int>(h.matrix.rows());
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(h.matrix);
    if (solver.info() != Eigen::Success) {
        throw Error(Errc::DefectiveMatrix, "eigensolver failed");
    }
    Eigen::VectorXcd eps = solver.eigenvalues();
    Eigen::MatrixXcd v = solver.eigenvectors();

    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (eps(a).real() != eps(b).real()) return eps(a).real() < eps(b).real();
        return eps(a).imag() < eps(b).imag();
    });
    Spectrum s;
    s.eigenvalues.resize(d);
    s.right.resize(d, d);
    for (int l = 0; l < d; ++l) {
        s.eigenvalues(l) = eps(order[l]);
        s.right.col(l) = v.col(order[l]);
    }

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(s.right);
    const auto& sv = svd.singularValues();
    if (!(sv(d - 1) > 0.0) || sv(0) / sv(d - 1) > 1e12) {
        throw Error(Errc::DefectiveMatrix, "eigenvector matrix condition number exceeds 1e12");
    }
    s.left = s.right.inverse().adjoint();

    for (int l = 0; l < d; ++l) {
        int imax = 0;
        double best = 0.0;
        for (int i = 0; i < d; ++i) {
            const double a = std::abs(s.right(i, l));
            if (a > best * (1.0 + 1e-12)) {
                best = a;
                imax = i;
            }
        }
        const Complex z = s.right(imax, l);
        if (best == 0.0) continue;
        const Complex phase = std::conj(z / best);
        s.right.col(l) *= phase;
        s.left.col(l) *= phase;
    }
    return s;
}

Complex retardation_series(const SystemConfig& c, double t, int branch) {
    if (c.n_emitters() != 2) {
        throw Error(Errc::InvalidConfig, "retardation series is defined for two emitters");
    }
    if (t < 0.0) return Complex(0.0, 0.0);  // theta(T) kills the whole series
    const double d = c.spacing();
    const double nmax_f = std::floor(t / d);
    if (nmax_f > 1e6) throw Error(Errc::SeriesOverflow, "floor(T/d) exceeds 1e6 terms");
    const long nmax = static_cast<long>(nmax_f);
    const double rate = c.gamma_at(0) + c.gamma_f_at(0);
    const double phase0 = reduce_phase(c.k0, d);
    const double log_mag0 = std::log(c.gamma_at(0)) + rate * d;
    const double sgn_phase = branch >= 0 ? 0.0 : pi;

    // Terms z^n/n! with z = branch * Gamma e^{i k0 d + rate*d} (T - n d); magnitudes
    // through lgamma, phases accumulated separately, Kahan-summed.
    Complex sum{1.0, 0.0};
    Complex comp{0.0, 0.0};
    for (long n = 1; n <= nmax; ++n) {
        const double tau = t - n * d;
        if (tau < 0.0) break;
        if (tau == 0.0) continue;  // (T - n d)^n = 0 for n >= 1
        const double log_mag =
            n * (log_mag0 + std::log(tau)) - std::lgamma(static_cast<double>(n) + 1.0);
        const double arg = n * (phase0 + sgn_phase);
        if (log_mag > 700.0) throw Error(Errc::SeriesOverflow, "retardation term overflows");
        const Complex term = std::exp(log_mag) * Complex(std::cos(arg), std::sin(arg));
        const Complex y = term - comp;
        const Complex t2 = sum + y;
        comp = (t2 - sum) - y;
        sum = t2;
    }
    return sum;
}

}  // namespace wgqed
