#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "wgqed/config.hpp"
#include "wgqed/greens.hpp"

using namespace wgqed;

namespace {

SystemConfig two_level(double gamma = 1.0, double gamma_f = 0.0) {
    SystemConfig c;
    c.model = Model::TwoLevel;
    c.gamma = {gamma};
    c.gamma_f = {gamma_f};
    c.k0 = 1000.0;
    return validate(c);
}

SystemConfig array2(double d, double k0, double gamma = 1.0, double gamma_f = 0.0) {
    SystemConfig c;
    c.model = Model::TwoLevelArray;
    c.gamma = {gamma};
    c.gamma_f = {gamma_f};
    c.k0 = k0;
    c.positions = {0.0, d};
    return validate(c);
}

SystemConfig rydberg1(double omega, double gamma = 1.0, double gamma_f = 0.0) {
    SystemConfig c;
    c.model = Model::RydbergEitArray;
    c.gamma = {gamma};
    c.gamma_f = {gamma_f};
    c.k0 = 100.0;
    c.positions = {0.0};
    c.rydberg = RydbergParams{};
    c.rydberg->omega = omega;
    return validate(c);
}

}  // namespace

TEST_CASE("two-level Markov Hamiltonian is the bare decay") {
    const EffectiveHamiltonian h = build_h0(two_level(), {0.0, 0.0}, HMode::Markov);
    REQUIRE(h.matrix.rows() == 1);
    CHECK(std::abs(h.matrix(0, 0) - Complex(0.0, -1.0)) < 1e-15);
}

TEST_CASE("N=2 array at k0 d = 2 pi n has the uniform Markov matrix") {
    const SystemConfig c = array2(1.0, 2.0 * two_pi);
    const EffectiveHamiltonian h = build_h0(c, {0.0, 0.0}, HMode::Markov);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            CHECK(std::abs(h.matrix(i, j) - Complex(0.0, -1.0)) < 1e-12);
        }
    }
}

TEST_CASE("single-site Rydberg block reads off the couplings") {
    const EffectiveHamiltonian h = build_h0(rydberg1(1.0), {0.0, 0.0}, HMode::Markov);
    REQUIRE(h.matrix.rows() == 2);
    CHECK(std::abs(h.matrix(0, 0) - Complex(0.0, -1.0)) < 1e-14);
    CHECK(std::abs(h.matrix(0, 1) - Complex(1.0, 0.0)) < 1e-14);
    CHECK(std::abs(h.matrix(1, 0) - Complex(1.0, 0.0)) < 1e-14);
    CHECK(std::abs(h.matrix(1, 1)) < 1e-14);
}

TEST_CASE("effective Hamiltonians stay complex-symmetric") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dk(0.2, 4.0);
    for (int trial = 0; trial < 8; ++trial) {
        const SystemConfig c = array2(dk(rng), dk(rng), dk(rng), 0.3 * dk(rng));
        const EffectiveHamiltonian h = build_h0(c, Complex(dk(rng), 0.0), HMode::Exact);
        CHECK((h.matrix - h.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("scalar resolvent") {
    const Eigen::MatrixXcd g = green(two_level(), {0.0, 0.0}, HMode::Markov);
    CHECK(std::abs(g(0, 0) - Complex(0.0, -1.0)) < 1e-14);  // G(0) = -i/Gamma
    const Eigen::MatrixXcd g2 = green(two_level(), {1.5, 0.0}, HMode::Markov);
    CHECK(std::abs(g2(0, 0) - 1.0 / Complex(1.5, 1.0)) < 1e-14);
}

TEST_CASE("JC resolvent matches the printed denominators") {
    SystemConfig c;
    c.model = Model::JaynesCummings;
    c.jc = JcParams{1.3, 0.0, 0.0};
    c.k0 = 50.0;
    c = validate(c);
    const double g = 1.3;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dk(-3.0, 3.0);
    for (int trial = 0; trial < 6; ++trial) {
        const double k = dk(rng);
        const Eigen::MatrixXcd gm = green(c, {k, 0.0}, HMode::Markov);
        Eigen::MatrixXcd expect(2, 2);
        expect << Complex(k, 1.0), -g, -g, Complex(k, 0.0);
        const Eigen::MatrixXcd inv = expect.inverse();
        CHECK((gm - inv).cwiseAbs().maxCoeff() < 1e-12);
        // detected pole pair at k(k + i Gamma) = g^2
        const Complex det = Complex(k, 1.0) * k - g * g;
        CHECK(std::abs(gm(1, 1) * det - Complex(k, 1.0)) < 1e-10);
    }
}

TEST_CASE("dark antisymmetric state makes the resolvent singular") {
    const SystemConfig c = array2(1.0, 2.0 * two_pi);
    CHECK_THROWS_AS(green(c, {0.0, 0.0}, HMode::Markov), Error);
}

TEST_CASE("resolvent residual on a real grid") {
    const SystemConfig c = array2(0.7, 3.1, 1.2, 0.2);
    for (int i = 0; i < 40; ++i) {
        const Complex w(-4.0 + 8.0 * i / 39.0, 0.0);
        const EffectiveHamiltonian h = build_h0(c, w, HMode::Exact);
        const Eigen::MatrixXcd g = green(c, w, HMode::Exact);
        Eigen::MatrixXcd m = -h.matrix;
        m.diagonal().array() += w;
        const double resid =
            ((m * g) - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff();
        CHECK(resid < 1e-12);
    }
}

TEST_CASE("Markov and exact matrices agree to first order in omega N d") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uni(0.2, 1.5);
    for (int trial = 0; trial < 6; ++trial) {
        const double d = 0.01 * uni(rng);
        SystemConfig c;
        c.model = Model::TwoLevelArray;
        c.gamma = {uni(rng)};
        c.gamma_f = {0.0};
        c.k0 = uni(rng);
        c.positions = {0.0, d, 2.0 * d, 3.0 * d};
        c = validate(c);
        const int n = 4;
        const double omega = 0.1 / (n * d) * uni(rng);
        const Eigen::MatrixXcd he = build_h0(c, {omega, 0.0}, HMode::Exact).matrix;
        const Eigen::MatrixXcd hm = build_h0(c, {0.0, 0.0}, HMode::Markov).matrix;
        const double bound = c.gamma[0] * n * (std::abs(omega) * n * d);
        CHECK((he - hm).cwiseAbs().maxCoeff() <= bound + 1e-14);
    }
}

TEST_CASE("bi-orthogonal spectrum for the symmetric pair") {
    const SystemConfig c = array2(1.0, 2.0 * two_pi);
    const Spectrum s = eigendecompose(build_h0(c, {0.0, 0.0}, HMode::Markov));
    // eigenvalues {0, -2i Gamma}; sorted by (Re, Im): -2i first
    CHECK(std::abs(s.eigenvalues(0) - Complex(0.0, -2.0)) < 1e-12);
    CHECK(std::abs(s.eigenvalues(1)) < 1e-12);
    // symmetric/antisymmetric vectors (1, +-1)/sqrt(2) with positive-real phase
    CHECK(std::abs(std::abs(s.right(0, 0)) - 1.0 / std::sqrt(2.0)) < 1e-12);
    CHECK(std::abs(s.right(0, 0) * s.right(1, 1) - s.right(1, 0) * s.right(0, 1)) > 0.1);
    const Eigen::MatrixXcd overlap = s.left.adjoint() * s.right;
    CHECK((overlap - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("single-site spectrum is trivial") {
    const Spectrum s = eigendecompose(build_h0(two_level(), {0.0, 0.0}, HMode::Markov));
    CHECK(std::abs(s.eigenvalues(0) - Complex(0.0, -1.0)) < 1e-14);
    CHECK(std::abs(s.right(0, 0) - 1.0) < 1e-14);
    CHECK(std::abs(s.left(0, 0) - 1.0) < 1e-14);
}

TEST_CASE("single-site Rydberg eigenvalues solve the quadratic") {
    const double omega = 1.0, gamma = 1.0;
    const Spectrum s = eigendecompose(build_h0(rydberg1(omega, gamma), {0.0, 0.0},
                                               HMode::Markov));
    // roots of eps^2 + i Gamma eps - Omega^2 = 0
    for (int l = 0; l < 2; ++l) {
        const Complex e = s.eigenvalues(l);
        CHECK(std::abs(e * e + I * gamma * e - omega * omega) < 1e-12);
    }
}

TEST_CASE("spectrum invariants on random Markov configs") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> uni(0.3, 2.5);
    for (int trial = 0; trial < 10; ++trial) {
        SystemConfig c;
        c.model = Model::TwoLevelArray;
        const int n = 2 + trial % 4;
        c.gamma.clear();
        for (int i = 0; i < n; ++i) c.gamma.push_back(uni(rng));
        c.gamma_f = {0.1 * uni(rng)};
        c.k0 = uni(rng);
        c.positions.clear();
        const double d = uni(rng);
        for (int i = 0; i < n; ++i) c.positions.push_back(i * d);
        c = validate(c);
        const EffectiveHamiltonian h = build_h0(c, {0.0, 0.0}, HMode::Markov);
        const Spectrum s = eigendecompose(h);
        const Eigen::MatrixXcd overlap = s.left.adjoint() * s.right;
        CHECK((overlap - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
        Eigen::MatrixXcd completeness = Eigen::MatrixXcd::Zero(n, n);
        for (int l = 0; l < n; ++l) {
            completeness += s.right.col(l) * s.left.col(l).adjoint();
        }
        CHECK((completeness - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(std::abs(s.eigenvalues.sum() - h.matrix.trace()) < 1e-10);
        for (int l = 0; l < n; ++l) CHECK(s.eigenvalues(l).imag() <= 1e-10);
    }
}

namespace {

// Delay-differential oracle for the two-emitter amplitudes:
//   A1' = -(Gf+G) A1 - G e^{i k0 d} A2(t - d),  A2' = -(Gf+G) A2 - G e^{i k0 d} A1(t - d)
// RK4 with the delay aligned on the grid.
struct DelayOracle {
    std::vector<Complex> a1, a2;
    double dt;

    DelayOracle(const SystemConfig& c, double t_end, int steps_per_delay) {
        const double d = c.spacing();
        dt = d / steps_per_delay;
        const long steps = static_cast<long>(std::ceil(t_end / dt)) + 1;
        const double rate = c.gamma_at(0) + c.gamma_f_at(0);
        const Complex hop = c.gamma_at(0) * std::exp(I * reduce_phase(c.k0, d));
        a1.assign(steps + 1, Complex(0.0, 0.0));
        a2.assign(steps + 1, Complex(0.0, 0.0));
        a1[0] = 1.0;
        auto delayed = [&](const std::vector<Complex>& a, double t_query) -> Complex {
            if (t_query < 0.0) return 0.0;
            const double idx = t_query / dt;
            long i1 = static_cast<long>(std::floor(idx));
            i1 = std::max(1L, std::min(i1, static_cast<long>(a.size()) - 3));
            const double u = idx - i1;  // in [0, 1) away from the ends
            // 4-point Lagrange through i1-1 .. i1+2
            const double c0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
            const double c1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
            const double c2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
            const double c3 = (u + 1.0) * u * (u - 1.0) / 6.0;
            return c0 * a[i1 - 1] + c1 * a[i1] + c2 * a[i1 + 1] + c3 * a[i1 + 2];
        };
        for (long s = 0; s < steps; ++s) {
            const double t = s * dt;
            auto rhs = [&](double tq, Complex x1, Complex x2, Complex& d1, Complex& d2) {
                d1 = -rate * x1 - hop * delayed(a2, tq - d);
                d2 = -rate * x2 - hop * delayed(a1, tq - d);
            };
            Complex k11, k12, k21, k22, k31, k32, k41, k42;
            rhs(t, a1[s], a2[s], k11, k12);
            rhs(t + 0.5 * dt, a1[s] + 0.5 * dt * k11, a2[s] + 0.5 * dt * k12, k21, k22);
            rhs(t + 0.5 * dt, a1[s] + 0.5 * dt * k21, a2[s] + 0.5 * dt * k22, k31, k32);
            rhs(t + dt, a1[s] + dt * k31, a2[s] + dt * k32, k41, k42);
            a1[s + 1] = a1[s] + dt / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41);
            a2[s + 1] = a2[s] + dt / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42);
        }
    }

    Complex at1(double t) const { return a1[static_cast<long>(std::llround(t / dt))]; }
    Complex at2(double t) const { return a2[static_cast<long>(std::llround(t / dt))]; }
};

}  // namespace

TEST_CASE("retardation series truncates exactly below the first delay") {
    const SystemConfig c = array2(1.0, 2.0 * two_pi);
    CHECK(retardation_series(c, 0.5, +1) == Complex(1.0, 0.0));
    CHECK(retardation_series(c, 0.999999, -1) == Complex(1.0, 0.0));
}

TEST_CASE("retardation series approaches the Markov exponential for small d") {
    const double d = 1e-4;
    const SystemConfig c = array2(d, two_pi / d);  // k0 d = 2 pi
    const double t = 5.0;
    for (int branch : {+1, -1}) {
        const Complex series = retardation_series(c, t, branch);
        const Complex markov = std::exp(Complex(branch * t, 0.0) *
                                        std::exp(I * reduce_phase(c.k0, d)));
        CHECK(std::abs(series - markov) < 1e-3 * std::abs(markov));
    }
}

TEST_CASE("retardation partial sum matches the direct finite sum") {
    const SystemConfig c = array2(1.0, 2.0 * two_pi);
    const double t = 2.0;
    // n = 0..2 by hand: 1 + beta (t - d) with beta = +- e^{G d}
    for (int branch : {+1, -1}) {
        const double beta = branch * std::exp(1.0);
        const Complex expect(1.0 + beta * (t - 1.0), 0.0);
        CHECK(std::abs(retardation_series(c, t, branch) - expect) < 1e-12);
    }
}

TEST_CASE("series amplitudes agree with the delay-differential oracle") {
    const SystemConfig c = array2(1.0, 2.0 * two_pi, 1.0, 0.1);
    // The oracle carries an O(dt) endpoint error where the delayed history
    // switches on, so its accuracy floor is ~1e-6 at this resolution.
    const DelayOracle oracle(c, 6.0, 16000);
    const double rate = c.gamma_at(0) + c.gamma_f_at(0);
    for (double t : {0.5, 1.5, 2.5, 4.0, 6.0}) {
        const Complex damp = std::exp(Complex(-rate * t, 0.0));
        const Complex a1 =
            0.5 * damp * (retardation_series(c, t, +1) + retardation_series(c, t, -1));
        const Complex a2 =
            0.5 * damp * (retardation_series(c, t, -1) - retardation_series(c, t, +1));
        CHECK(std::abs(a1 - oracle.at1(t)) < 1e-5);
        CHECK(std::abs(a2 - oracle.at2(t)) < 1e-5);
    }
}

TEST_CASE("series is continuous across the delay breakpoints") {
    const SystemConfig c = array2(0.7, 1.3);
    for (int n = 1; n <= 4; ++n) {
        const double tb = n * 0.7;
        for (int branch : {+1, -1}) {
            const Complex below = retardation_series(c, tb - 5e-14, branch);
            const Complex above = retardation_series(c, tb + 5e-14, branch);
            CHECK(std::abs(below - above) < 1e-12 * std::max(1.0, std::abs(above)));
        }
    }
}

TEST_CASE("series overflow guard") {
    const SystemConfig c = array2(1e-7, 1.0);
    CHECK_THROWS_AS(retardation_series(c, 1.0, +1), Error);
}
