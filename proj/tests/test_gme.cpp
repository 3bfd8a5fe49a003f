#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "wgqed/gme.hpp"
#include "wgqed/transient.hpp"

using namespace wgqed;

namespace {

SystemConfig two_level_cfg(double gamma = 1.0, double gamma_f = 0.0) {
    SystemConfig c;
    c.model = Model::TwoLevel;
    c.gamma = {gamma};
    c.gamma_f = {gamma_f};
    c.k0 = 321.0;
    return validate(c);
}

SystemConfig array_cfg(int n, double d, double k0, double gamma_f = 0.0) {
    SystemConfig c;
    c.model = Model::TwoLevelArray;
    c.gamma = {1.0};
    c.gamma_f = {gamma_f};
    c.k0 = k0;
    c.positions.clear();
    for (int i = 0; i < n; ++i) c.positions.push_back(i * d);
    return validate(c);
}

Wavepacket right_packet(double width, double center) {
    Wavepacket w;
    w.direction = Direction::Right;
    w.width_rate = width;
    w.center = center;
    return w;
}

}  // namespace

TEST_CASE("undriven excited population decays at 2(Gamma + Gamma_f)") {
    const SystemConfig c = two_level_cfg(1.0, 0.3);
    const gme::Generator gen = gme::lindblad_generator(c);
    REQUIRE(gen.space.dim() == 2);
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(2, 2);
    rho(1, 1) = 1.0;  // excited occupation state
    // one application of the dissipator reproduces the rate
    const Eigen::MatrixXcd drho = gen.apply(rho);
    CHECK(std::abs(drho(1, 1) - Complex(-2.0 * 1.3, 0.0)) < 1e-12);
    CHECK(std::abs(drho(0, 0) - Complex(2.0 * 1.3, 0.0)) < 1e-12);
}

TEST_CASE("collective decay matrix has the dark/bright split") {
    const SystemConfig c = array_cfg(2, 1.0, 2.0 * two_pi);
    const gme::Generator gen = gme::lindblad_generator(c);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gen.collective_rate);
    CHECK(std::abs(es.eigenvalues()(0) - 0.0) < 1e-12);
    CHECK(std::abs(es.eigenvalues()(1) - 4.0) < 1e-12);
}

TEST_CASE("trace is conserved by the dissipator on random states") {
    const SystemConfig c = array_cfg(2, 0.4, 3.3, 0.2);
    const gme::Generator gen = gme::lindblad_generator(c);
    const int d = gen.space.dim();
    std::mt19937 rng(5);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::MatrixXcd a(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) a(i, j) = Complex(gauss(rng), gauss(rng));
        }
        const Eigen::MatrixXcd rho = a * a.adjoint();
        CHECK(std::abs(gen.apply(rho).trace()) < 1e-10 * rho.trace().real());
    }
}

TEST_CASE("driven Hamiltonian is Hermitian with the Lorentzian envelope") {
    const SystemConfig c = array_cfg(2, 0.4, 5.0);
    const Wavepacket wp = right_packet(0.7, -1.0);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> uni(0.0, 6.0);
    for (int i = 0; i < 5; ++i) {
        const Eigen::MatrixXcd h = gme::driven_hamiltonian(c, wp, uni(rng));
        CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
    }
    // J = 0 means static: before arrival the drive part vanishes
    const Eigen::MatrixXcd h0 = gme::driven_hamiltonian(c, wp, 0.5);
    const Eigen::MatrixXcd h1 = gme::driven_hamiltonian(c, wp, 0.9);
    CHECK((h0 - h1).cwiseAbs().maxCoeff() < 1e-14);
    // envelope decays at the packet width after arrival
    const gme::Generator gen = gme::lindblad_generator(c);
    const double t1 = 2.0, t2 = 3.0;
    const double r1 = gme::drive_raising(gen, wp, t1).cwiseAbs().maxCoeff();
    const double r2 = gme::drive_raising(gen, wp, t2).cwiseAbs().maxCoeff();
    CHECK(r2 / r1 == doctest::Approx(std::exp(-0.7 * (t2 - t1))).epsilon(1e-10));
}

TEST_CASE("hierarchy: lowest order ignores the drive and traces stay pinned") {
    const SystemConfig c = two_level_cfg();
    const Wavepacket wp = right_packet(1.0, -1.0);
    std::vector<double> times{1.0, 2.0, 4.0};
    const gme::HierarchyResult res = gme::evolve_hierarchy(c, wp, 2, 4.0, 0.005, times);
    for (const auto& snap : res.snapshots) {
        const Eigen::MatrixXcd& r00 = snap.comp.at({0, 0});
        CHECK(std::abs(r00(0, 0) - 1.0) < 1e-12);  // ground stays ground undriven
        for (const auto& [key, mat] : snap.comp) {
            const double tr = std::abs(mat.trace());
            if (key.first == 0 && key.second == 0) {
                CHECK(std::abs(tr - 1.0) < 1e-8);
            } else {
                CHECK(tr < 1e-8);
            }
            const Eigen::MatrixXcd& conj_comp = snap.comp.at({key.second, key.first});
            CHECK((mat.adjoint() - conj_comp).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    CHECK(res.halving_error < 1e-6);
}

TEST_CASE("single-photon population matches the scattering amplitude") {
    const SystemConfig c = two_level_cfg();
    const Wavepacket wp = right_packet(1.0, -1.0);
    std::vector<double> times;
    for (int i = 1; i <= 20; ++i) times.push_back(0.5 * i);
    const gme::HierarchyResult res = gme::evolve_hierarchy(c, wp, 2, 10.0, 0.004, times);
    for (const auto& snap : res.snapshots) {
        const Eigen::MatrixXcd rho = gme::reduced_density(snap, 1);
        const double pe = rho(1, 1).real();
        const double oracle = std::norm(absorption_amplitude(1.0, 1.0, -1.0, snap.t));
        CHECK(std::abs(pe - oracle) < 1e-4);
        CHECK(std::abs(rho.trace() - 1.0) < 1e-8);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
        CHECK(es.eigenvalues().minCoeff() > -1e-6);
    }
}

TEST_CASE("two-emitter single-photon populations match the transient amplitudes") {
    const double d = 1e-4;
    SystemConfig c = array_cfg(2, d, (0.7 * two_pi) / d);
    const Wavepacket wp = right_packet(0.8, -1.0);
    std::vector<double> times{1.0, 2.5, 4.0};
    const gme::HierarchyResult res = gme::evolve_hierarchy(c, wp, 2, 4.0, 0.004, times);
    const PacketAmplitudes run(c, wp);
    for (const auto& snap : res.snapshots) {
        const Eigen::MatrixXcd rho = gme::reduced_density(snap, 1);
        const Eigen::VectorXcd amp = run.at(snap.t);
        // occupation states: index 1 = site 2 excited, index 2 = site 1 excited
        const double p1 = rho(2, 2).real();
        const double p2 = rho(1, 1).real();
        CHECK(std::abs(p1 - std::norm(amp(0))) < 1e-3);
        CHECK(std::abs(p2 - std::norm(amp(1))) < 1e-3);
    }
}

TEST_CASE("two-photon input populates the doubly excited state consistently") {
    const double d = 1e-4;
    SystemConfig c = array_cfg(2, d, (0.5 * pi) / d);
    const Wavepacket wp = right_packet(0.5, -2.0);
    std::vector<double> times{2.0, 3.5, 5.0};
    const gme::HierarchyResult res = gme::evolve_hierarchy(c, wp, 4, 5.0, 0.004, times);
    for (const auto& snap : res.snapshots) {
        const Eigen::MatrixXcd rho = gme::reduced_density(snap, 2);
        CHECK(std::abs(rho.trace() - 1.0) < 1e-7);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
        CHECK(es.eigenvalues().minCoeff() > -1e-6);
        // cross-validate the pair population against the two-excitation amplitude
        const Eigen::MatrixXcd pair =
            polariton_pair_map(c, wp, wp, PairGeometry::Co, snap.t, PairEvaluator::Spectral);
        const double p_pair = 0.5 * std::norm(pair(0, 1));
        const double rho_pair = rho(3, 3).real();
        CHECK(std::abs(p_pair - rho_pair) < 1e-3);
    }
}

TEST_CASE("component orders beyond the request are never created") {
    const SystemConfig c = two_level_cfg();
    const Wavepacket wp = right_packet(1.0, -1.0);
    const gme::HierarchyResult res = gme::evolve_hierarchy(c, wp, 2, 1.0, 0.005, {1.0});
    CHECK(res.snapshots.back().comp.count({2, 2}) == 0);
    CHECK_THROWS_AS(gme::reduced_density(res.snapshots.back(), 2), Error);
}

TEST_CASE("step-size preconditions and estimates") {
    const SystemConfig c = two_level_cfg();
    const Wavepacket wp = right_packet(1.0, -1.0);
    CHECK_THROWS_AS(gme::evolve_hierarchy(c, wp, 2, 1.0, 0.5, {1.0}), Error);
    const gme::HierarchyResult res = gme::evolve_hierarchy(c, wp, 2, 1.0, 0.005, {1.0});
    CHECK(res.halving_error < 1e-6);
}

TEST_CASE("RK4 converges at fourth order against the analytic population") {
    const SystemConfig c = two_level_cfg();
    const Wavepacket wp = right_packet(1.0, -1.0);
    // center -1 keeps the envelope switch-on exactly on the step grid
    const double t_end = 4.0;
    std::vector<double> errs;
    for (double dt : {0.01, 0.005, 0.0025}) {
        const gme::HierarchyResult res = gme::evolve_hierarchy(c, wp, 2, t_end, dt, {t_end});
        const Eigen::MatrixXcd rho = gme::reduced_density(res.snapshots.back(), 1);
        const double oracle = std::norm(absorption_amplitude(1.0, 1.0, -1.0, t_end));
        errs.push_back(std::abs(rho(1, 1).real() - oracle));
    }
    const double slope1 = std::log2(errs[0] / errs[1]);
    const double slope2 = std::log2(errs[1] / errs[2]);
    CHECK(std::abs(slope1 - 4.0) < 0.3);
    CHECK(std::abs(slope2 - 4.0) < 0.3);
}

TEST_CASE("JC space is the cutoff cavity ladder") {
    SystemConfig c;
    c.model = Model::JaynesCummings;
    c.gamma = {1.0};
    c.gamma_f = {0.0};
    c.k0 = 10.0;
    c.jc = JcParams{1.0, 0.0, 0.0};
    c = validate(c);
    const gme::Generator gen = gme::lindblad_generator(c);
    CHECK(gen.space.dim() == 10);  // cavity 0..4 times the two-level atom
    const Wavepacket wp = right_packet(0.5, -1.0);
    const gme::HierarchyResult res = gme::evolve_hierarchy(c, wp, 2, 3.0, 0.004, {3.0});
    const Eigen::MatrixXcd rho = gme::reduced_density(res.snapshots.back(), 1);
    CHECK(std::abs(rho.trace() - 1.0) < 1e-8);
    // cutoff populations stay negligible for a single photon
    double top = 0.0;
    for (int i = 0; i < gen.space.dim(); ++i) {
        if (gen.space.states[i][0] >= 3) top += rho(i, i).real();
    }
    CHECK(top < 1e-8);
}
