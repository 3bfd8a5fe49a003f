// transient.hpp — Time-domain amplitudes: spontaneous emission, single-photon
// absorption, optimal stimulated emission, retarded array dynamics, and
// Rydberg-EIT polariton transport.

#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "wgqed/config.hpp"
#include "wgqed/greens.hpp"
#include "wgqed/two_photon.hpp"
#include "wgqed/types.hpp"

namespace wgqed {

// Emitted single-photon amplitude of an initially excited two-level emitter.
// Momentum space: sqrt(G/2pi)(e^{-i s p T} - e^{-G T})/(s p + i G);
// coordinate space: -i sqrt(G) e^{-G(T - s x)} theta(T - s x) theta(s x).
Complex spontaneous_momentum(double gamma, double p, double t, Direction dir);
Complex spontaneous_field(double gamma, double x, double t, Direction dir);

// Excited-state amplitude for a right-moving Lorentzian packet (width 1/g,
// front at x0 < 0) absorbed by a ground-state two-level emitter.
Complex absorption_amplitude(double gamma, double gamma_wp, double x0, double t);

// Stimulated-emission kernel W(x, y) (the delta term excluded) on x, y <= 0.
double stimulated_kernel(double gamma, double x, double y);

struct StimulatedOptimum {
    double lambda_max{0.0};          // Richardson-extrapolated largest eigenvalue
    double lambda_coarse{0.0};
    double lambda_fine{0.0};
    std::vector<double> x;           // fine-grid abscissae
    std::vector<double> f;           // optimal incident packet on the fine grid
    double l2_distance_analytic{0.0};  // distance to 2 sqrt(G) e^{2 G x} theta(-x)
};

// Nystrom discretization (trapezoid) on [-box/gamma... box], grid doubling with
// Richardson extrapolation. Throws GridTooCoarse when doubling moves the
// eigenvalue by more than 1e-4.
StimulatedOptimum stimulated_optimum(double gamma, double box = 12.0, int n_coarse = 1201);

// Excitation amplitude A(j, T) for emitter 1 initially excited. Exact mode uses
// the retardation series for N = 2 and frequency quadrature otherwise.
Complex excitation_amplitude(const SystemConfig& config, int site, double t, HMode mode);

// Waveguide field amplitude emitted during that evolution (theta-gated
// superposition of the emitter amplitudes).
Complex field_amplitude(const SystemConfig& config, double x, double t, Direction dir,
                        HMode mode);

// Cached single-packet solver: Markov excitation amplitudes and the total
// waveguide field (free packet plus re-emission) for one incident Lorentzian.
class PacketAmplitudes {
public:
    PacketAmplitudes(const SystemConfig& config, const Wavepacket& packet);

    Eigen::VectorXcd at(double t) const;
    Complex field(double x, double t, Direction dir) const;

private:
    SystemConfig config_;
    Wavepacket packet_;
    EmitterBasis basis_;
    Spectrum spectrum_;
    std::vector<double> arrival_;
    Complex envelope_phase_;
};

// Markov amplitude of excitation (component index in the single-excitation
// basis) at time T for a single incident Lorentzian packet. Covers the
// Rydberg-EIT polariton transport and the array absorption cross-checks.
Eigen::VectorXcd wavepacket_excitation(const SystemConfig& config, const Wavepacket& packet,
                                       double t);
Complex polariton_single(const SystemConfig& config, const Wavepacket& packet, int site,
                         int species, double t);

// Total waveguide field for the single-packet problem: free packet plus
// re-emission from the excited components.
Complex scattered_field(const SystemConfig& config, const Wavepacket& packet, double x,
                        double t, Direction dir);

enum class PairGeometry { Co, Counter };
enum class PairEvaluator { Auto, Spectral, Propagator };

// Two-excitation amplitude on the ordered pair basis for two incident packets,
// convention psi(1,2) = A1 A2 + A2 A1 + interaction (hardcore pairs excluded).
// Spectral: partial fractions over the interacting pair spectrum. Propagator:
// RK4 integration of the driven pair Schrodinger equation (oracle path and
// default for large arrays).
Eigen::MatrixXcd polariton_pair_map(const SystemConfig& config, const Wavepacket& first,
                                    const Wavepacket& second, PairGeometry geometry, double t,
                                    PairEvaluator evaluator = PairEvaluator::Auto);

// Snapshots at several instants; the propagator path integrates once.
std::vector<Eigen::MatrixXcd> polariton_pair_maps(const SystemConfig& config,
                                                  const Wavepacket& first,
                                                  const Wavepacket& second,
                                                  PairGeometry geometry,
                                                  const std::vector<double>& times,
                                                  PairEvaluator evaluator = PairEvaluator::Auto);
Complex polariton_pair(const SystemConfig& config, const Wavepacket& first,
                       const Wavepacket& second, int site1, int species1, int site2,
                       int species2, double t, PairGeometry geometry,
                       PairEvaluator evaluator = PairEvaluator::Auto);

}  // namespace wgqed
