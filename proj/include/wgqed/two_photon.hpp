// two_photon.hpp — Two-photon S-matrices as disconnected coefficients plus smooth
// connected kernels, pair bubbles and T-matrices, coordinate-space pair
// wavefunctions, g2 correlations, and photon-pair entanglement.

#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wgqed/config.hpp"
#include "wgqed/greens.hpp"
#include "wgqed/quadrature.hpp"
#include "wgqed/single_photon.hpp"
#include "wgqed/types.hpp"

namespace wgqed {

enum class PairChannel { ReflectedPair, TransmittedPair };

// Interacting two-excitation channels: ordered pairs (a, b) of single-excitation
// components that carry a diagonal interaction (same-site hardcore, Rydberg ss).
struct PairChannelSpace {
    int n1{0};
    std::vector<std::pair<int, int>> channels;
    std::vector<double> u_value;      // regularized value (hardcore channels use u0)
    std::vector<double> u_inverse;    // 0 on hardcore channels in exact-limit mode
    std::vector<bool> is_hardcore;

    int size() const { return static_cast<int>(channels.size()); }
    int flat(int idx) const { return channels[idx].first * n1 + channels[idx].second; }
};

PairChannelSpace pair_channel_space(const SystemConfig& config);

// Cached spectral data for pair computations at fixed config.
struct PairContext {
    SystemConfig config;
    EmitterBasis basis;
    Spectrum spectrum;                // Markov single-excitation spectrum
    PairChannelSpace space;
    Eigen::MatrixXcd proj_right;      // |A| x n1^2, chi_l(a) chi_l'(b)
    Eigen::MatrixXcd proj_left;       // n1^2 x |A|, conj(chi~_l(c) chi~_l'(d))
    Eigen::VectorXcd pair_energy;     // n1^2 entries eps_l + eps_l'
};

PairContext make_pair_context(const SystemConfig& config);

struct PairBasisOperator {
    PairChannelSpace space;
    Eigen::MatrixXcd matrix;  // on the active channels
};

// Pair propagator matrix on the active channels. Markov mode: closed-form partial
// fractions over the spectrum. Exact mode: contour quadrature of
// i/(2pi) Int G(w) (x) G(E-w) dw with the Markov result subtracted analytically;
// Im E > 0 shifts the contour to dodge real-axis dark poles.
PairBasisOperator bubble(const SystemConfig& config, Complex e_total, HMode mode,
                         const QuadOptions& opts = {});

Eigen::MatrixXcd bubble_matrix(const PairContext& ctx, Complex e_total, HMode mode,
                               const QuadOptions& opts = {});

// Quadrature route for the Markov bubble (used to cross-check partial fractions).
Eigen::MatrixXcd bubble_markov_quadrature(const PairContext& ctx, Complex e_total,
                                          const QuadOptions& opts = {});

// T(E) = (U^-1 - Pi(E))^-1 on the active channels; hardcore channels enter with
// U^-1 = 0 in exact-limit mode. The Lippmann-Schwinger residual
// |(U^-1 - Pi) T - I|_max is checked to 1e-10 on every call.
PairBasisOperator tmatrix(const SystemConfig& config, Complex e_total, HMode mode,
                          const QuadOptions& opts = {});

Eigen::MatrixXcd tmatrix_from_bubble(const PairChannelSpace& space,
                                     const Eigen::MatrixXcd& pi);

// Two-photon S-matrix split: disconnected coefficients multiplying
// delta(p1-k1)delta(p2-k2) and delta(p1-k2)delta(p2-k1), plus a smooth connected
// kernel carrying one overall delta(p1+p2-k1-k2).
struct TwoPhotonKernel {
    PairChannel channel{PairChannel::ReflectedPair};
    Complex e_total{0.0, 0.0};
    double k1{0.0}, k2{0.0};
    Complex disconnected12{0.0, 0.0};
    Complex disconnected21{0.0, 0.0};
    std::function<Complex(Complex p1, Complex p2)> connected;
};

// Closed forms for the single two-level emitter and the JC emitter.
TwoPhotonKernel s2_two_level(double k1, double k2, double gamma);
TwoPhotonKernel s2_jc(double k1, double k2, double g, double gamma);

// Generic bubble -> T -> contraction pipeline. Reproduces the closed forms above
// for their models and serves the array, mirror, and Rydberg kernels.
TwoPhotonKernel pipeline_kernel(const SystemConfig& config, double k1, double k2, HMode mode,
                                PairChannel channel, Complex eta = Complex(0.0, 0.0),
                                const QuadOptions& opts = {});

TwoPhotonKernel s2_array(const SystemConfig& config, double k1, double k2, HMode mode,
                         Complex eta = Complex(0.0, 0.0));
TwoPhotonKernel s2_mirror(const SystemConfig& config, double k1, double k2,
                          Complex eta = Complex(0.0, 0.0));
TwoPhotonKernel s2_rydberg(const SystemConfig& config, double k1, double k2);

// psi(x_c, x) = e^{i E x_c} [disconnected*cos(k_rel x) + connected(x)], bosonic in x.
struct PairWavefunction {
    PairChannel channel{PairChannel::ReflectedPair};
    Complex e_total{0.0, 0.0};
    double k_rel{0.0};
    Complex disconnected{0.0, 0.0};
    std::function<Complex(double x)> connected;

    Complex operator()(double xc, double x) const {
        return std::exp(I * e_total * xc) *
               (disconnected * std::cos(k_rel * x) + connected(x));
    }
};

PairWavefunction psi2_two_level(double k1, double k2, double gamma);
PairWavefunction psi2_jc(double k1, double k2, double g, double gamma);

// Residue-sum coordinate wavefunction for Markov pipelines (arrays, Rydberg).
PairWavefunction psi2_markov(const SystemConfig& config, double k1, double k2,
                             PairChannel channel, Complex eta = Complex(0.0, 0.0));

PairWavefunction psi2_array(const SystemConfig& config, double k1, double k2, HMode mode,
                            Complex eta = Complex(0.0, 0.0));
PairWavefunction psi2_rydberg(const SystemConfig& config, double k1, double k2,
                              Complex eta = Complex(0.0, 0.0));

// Fourier route for the connected part: FFT over q in [-window, window] with the
// even 1/q^2 asymptote subtracted and added back analytically.
struct SampledWavefunction {
    std::vector<double> x;
    std::vector<Complex> value;
};
SampledWavefunction connected_by_fft(const TwoPhotonKernel& kernel, double window = 0.0,
                                     int n = 4096, double decay_scale = 1.0);

// Connected part by direct per-point quadrature over the relative momentum.
Complex connected_by_quadrature(const TwoPhotonKernel& kernel, double x,
                                double decay_scale = 1.0, const QuadOptions& opts = {});

// g2(x) = |psi(0, x)|^2 / |normalization|^2 on the caller grid.
std::vector<double> g2(const PairWavefunction& psi, Complex normalization,
                       const std::vector<double>& x_grid);

// Mirror-model Green function of the emitter component (exact mirror limit or
// finite Gamma_b), and the corresponding ee-channel bubble by quadrature.
Complex mirror_gee(const SystemConfig& config, Complex omega);
Complex mirror_bubble(const SystemConfig& config, Complex e_total,
                      const QuadOptions& opts = {});

// Out-going pair amplitude for a Lorentzian product input on the mirror model,
// sampled on the caller momentum grid.
Eigen::MatrixXcd entangled_pair(const SystemConfig& config, const Wavepacket& packet,
                                const Eigen::VectorXd& p_grid, const QuadOptions& opts = {});

// Entanglement entropy -sum lambda^2 ln lambda^2 of a weighted, normalized pair
// amplitude matrix. Throws NotNormalized when |frobenius - 1| > 1e-6.
double von_neumann_entropy(const Eigen::MatrixXcd& psi_weighted);

// Folds uniform-grid weights into psi and normalizes; returns the raw norm.
double fold_and_normalize(Eigen::MatrixXcd& psi, double dp);

}  // namespace wgqed
