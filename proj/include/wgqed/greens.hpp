// greens.hpp — Effective Hamiltonians on the single-excitation space, resolvents,
// bi-orthogonal spectra, and the exact two-emitter retardation series.

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wgqed/config.hpp"
#include "wgqed/types.hpp"

namespace wgqed {

enum class HMode { Exact, Markov };

// Single-excitation basis for one of the five models: component positions,
// waveguide coupling weights sqrt(Gamma_i) (zero for uncoupled species like the
// JC atom), diagonal detunings/loss, and static couplings (g, Omega).
struct EmitterBasis {
    int dim{0};
    Eigen::VectorXd positions;
    Eigen::VectorXd sqrt_gamma;      // waveguide coupling amplitude per component
    Eigen::VectorXcd diagonal;       // detuning - i*Gamma_f per component
    Eigen::MatrixXcd static_coupling;  // Hermitian couplings (JC g, EIT Omega)
    std::vector<bool> hardcore;      // double occupancy forbidden on this component
    std::vector<std::string> labels;

    // Index of the e-species component at emitter site i (waveguide-coupled).
    int e_index(int site) const { return site; }
};

EmitterBasis emitter_basis(const SystemConfig& config);

struct EffectiveHamiltonian {
    EmitterBasis basis;
    Eigen::MatrixXcd matrix;
    HMode mode{HMode::Markov};
    Complex omega{0.0, 0.0};  // frequency the Exact matrix was built at
};

// H0(omega) (Exact) or H0^M (Markov, omega ignored). Complex-symmetric.
EffectiveHamiltonian build_h0(const SystemConfig& config, Complex omega, HMode mode);

// Resolvent matrix of the effective Hamiltonian at omega.
Eigen::MatrixXcd resolvent_matrix(const EmitterBasis& basis, const Eigen::MatrixXcd& h,
                                  Complex omega);

// G(omega) = [omega - H0(omega or 0)]^-1. Throws SingularResolvent when omega is
// within 1e-12 of an eigenvalue of the matrix in the operator-norm sense.
Eigen::MatrixXcd green(const SystemConfig& config, Complex omega, HMode mode);

// Contraction limit w^T [omega - M]^-1 v that survives dark-state poles: when the
// matrix is singular but v has no overlap with the offending null directions the
// finite limit is returned; otherwise SingularResolvent.
Complex resolvent_contraction(const Eigen::MatrixXcd& m_omega, const Eigen::VectorXcd& w,
                              const Eigen::VectorXcd& v);
Eigen::VectorXcd resolvent_solve(const Eigen::MatrixXcd& m_omega, const Eigen::VectorXcd& v);

// Bi-orthogonal eigensystem of a Markov effective Hamiltonian: right columns chi,
// left columns chi_tilde with chi_tilde^dag chi = I and sum_l chi chi_tilde^dag = I.
struct Spectrum {
    Eigen::VectorXcd eigenvalues;
    Eigen::MatrixXcd right;  // columns chi_l
    Eigen::MatrixXcd left;   // columns chi_tilde_l

    int dim() const { return static_cast<int>(eigenvalues.size()); }
    // exp(-i H T) reconstructed from the spectral data.
    Eigen::MatrixXcd propagator(double t) const;
};

// Eigenvector phases fixed by making the largest-magnitude component real positive
// (ties break to the lowest index); eigenvalues sorted by (Re, Im).
Spectrum eigendecompose(const EffectiveHamiltonian& h);

// Exact delay series C_pm(T) for the two-emitter array:
//   sum_n (1/n!) [pm Gamma e^{i k0 d + (Gamma_f+Gamma) d} (T - n d)]^n theta(T - n d),
// evaluated with compensated summation. Guard: floor(T/d) <= 1e6.
Complex retardation_series(const SystemConfig& config, double t, int branch);

}  // namespace wgqed
