// gme.hpp — Generalized master equation: collective Lindblad generator, classical
// source driving, the source-order hierarchy rho^(m,n), and reconstruction of the
// physical reduced density matrix for one- and two-photon inputs.

#pragma once

#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wgqed/config.hpp"
#include "wgqed/types.hpp"

namespace wgqed {
namespace gme {

// Truncated emitter Hilbert space: occupation-number states with per-component
// caps (hardcore components cap at 1), a global two-excitation cap for array
// models, and per-site exclusion of double occupancy for Rydberg atoms.
struct HilbertSpace {
    int n_comp{0};
    std::vector<std::vector<int>> states;
    int dim() const { return static_cast<int>(states.size()); }
    int index(const std::vector<int>& occ) const;
    Eigen::MatrixXcd lowering(int comp) const;
};

struct Generator {
    SystemConfig config;
    HilbertSpace space;
    Eigen::MatrixXcd h_static;              // system + waveguide exchange term
    std::vector<Eigen::MatrixXcd> jump_wg;  // waveguide-coupled lowering operators
    std::vector<double> wg_position;
    std::vector<double> wg_sqrt_rate;
    Eigen::MatrixXd collective_rate;        // 2 sqrt(Gi Gj) cos(k0 (xi - xj))
    std::vector<Eigen::MatrixXcd> jump_free;
    std::vector<double> free_rate;          // Gamma_f per free-space channel
    Eigen::MatrixXcd anticomm;              // sum C_ij O_i^dag O_j + free part

    // Dissipative part L(rho); the coherent part is -i[h_static + drive, rho].
    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho) const;
};

Generator lindblad_generator(const SystemConfig& config);

// Raising drive operator C^dag(T): sum_j sqrt(G_j) e^{i s k0 x_j} phi(T - arr_j) O_j^dag.
Eigen::MatrixXcd drive_raising(const Generator& gen, const Wavepacket& packet, double t);

// H_sys + exchange + C(T) + C^dag(T), the J = 1 section of the driven Hamiltonian.
Eigen::MatrixXcd driven_hamiltonian(const SystemConfig& config, const Wavepacket& packet,
                                    double t);

using ComponentKey = std::pair<int, int>;  // (m, n) powers of J and J*

struct HierarchySnapshot {
    double t{0.0};
    std::map<ComponentKey, Eigen::MatrixXcd> comp;
};

struct HierarchyResult {
    std::vector<HierarchySnapshot> snapshots;
    double halving_error{0.0};  // max final-time component difference dt vs dt/2
};

// Fixed-step RK4 on the coupled source-order components, m, n <= order/2.
// record_times must be sorted; each is snapped to the nearest step boundary.
HierarchyResult evolve_hierarchy(const SystemConfig& config, const Wavepacket& packet,
                                 int order, double t_end, double dt,
                                 const std::vector<double>& record_times);

// Physical reduced density matrix: photons = 1: rho00 + rho11;
// photons = 2: rho00 + 2 rho11 + 2 rho22.
Eigen::MatrixXcd reduced_density(const HierarchySnapshot& snap, int photons);

}  // namespace gme
}  // namespace wgqed
