// single_photon.hpp — Single-photon reflection/transmission for the five models

#pragma once

#include "wgqed/config.hpp"
#include "wgqed/greens.hpp"
#include "wgqed/types.hpp"

namespace wgqed {

struct RTPoint {
    double k{0.0};
    Complex r{0.0, 0.0};
    Complex t{0.0, 0.0};

    double flux() const { return std::norm(r) + std::norm(t); }
};

// Two-level emitter: R = -i*Gamma/(k + i*Gamma), T = k/(k + i*Gamma).
RTPoint rt_two_level(double k, double gamma);

// Jaynes-Cummings: R = -i*Gamma*k/((k+i*Gamma)k - g^2), T = (k^2-g^2)/((k+i*Gamma)k - g^2).
RTPoint rt_jc(double k, double g, double gamma);

// Two-level array via the Green-function contraction; Markov mode drops the
// k-dependent propagation phases. Dark-state momenta where the limit exists are
// evaluated by a null-consistent solve; a genuinely divergent point throws.
RTPoint rt_array(const SystemConfig& config, double k, HMode mode);

// Emitter in the half-ended waveguide: |R| = 1 in the exact mirror limit.
Complex rt_mirror(const SystemConfig& config, double k);

// Rydberg-EIT array: ee-block contraction of the 2N x 2N Green function.
RTPoint rt_eit_array(const SystemConfig& config, double k, HMode mode);

// Model dispatch used by the CLI spectrum task.
RTPoint rt_point(const SystemConfig& config, double k, HMode mode);

}  // namespace wgqed
