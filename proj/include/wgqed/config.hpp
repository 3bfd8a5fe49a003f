// config.hpp — System configuration for the five emitter models, validation, JSON I/O

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wgqed/types.hpp"

namespace wgqed {

enum class Model {
    TwoLevel,
    JaynesCummings,
    TwoLevelArray,
    MirrorTwoLevel,
    RydbergEitArray,
};

const char* model_name(Model m);
Model model_from_name(const std::string& name);

struct JcParams {
    double g{0.0};
    double delta_c{0.0};
    double delta_e{0.0};
};

struct MirrorParams {
    double x0{0.0};            // emitter position, strictly negative (mirror at origin)
    double gamma_b{kInfSentinel};
    bool exact_limit{true};    // gamma_b -> inf algebra instead of the regularized value
};

enum class InteractionLaw { Uniform, Dipolar, VanDerWaals };

const char* interaction_name(InteractionLaw law);
InteractionLaw interaction_from_name(const std::string& name);

struct RydbergParams {
    double omega{0.0};
    double delta_e{0.0};
    double delta_s{0.0};
    double u0{kInfSentinel};
    bool exact_hardcore{true};
    InteractionLaw law{InteractionLaw::Uniform};
    double coefficient{0.0};
    // Interaction distances are measured in lattice units |i-j| (the convention of
    // the array results); set to false to use physical distances |x_i-x_j|.
    bool lattice_units{true};
};

struct SystemConfig {
    Model model{Model::TwoLevel};
    std::vector<double> gamma{1.0};     // waveguide rate per emitter
    std::vector<double> gamma_f{0.0};   // free-space rate per emitter
    double k0{0.0};                     // carrier wavenumber
    std::vector<double> positions{0.0};
    double u0{kInfSentinel};            // hardcore scale for emitter double occupancy
    bool exact_hardcore{true};
    std::optional<JcParams> jc;
    std::optional<MirrorParams> mirror;
    std::optional<RydbergParams> rydberg;

    int n_emitters() const { return static_cast<int>(positions.size()); }
    double gamma_at(int i) const { return gamma[gamma.size() == 1 ? 0 : i]; }
    double gamma_f_at(int i) const { return gamma_f[gamma_f.size() == 1 ? 0 : i]; }
    // Uniform lattice spacing; throws for N < 2.
    double spacing() const;
    bool is_array() const {
        return model == Model::TwoLevelArray || model == Model::RydbergEitArray;
    }
};

// Normalizes and checks a raw config: sorts positions and anchors x_1 = 0
// (mirror model keeps the mirror at the origin and the emitter at x0 < 0),
// resolves "inf" sentinels, broadcasts rate lists, checks model blocks.
// Idempotent: validate(validate(c)) == validate(c).
SystemConfig validate(SystemConfig config);

SystemConfig config_from_json(const std::string& text);
std::string config_to_json(const SystemConfig& config);

// Rydberg ss interaction between distinct sites; distances in lattice units
// |i-j| by default (matching the array results), physical units optionally.
double rydberg_interaction(const RydbergParams& params, const SystemConfig& config, int i,
                           int j);

// Single-photon Lorentzian wavepacket f(k) = sqrt(g/pi) e^{-ikx0}/(k + i s g),
// s = +1 right-moving (front at center <= 0), s = -1 left-moving (front at center).
struct Wavepacket {
    Direction direction{Direction::Right};
    double width_rate{1.0};  // gamma > 0; spatial width 1/gamma
    double center{0.0};

    Complex amplitude(double k) const {
        const double g = width_rate;
        const Complex denom = direction == Direction::Right ? Complex(k, g) : Complex(k, -g);
        return std::sqrt(g / pi) * std::exp(-I * k * center) / denom;
    }
    // L2 norm over k; equals 1 analytically for any width.
    double norm_sq() const { return 1.0; }
};

Wavepacket wavepacket_from_json(const std::string& text);

}  // namespace wgqed
