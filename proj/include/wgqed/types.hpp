// types.hpp — Shared scalar types, error codes, channels, and small numeric helpers

#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace wgqed {

using Complex = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr Complex I{0.0, 1.0};

// Value used when "inf" sentinels (hardcore scale, mirror rate) are regularized.
inline constexpr double kInfSentinel = 1e8;

enum class Errc {
    NegativeRate,
    NonMonotonePositions,
    MissingModelBlock,
    InvalidConfig,
    SingularResolvent,
    DefectiveMatrix,
    SeriesOverflow,
    SingularBubble,
    QuadratureNonConvergence,
    IllConditioned,
    BasisTooLarge,
    ZeroNormalization,
    NotNormalized,
    GridTooCoarse,
    StepTooLarge,
    InsufficientOrder,
    DegenerateSpectrum,
    NonMonotoneGrid,
    UnknownParameterPath,
    IoError,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

    // Validation failures exit with 2, computation failures with 3.
    bool is_validation() const noexcept {
        switch (code_) {
        case Errc::NegativeRate:
        case Errc::NonMonotonePositions:
        case Errc::MissingModelBlock:
        case Errc::InvalidConfig:
        case Errc::NonMonotoneGrid:
        case Errc::UnknownParameterPath:
            return true;
        default:
            return false;
        }
    }

private:
    Errc code_;
};

// Propagation direction along the waveguide. sigma = +1 right-moving, -1 left-moving.
enum class Direction { Right, Left };

inline int sigma_of(Direction d) noexcept { return d == Direction::Right ? +1 : -1; }

// A single waveguide mode: direction and momentum detuning k from the carrier k0.
// Linear dispersion epsilon = sigma * k.
struct Channel {
    Direction direction{Direction::Right};
    double momentum{0.0};

    int sigma() const noexcept { return sigma_of(direction); }
    double energy() const noexcept { return sigma() * momentum; }
};

// Pair kinematics: total momentum E = k1 + k2, relative momentum (k1 - k2)/2.
inline double pair_total(double k1, double k2) noexcept { return k1 + k2; }
inline double pair_relative(double k1, double k2) noexcept { return 0.5 * (k1 - k2); }
inline double center_of_mass(double x1, double x2) noexcept { return 0.5 * (x1 + x2); }

// Phase k0*x reduced modulo 2*pi. Splits the product (Dekker two-product via fma)
// so large k0 does not wash out the fractional part.
inline double reduce_phase(double k0, double x) noexcept {
    const double prod = k0 * x;
    const double err = std::fma(k0, x, -prod);
    return std::remainder(prod, two_pi) + err;
}

// Map f(i) over [0, n) on up to `threads` std::threads. threads <= 1 runs inline.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace wgqed
