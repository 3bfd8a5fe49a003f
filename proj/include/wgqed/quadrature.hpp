// quadrature.hpp — Adaptive Gauss-Kronrod integration for complex-valued integrands

#pragma once

#include <functional>

#include "wgqed/types.hpp"

namespace wgqed {

struct QuadOptions {
    double rel_tol{1e-8};
    double abs_tol{0.0};     // absolute floor; 0 means rel_tol * running magnitude
    int max_depth{55};
    long max_evals{4'000'000};
};

struct QuadResult {
    Complex value{0.0, 0.0};
    double error{0.0};
    long evals{0};
};

// Adaptive G7-K15 on the finite interval [a, b].
QuadResult integrate(const std::function<Complex(double)>& f, double a, double b,
                     const QuadOptions& opts = {});

// Integral over the whole real line via t = center + scale*tan(u). The integrand
// must decay at least like 1/t^2 for the mapped integrand to stay bounded.
QuadResult integrate_line(const std::function<Complex(double)>& f, double center,
                          double scale, const QuadOptions& opts = {});

}  // namespace wgqed
