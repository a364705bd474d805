#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace sbdyn::quad {

using RealFn = std::function<double(double)>;

struct Result {
    double value = 0.0;
    double error = 0.0;  // absolute error estimate from the integrator
};

struct Options {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    std::size_t limit = 4000;
    // A non-zero integrator status is tolerated when the estimate stays below
    // accept_factor * requested tolerance (QUADPACK reports roundoff early).
    double accept_factor = 1e3;
};

// Adaptive Gauss-Kronrod on [a, b]. Interior breakpoints (any order, values
// outside (a, b) ignored) mark kinks or sharp features.
Result integrate(const RealFn& f, double a, double b,
                 std::span<const double> breakpoints = {}, const Options& opt = {});

// Adaptive integration on [a, inf).
Result integrate_to_infinity(const RealFn& f, double a, const Options& opt = {});

enum class Weight { Cos, Sin };

// Integral of f(x) * cos(omega x) or f(x) * sin(omega x) over [a, inf).
// Uses the absolute tolerance only. omega must be non-zero.
Result fourier_to_infinity(const RealFn& f, double a, double omega, Weight w,
                           const Options& opt = {});

// Integral of f(x) * cos/sin(omega x) over the finite interval [a, b].
Result fourier(const RealFn& f, double a, double b, double omega, Weight w,
               const Options& opt = {});

}  // namespace sbdyn::quad
