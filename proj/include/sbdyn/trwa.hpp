#pragma once

#include <complex>
#include <span>
#include <vector>

#include "sbdyn/spectral.hpp"

namespace sbdyn {

struct TrwaOptions {
    double eta_tolerance = 1e-12;
    int eta_max_iterations = 500;
    double eta_damping = 0.5;
    // Sign-scan points for quasi-poles on [0, 5 max(Delta, Omega)].
    int scan_points = 10000;
    // Spectral grid extends to grid_extent * max(Delta, Omega).
    double grid_extent = 10.0;
    // Uniform nodes per pole half-width in the refined core.
    int core_points = 50;
};

// Root of omega - eta Delta - R(omega) with local Lorentzian parameters.
struct QuasiPole {
    double omega = 0.0;
    double slope = 0.0;   // d/dw [w - eta Delta - R(w)] at the root
    double width = 0.0;   // gamma(omega) / |slope|
    double weight = 0.0;  // 1 / slope (negative slopes mark anti-resonances)
};

// eta = exp(-int_0^inf dw J(w) / (2 (w + eta Delta)^2)), zero temperature.
struct EtaResult {
    double eta = 1.0;
    double residual = 0.0;
    int iterations = 0;
};
EtaResult solve_eta(const SpectralDensity& density, double delta, const TrwaOptions& opt = {});

// Gamma-dependence of the resonant peak damping with eta ~ 1. Only ratios and
// the location of the maximum are meaningful.
double peak_damping_estimate(double g0, double gamma_damp, double delta);

class TrwaSolution {
  public:
    // density must be a physical Lorentzian (or zero coupling); delta > 0.
    static TrwaSolution solve(const SpectralDensity& density, double delta,
                              const TrwaOptions& opt = {});

    double delta() const noexcept { return delta_; }
    double eta() const noexcept { return eta_; }
    double eta_residual() const noexcept { return eta_residual_; }
    const SpectralDensity& density() const noexcept { return density_; }
    bool uncoupled() const noexcept { return density_.is_zero(); }

    // R(omega): principal value by singularity subtraction.
    double level_shift(double omega) const;
    // gamma(omega) = pi J(omega) (eta Delta)^2 / (omega + eta Delta)^2.
    double damping(double omega) const;
    // A(omega) = gamma / (pi ((omega - eta Delta - R)^2 + gamma^2)).
    double spectral_function(double omega) const;

    const std::vector<QuasiPole>& poles() const noexcept { return poles_; }

    // Tabulated frequency grid and A(omega) on it.
    const std::vector<double>& grid() const noexcept { return grid_; }
    const std::vector<double>& grid_spectral() const noexcept { return spectral_; }

    // P(t) = int_0^inf A(w) cos(w t) dw.
    double population(double t) const;
    std::vector<double> population(std::span<const double> times) const;
    // int_0^inf A(w) exp(i w t) dw; its modulus is the envelope of P(t).
    std::vector<std::complex<double>> transform(std::span<const double> times) const;

    // Difference between the full grid and the every-other-node grid, maximised
    // over the given times, plus the spectral weight beyond the grid.
    double error_estimate(std::span<const double> times) const;

    // Integral of A over the tabulated grid; equals P(0).
    double sum_rule() const;

    // Full width at half maximum of the spectral peak with the largest weight.
    double dominant_linewidth() const;

  private:
    TrwaSolution() = default;

    double shift_kernel(double w) const;  // (eta Delta)^2 J(w) / (w + eta Delta)^2
    std::vector<std::complex<double>> filon(std::span<const double> times, std::size_t stride) const;
    void build_grid(const TrwaOptions& opt);

    SpectralDensity density_;
    double delta_ = 1.0;
    double eta_ = 1.0;
    double eta_residual_ = 0.0;
    double shift_scale_ = 0.0;
    double pv_cutoff_ = 0.0;
    std::vector<QuasiPole> poles_;
    std::vector<double> grid_;
    std::vector<double> spectral_;
    double tail_weight_ = 0.0;
};

// Decay rate of the P(t) envelope from a least-squares fit of log|C(t)| with
// C the complex transform, sampled uniformly on [t_begin, t_end].
double envelope_decay_rate(const TrwaSolution& solution, double t_begin, double t_end,
                           int samples = 200);

}  // namespace sbdyn
