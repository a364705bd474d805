#pragma once

#include <complex>
#include <limits>
#include <vector>

namespace sbdyn {

using cplx = std::complex<double>;

enum class DensityKind { Lorentzian, Ohmic };

// Bath spectral density J(omega). Energies are in units of the oscillator
// frequency Omega. Coupling strengths (alpha, gamma_damp of an Ohmic bath) may
// be zero, which describes an uncoupled qubit.
class SpectralDensity {
  public:
    // J(w) = 2 alpha w Omega^4 / ((Omega^2 - w^2)^2 + (2 pi Gamma w Omega)^2)
    static SpectralDensity lorentzian(double alpha, double omega0, double gamma_damp);
    // J(w) = Gamma w exp(-w / omega_c)
    static SpectralDensity ohmic(double gamma_damp, double omega_c);

    DensityKind kind() const noexcept { return kind_; }
    double alpha() const noexcept { return alpha_; }
    double omega0() const noexcept { return omega0_; }
    double gamma_damp() const noexcept { return gamma_; }
    double omega_c() const noexcept { return omega_c_; }

    // Overall prefactor applied on top of the physical form. 1 for physical
    // densities, pi once converted to the path-integral convention.
    double scale() const noexcept { return scale_; }
    bool quapi_mapped() const noexcept { return mapped_; }

    bool is_zero() const noexcept;

    // Throws DomainError for omega < 0.
    double operator()(double omega) const;

    // Frequency where the density has its main structure (Omega or omega_c).
    double frequency_scale() const noexcept;

    // Breakpoints bracketing sharp features, for adaptive quadrature.
    std::vector<double> features() const;

    // Integral of J over [0, inf).
    double total_weight() const;

    // (1/pi) * integral of J(w)/w over [0, inf); the counter-term strength in
    // the path-integral convention.
    double reorganization() const;

  private:
    friend SpectralDensity quapi_density_from_physical(const SpectralDensity&);

    DensityKind kind_ = DensityKind::Ohmic;
    double alpha_ = 0.0;
    double omega0_ = 1.0;
    double gamma_ = 0.0;
    double omega_c_ = 1.0;
    double scale_ = 1.0;
    bool mapped_ = false;
};

// Qubit-oscillator coupling of the equivalent oscillator picture:
// g0 = Omega * sqrt(alpha / (8 Gamma)).
double map_alpha_to_g0(double alpha, double gamma_damp, double omega0);
double map_g0_to_alpha(double g0, double gamma_damp, double omega0);

struct ViewMapping {
    double g0 = 0.0;
    double alpha = 0.0;
    double gamma_damp = 0.0;
    double omega0 = 1.0;

    static ViewMapping from_alpha(double alpha, double gamma_damp, double omega0);
    static ViewMapping from_g0(double g0, double gamma_damp, double omega0);
};

// Rescales a physical density by pi so that the generic path-integral form
// reproduces the coupling s * sum_k g_k (b_k + b_k^dagger). Throws DomainError
// when the density is already mapped.
SpectralDensity quapi_density_from_physical(const SpectralDensity& density);

inline constexpr double kInfiniteBeta = std::numeric_limits<double>::infinity();

// alpha(t) = (1/pi) int_0^inf dw J(w) [coth(beta w / 2) cos(w t) - i sin(w t)],
// evaluated by direct quadrature. Requires t >= 0 and beta > 0 (may be +inf).
cplx response_kernel(const SpectralDensity& density, double beta, double t);

// alpha(t) tabulated on a uniform grid and interpolated with six-point
// Lagrange polynomials.
// Negative arguments use alpha(-t) = conj(alpha(t)).
class ResponseKernel {
  public:
    ResponseKernel(SpectralDensity density, double beta, double t_max, double spacing);

    cplx operator()(double t) const;

    const SpectralDensity& density() const noexcept { return density_; }
    double beta() const noexcept { return beta_; }
    double spacing() const noexcept { return spacing_; }
    double t_max() const noexcept { return t_max_; }
    const std::vector<cplx>& samples() const noexcept { return samples_; }

  private:
    cplx sample(long j) const;

    SpectralDensity density_;
    double beta_;
    double spacing_;
    double t_max_;
    std::vector<cplx> samples_;
};

}  // namespace sbdyn
