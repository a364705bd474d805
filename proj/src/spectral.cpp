#include "sbdyn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sbdyn/error.hpp"
#include "sbdyn/quadrature.hpp"

namespace sbdyn {
namespace {

constexpr double kPi = std::numbers::pi;

// Upper limit of the panel-integrated part of every frequency integral; the
// remainder is handled by semi-infinite routines.
double panel_cutoff(const SpectralDensity& d) {
    return d.kind() == DensityKind::Lorentzian ? 50.0 * d.omega0() : 10.0 * d.omega_c();
}

double coth_weight(const SpectralDensity& d, double beta, double w) {
    if (std::isinf(beta)) return d(w);
    const double x = 0.5 * beta * w;
    if (w <= 0.0) {
        // J(w) coth(beta w / 2) -> J'(0) * 2 / beta
        const double eps = 1e-8 * d.frequency_scale();
        return d(eps) / eps * 2.0 / beta;
    }
    if (x < 1e-6) return d(w) * (1.0 / x + x / 3.0);
    return d(w) / std::tanh(x);
}

}  // namespace

SpectralDensity SpectralDensity::lorentzian(double alpha, double omega0, double gamma_damp) {
    if (!(alpha >= 0.0) || !(omega0 > 0.0) || !(gamma_damp > 0.0) || !std::isfinite(alpha) ||
        !std::isfinite(omega0) || !std::isfinite(gamma_damp)) {
        throw DomainError("lorentzian density needs alpha >= 0, Omega > 0, Gamma > 0");
    }
    SpectralDensity d;
    d.kind_ = DensityKind::Lorentzian;
    d.alpha_ = alpha;
    d.omega0_ = omega0;
    d.gamma_ = gamma_damp;
    return d;
}

SpectralDensity SpectralDensity::ohmic(double gamma_damp, double omega_c) {
    if (!(gamma_damp >= 0.0) || !(omega_c > 0.0) || !std::isfinite(gamma_damp) ||
        !std::isfinite(omega_c)) {
        throw DomainError("ohmic density needs Gamma >= 0 and omega_c > 0");
    }
    SpectralDensity d;
    d.kind_ = DensityKind::Ohmic;
    d.gamma_ = gamma_damp;
    d.omega_c_ = omega_c;
    return d;
}

bool SpectralDensity::is_zero() const noexcept {
    return kind_ == DensityKind::Lorentzian ? alpha_ == 0.0 : gamma_ == 0.0;
}

double SpectralDensity::operator()(double omega) const {
    if (omega < 0.0 || std::isnan(omega)) {
        std::ostringstream msg;
        msg << "spectral density evaluated at negative frequency " << omega;
        throw DomainError(msg.str());
    }
    if (kind_ == DensityKind::Lorentzian) {
        const double o2 = omega0_ * omega0_;
        const double detune = o2 - omega * omega;
        const double damp = 2.0 * kPi * gamma_ * omega * omega0_;
        return scale_ * 2.0 * alpha_ * omega * o2 * o2 / (detune * detune + damp * damp);
    }
    return scale_ * gamma_ * omega * std::exp(-omega / omega_c_);
}

double SpectralDensity::frequency_scale() const noexcept {
    return kind_ == DensityKind::Lorentzian ? omega0_ : omega_c_;
}

std::vector<double> SpectralDensity::features() const {
    std::vector<double> pts;
    if (kind_ == DensityKind::Lorentzian) {
        const double width = kPi * gamma_ * omega0_;
        for (double k : {-30.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0, 30.0}) {
            const double p = omega0_ + k * width;
            if (p > 0.0) pts.push_back(p);
        }
    } else {
        pts = {omega_c_, 5.0 * omega_c_};
    }
    return pts;
}

double SpectralDensity::total_weight() const {
    if (is_zero()) return 0.0;
    if (kind_ == DensityKind::Ohmic) return scale_ * gamma_ * omega_c_ * omega_c_;
    const auto f = [this](double w) { return (*this)(w); };
    const double cut = panel_cutoff(*this);
    const auto pts = features();
    return quad::integrate(f, 0.0, cut, pts).value + quad::integrate_to_infinity(f, cut).value;
}

double SpectralDensity::reorganization() const {
    if (is_zero()) return 0.0;
    if (kind_ == DensityKind::Ohmic) return scale_ * gamma_ * omega_c_ / kPi;
    const auto f = [this](double w) {
        const double o2 = omega0_ * omega0_;
        const double detune = o2 - w * w;
        const double damp = 2.0 * kPi * gamma_ * w * omega0_;
        return scale_ * 2.0 * alpha_ * o2 * o2 / (detune * detune + damp * damp);
    };
    const double cut = panel_cutoff(*this);
    const auto pts = features();
    return (quad::integrate(f, 0.0, cut, pts).value + quad::integrate_to_infinity(f, cut).value) /
           kPi;
}

double map_alpha_to_g0(double alpha, double gamma_damp, double omega0) {
    if (!(alpha >= 0.0) || !(gamma_damp > 0.0) || !(omega0 > 0.0)) {
        throw DomainError("map_alpha_to_g0 needs alpha >= 0, Gamma > 0, Omega > 0");
    }
    return omega0 * std::sqrt(alpha / (8.0 * gamma_damp));
}

double map_g0_to_alpha(double g0, double gamma_damp, double omega0) {
    if (!(g0 >= 0.0) || !(gamma_damp > 0.0) || !(omega0 > 0.0)) {
        throw DomainError("map_g0_to_alpha needs g0 >= 0, Gamma > 0, Omega > 0");
    }
    return 8.0 * gamma_damp * g0 * g0 / (omega0 * omega0);
}

ViewMapping ViewMapping::from_alpha(double alpha, double gamma_damp, double omega0) {
    return {map_alpha_to_g0(alpha, gamma_damp, omega0), alpha, gamma_damp, omega0};
}

ViewMapping ViewMapping::from_g0(double g0, double gamma_damp, double omega0) {
    return {g0, map_g0_to_alpha(g0, gamma_damp, omega0), gamma_damp, omega0};
}

SpectralDensity quapi_density_from_physical(const SpectralDensity& density) {
    if (density.mapped_) throw DomainError("spectral density is already in path-integral form");
    SpectralDensity out = density;
    out.scale_ = density.scale_ * kPi;
    out.mapped_ = true;
    return out;
}

cplx response_kernel(const SpectralDensity& density, double beta, double t) {
    if (!(t >= 0.0)) throw DomainError("response_kernel needs t >= 0");
    if (!(beta > 0.0)) throw DomainError("response_kernel needs beta > 0");
    if (density.is_zero()) return {0.0, 0.0};

    const double cut = panel_cutoff(density);
    const auto pts = density.features();
    const double magnitude = density.total_weight() / kPi;
    quad::Options opt;
    opt.abs_tol = 1e-12 * std::max(magnitude, 1e-300);
    opt.rel_tol = 1e-10;

    const auto weight = [&](double w) { return coth_weight(density, beta, w); };
    if (t == 0.0) {
        const double re = quad::integrate(weight, 0.0, cut, pts, opt).value +
                          quad::integrate_to_infinity(weight, cut, opt).value;
        return {re / kPi, 0.0};
    }
    const auto re_head = [&](double w) { return weight(w) * std::cos(w * t); };
    const auto im_head = [&](double w) { return density(w) * std::sin(w * t); };
    const auto plain = [&](double w) { return density(w); };
    const double re = quad::integrate(re_head, 0.0, cut, pts, opt).value +
                      quad::fourier_to_infinity(weight, cut, t, quad::Weight::Cos, opt).value;
    const double im = quad::integrate(im_head, 0.0, cut, pts, opt).value +
                      quad::fourier_to_infinity(plain, cut, t, quad::Weight::Sin, opt).value;
    return {re / kPi, -im / kPi};
}

ResponseKernel::ResponseKernel(SpectralDensity density, double beta, double t_max, double spacing)
    : density_(density), beta_(beta), spacing_(spacing), t_max_(t_max) {
    if (!(spacing > 0.0) || !(t_max > 0.0)) {
        throw ConfigError("response kernel grid needs positive spacing and extent");
    }
    const auto n = static_cast<std::size_t>(std::ceil(t_max / spacing)) + 6;
    samples_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        samples_[j] = response_kernel(density_, beta_, static_cast<double>(j) * spacing_);
    }
}

cplx ResponseKernel::sample(long j) const {
    return j < 0 ? std::conj(samples_[static_cast<std::size_t>(-j)])
                 : samples_[static_cast<std::size_t>(j)];
}

cplx ResponseKernel::operator()(double t) const {
    if (t < 0.0) return std::conj((*this)(-t));
    const double x = t / spacing_;
    const long n = static_cast<long>(samples_.size());
    if (x > static_cast<double>(n - 1)) {
        std::ostringstream msg;
        msg << "response kernel queried at t = " << t << " beyond its table";
        throw ConfigError(msg.str());
    }
    long j = static_cast<long>(std::floor(x));
    j = std::min(j, n - 4);
    const double u = x - static_cast<double>(j);
    // Six-point Lagrange interpolation through j-2 .. j+3.
    cplx acc = 0.0;
    for (int a = -2; a <= 3; ++a) {
        double w = 1.0;
        for (int b = -2; b <= 3; ++b) {
            if (b != a) w *= (u - b) / static_cast<double>(a - b);
        }
        acc += w * sample(j + a);
    }
    return acc;
}

}  // namespace sbdyn
