#include "sbdyn/trwa.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sbdyn/error.hpp"
#include "sbdyn/quadrature.hpp"

namespace sbdyn {
namespace {

constexpr double kPi = std::numbers::pi;
using cplx = std::complex<double>;

double system_scale(const SpectralDensity& d, double delta) {
    return d.kind() == DensityKind::Lorentzian ? std::max(delta, d.omega0()) : delta;
}

// Exponent int_0^inf J(w) / (2 (w + eta Delta)^2) dw.
double eta_exponent(const SpectralDensity& d, double delta, double eta) {
    if (d.is_zero()) return 0.0;
    const double shift = eta * delta;
    const auto f = [&](double w) { return d(w) / (2.0 * (w + shift) * (w + shift)); };
    auto pts = d.features();
    pts.push_back(shift);
    const double cut = 50.0 * system_scale(d, delta);
    quad::Options opt;
    opt.abs_tol = 1e-15;
    opt.rel_tol = 1e-12;
    return quad::integrate(f, 0.0, cut, pts, opt).value + quad::integrate_to_infinity(f, cut, opt).value;
}

// int_0^1 exp(i theta u) du and int_0^1 u exp(i theta u) du.
void filon_moments(double theta, cplx& e0, cplx& e1) {
    if (std::abs(theta) < 0.05) {
        cplx term(1.0, 0.0);  // (i theta)^n / n!
        e0 = 0.0;
        e1 = 0.0;
        for (int n = 0; n < 9; ++n) {
            e0 += term / static_cast<double>(n + 1);
            e1 += term / static_cast<double>(n + 2);
            term *= cplx(0.0, theta) / static_cast<double>(n + 1);
        }
        return;
    }
    const cplx ei = std::polar(1.0, theta);
    const cplx itheta(0.0, theta);
    e0 = (ei - 1.0) / itheta;
    e1 = ei / itheta + (ei - 1.0) / (theta * theta);
}

// Nodes clustered around centre: uniform with step width/core_points inside
// +-core_span widths, then geometrically coarsening until coarse is reached.
void add_cluster(std::vector<double>& nodes, double centre, double width, int core_points,
                 double core_span, double coarse, double lo, double hi) {
    const double fine = width / core_points;
    if (!(fine > 0.0) || fine >= coarse) return;
    const auto push = [&](double x) {
        if (x >= lo && x <= hi) nodes.push_back(x);
    };
    const int n_core = static_cast<int>(std::ceil(core_span * core_points));
    for (int k = -n_core; k <= n_core; ++k) push(centre + k * fine);
    for (int side : {-1, 1}) {
        double x = centre + side * n_core * fine;
        double step = fine;
        while (step < coarse) {
            step *= 1.05;
            x += side * step;
            if (x < lo || x > hi) break;
            push(x);
        }
    }
}

}  // namespace

EtaResult solve_eta(const SpectralDensity& density, double delta, const TrwaOptions& opt) {
    if (!(delta > 0.0)) throw DomainError("solve_eta needs delta > 0");
    if (density.quapi_mapped()) throw DomainError("solve_eta needs a physical spectral density");
    EtaResult r;
    if (density.is_zero()) return r;
    double eta = 1.0;
    for (int it = 1; it <= opt.eta_max_iterations; ++it) {
        const double target = std::exp(-eta_exponent(density, delta, eta));
        r.residual = std::abs(eta - target);
        r.iterations = it;
        if (r.residual <= opt.eta_tolerance) {
            r.eta = eta;
            return r;
        }
        eta = (1.0 - opt.eta_damping) * eta + opt.eta_damping * target;
    }
    throw NumericError("eta fixed point did not converge", r.residual);
}

double peak_damping_estimate(double g0, double gamma_damp, double delta) {
    const double x = kPi * gamma_damp * delta;
    return g0 * g0 * gamma_damp / (g0 * g0 + x * x);
}

TrwaSolution TrwaSolution::solve(const SpectralDensity& density, double delta,
                                 const TrwaOptions& opt) {
    if (!(delta > 0.0)) throw DomainError("TRWA needs delta > 0");
    TrwaSolution s;
    s.density_ = density;
    s.delta_ = delta;
    const EtaResult eta = solve_eta(density, delta, opt);
    s.eta_ = eta.eta;
    s.eta_residual_ = eta.residual;
    if (density.is_zero()) {
        s.poles_.push_back({delta, 1.0, 0.0, 1.0});
        return s;
    }
    s.pv_cutoff_ = 50.0 * system_scale(density, delta);
    // R(0) has no singular point and fixes the absolute scale of the PV integrals.
    const double shift = s.eta_ * delta;
    const auto ratio = [&](double w) { return s.shift_kernel(w) / w; };
    auto pts = density.features();
    pts.push_back(shift);
    quad::Options o;
    o.abs_tol = 1e-300;
    o.rel_tol = 1e-12;
    s.shift_scale_ = quad::integrate(ratio, 0.0, s.pv_cutoff_, pts, o).value +
                     quad::integrate_to_infinity(ratio, s.pv_cutoff_, o).value;
    s.build_grid(opt);
    return s;
}

double TrwaSolution::shift_kernel(double w) const {
    const double e = eta_ * delta_;
    return e * e * density_(w) / ((w + e) * (w + e));
}

double TrwaSolution::damping(double omega) const {
    if (omega < 0.0) throw DomainError("damping needs omega >= 0");
    return kPi * shift_kernel(omega);
}

double TrwaSolution::level_shift(double omega) const {
    if (omega < 0.0) throw DomainError("level_shift needs omega >= 0");
    if (density_.is_zero()) return 0.0;
    const double f0 = shift_kernel(omega);
    const double cut = std::max(pv_cutoff_, 2.0 * omega + 1.0);
    const auto subtracted = [&](double w) {
        // The removable point itself can be hit after rounding near a breakpoint.
        if (w == omega) return 0.0;
        return (shift_kernel(w) - f0) / (omega - w);
    };
    const auto tail = [&](double w) { return shift_kernel(w) / (omega - w); };
    auto pts = density_.features();
    pts.push_back(omega);
    pts.push_back(eta_ * delta_);
    quad::Options o;
    o.abs_tol = 1e-11 * shift_scale_;
    o.rel_tol = 1e-11;
    double r;
    try {
        r = quad::integrate(subtracted, 0.0, cut, pts, o).value +
            quad::integrate_to_infinity(tail, cut, o).value;
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at omega=" + std::to_string(omega), e.estimate());
    }
    if (f0 != 0.0 && omega > 0.0) r += f0 * std::log(omega / (cut - omega));
    return r;
}

double TrwaSolution::spectral_function(double omega) const {
    const double g = damping(omega);
    if (g == 0.0) return 0.0;
    const double f = omega - eta_ * delta_ - level_shift(omega);
    return g / (kPi * (f * f + g * g));
}

void TrwaSolution::build_grid(const TrwaOptions& opt) {
    const double scale = system_scale(density_, delta_);
    const double top = opt.grid_extent * scale;
    const double scan_top = 5.0 * scale;
    const double scan_step = scan_top / opt.scan_points;
    const double coarse_step = (top - scan_top) / std::max(1, opt.scan_points / 4);
    const double shift = eta_ * delta_;

    std::vector<double> scan(static_cast<std::size_t>(opt.scan_points) + 1);
    for (std::size_t i = 0; i < scan.size(); ++i) scan[i] = scan_step * static_cast<double>(i);
    std::vector<double> residual(scan.size());
    const auto pole_fn = [&](double w) { return w - shift - level_shift(w); };
    for (std::size_t i = 0; i < scan.size(); ++i) residual[i] = pole_fn(scan[i]);

    for (std::size_t i = 0; i + 1 < scan.size(); ++i) {
        if ((residual[i] < 0.0) == (residual[i + 1] < 0.0)) continue;
        boost::uintmax_t max_iter = 200;
        std::pair<double, double> bracket;
        try {
            bracket = boost::math::tools::toms748_solve(
                pole_fn, scan[i], scan[i + 1], residual[i], residual[i + 1],
                boost::math::tools::eps_tolerance<double>(52), max_iter);
        } catch (const std::exception&) {
            max_iter = 201;
        }
        if (max_iter > 200) {
            std::ostringstream msg;
            msg << "quasi-pole not resolved in [" << scan[i] << ", " << scan[i + 1] << "]";
            throw NumericError(msg.str(), std::abs(residual[i] - residual[i + 1]));
        }
        QuasiPole p;
        p.omega = 0.5 * (bracket.first + bracket.second);
        const double h = 1e-6 * scale;
        const double lo = std::max(0.0, p.omega - h);
        p.slope = (pole_fn(p.omega + h) - pole_fn(lo)) / (p.omega + h - lo);
        p.weight = 1.0 / p.slope;
        p.width = damping(p.omega) / std::abs(p.slope);
        poles_.push_back(p);
    }

    std::vector<double> nodes = scan;
    for (double w = scan_top + coarse_step; w < top; w += coarse_step) nodes.push_back(w);
    nodes.push_back(top);
    if (density_.kind() == DensityKind::Lorentzian) {
        const double width = kPi * density_.gamma_damp() * density_.omega0();
        add_cluster(nodes, density_.omega0(), width, 20, 5.0, scan_step, 0.0, top);
    }
    for (const auto& p : poles_) {
        add_cluster(nodes, p.omega, p.width, opt.core_points, 3.0, scan_step, 0.0, top);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end(),
                            [](double a, double b) { return b - a <= 1e-15 * std::max(1.0, b); }),
                nodes.end());

    grid_ = std::move(nodes);
    spectral_.resize(grid_.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        const double w = grid_[i];
        while (k + 1 < scan.size() && scan[k] < w) ++k;
        const double g = damping(w);
        double f;
        if (scan[k] == w) {
            f = residual[k];
        } else {
            f = w - shift - level_shift(w);
        }
        spectral_[i] = g == 0.0 ? 0.0 : g / (kPi * (f * f + g * g));
    }

    // Weight beyond the grid: A ~ gamma / (pi w^2) once w >> eta Delta.
    const auto tail = [&](double w) {
        const double d = w - shift;
        return damping(w) / (kPi * d * d);
    };
    tail_weight_ = quad::integrate_to_infinity(tail, top).value;
}

std::vector<cplx> TrwaSolution::filon(std::span<const double> times, std::size_t stride) const {
    std::vector<cplx> out(times.size());
    if (density_.is_zero()) {
        for (std::size_t j = 0; j < times.size(); ++j) out[j] = std::polar(1.0, delta_ * times[j]);
        return out;
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < grid_.size(); i += stride) idx.push_back(i);
    if (idx.back() != grid_.size() - 1) idx.push_back(grid_.size() - 1);
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double t = times[j];
        cplx acc = 0.0;
        for (std::size_t m = 0; m + 1 < idx.size(); ++m) {
            const double a = grid_[idx[m]];
            const double b = grid_[idx[m + 1]];
            const double h = b - a;
            const double fa = spectral_[idx[m]];
            const double fb = spectral_[idx[m + 1]];
            cplx e0, e1;
            filon_moments(h * t, e0, e1);
            acc += h * std::polar(1.0, a * t) * (fa * e0 + (fb - fa) * e1);
        }
        out[j] = acc;
    }
    return out;
}

std::vector<cplx> TrwaSolution::transform(std::span<const double> times) const {
    for (double t : times) {
        if (!(t >= 0.0)) throw DomainError("population needs t >= 0");
    }
    return filon(times, 1);
}

std::vector<double> TrwaSolution::population(std::span<const double> times) const {
    const auto c = transform(times);
    std::vector<double> p(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) p[i] = c[i].real();
    return p;
}

double TrwaSolution::population(double t) const {
    const double ts[1] = {t};
    return population(std::span<const double>(ts, 1))[0];
}

double TrwaSolution::error_estimate(std::span<const double> times) const {
    if (density_.is_zero()) return 0.0;
    const auto fine = filon(times, 1);
    const auto coarse = filon(times, 2);
    double worst = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        worst = std::max(worst, std::abs(fine[i].real() - coarse[i].real()));
    }
    return worst + tail_weight_;
}

double TrwaSolution::sum_rule() const {
    const double t0[1] = {0.0};
    return filon(std::span<const double>(t0, 1), 1)[0].real();
}

double TrwaSolution::dominant_linewidth() const {
    if (density_.is_zero()) return 0.0;
    const QuasiPole* best = nullptr;
    for (const auto& p : poles_) {
        if (p.slope > 0.0 && (!best || p.weight > best->weight)) best = &p;
    }
    if (!best) throw NumericError("no resonant quasi-pole to measure a linewidth");
    // Locate the maximum of A near the root first.
    const double w = std::max(best->width, 1e-14);
    double peak = best->omega;
    double a_peak = spectral_function(peak);
    for (int k = -20; k <= 20; ++k) {
        const double x = best->omega + 0.1 * k * w;
        if (x <= 0.0) continue;
        const double a = spectral_function(x);
        if (a > a_peak) {
            a_peak = a;
            peak = x;
        }
    }
    const double half = 0.5 * a_peak;
    const auto side = [&](int dir) {
        double inner = peak;
        double outer = peak + dir * w;
        while (outer > 0.0 && spectral_function(outer) > half) {
            inner = outer;
            outer = peak + 2.0 * (outer - peak);
            if (std::abs(outer - peak) > 10.0 * system_scale(density_, delta_)) {
                throw NumericError("half maximum not bracketed around spectral peak");
            }
        }
        if (outer <= 0.0) return 0.0;
        const auto g = [&](double x) { return spectral_function(x) - half; };
        boost::uintmax_t iters = 200;
        auto r = boost::math::tools::toms748_solve(
            g, std::min(inner, outer), std::max(inner, outer),
            boost::math::tools::eps_tolerance<double>(40), iters);
        return 0.5 * (r.first + r.second);
    };
    return side(+1) - side(-1);
}

double envelope_decay_rate(const TrwaSolution& solution, double t_begin, double t_end, int samples) {
    if (!(t_end > t_begin) || samples < 3) throw DomainError("envelope fit needs a window and >= 3 samples");
    std::vector<double> t(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) t[i] = t_begin + (t_end - t_begin) * i / (samples - 1);
    const auto c = solution.transform(t);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < samples; ++i) {
        const double y = std::log(std::abs(c[i]));
        sx += t[i];
        sy += y;
        sxx += t[i] * t[i];
        sxy += t[i] * y;
    }
    const double n = samples;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return -slope;
}

}  // namespace sbdyn
