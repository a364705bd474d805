#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracle.hpp"
#include "sbdyn/error.hpp"
#include "sbdyn/spectral.hpp"
#include "sbdyn/trwa.hpp"

using namespace sbdyn;
using oracle::pi;

namespace {

SpectralDensity resonant_bath(double g0, double gamma) {
    return SpectralDensity::lorentzian(map_g0_to_alpha(g0, gamma, 1.0), 1.0, gamma);
}

// eta from its fixed-point equation with the exponent integrated by dense
// Gauss-Legendre panels.
double eta_oracle(double alpha, double gamma, double delta) {
    double eta = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double ed = eta * delta;
        auto f = [&](double w) { return oracle::lorentzian_j(alpha, gamma, w) / (2.0 * (w + ed) * (w + ed)); };
        const double expo = oracle::gauss(f, 0.0, 5.0, 4000) + oracle::gauss(f, 5.0, 2000.0, 20000);
        const double next = std::exp(-expo);
        if (std::abs(next - eta) < 1e-15) return next;
        eta = next;
    }
    return eta;
}

// (eta Delta)^2 J(w) / (w + eta Delta)^2 written out from the density.
struct ShiftKernel {
    double alpha, gamma, ed;
    double operator()(double w) const { return ed * ed * oracle::lorentzian_j(alpha, gamma, w) / ((w + ed) * (w + ed)); }
};

// R(w) by QAWC on [0, 50] and plain panels beyond.
double shift_oracle(const ShiftKernel& k, double w) {
    const double head = -oracle::cauchy(k, 0.0, 50.0, w);
    const double tail = oracle::gauss([&](double x) { return k(x) / (w - x); }, 50.0, 5000.0, 20000);
    return head + tail;
}

}  // namespace

TEST_CASE("free qubit oscillates at Delta") {
    const auto d = SpectralDensity::lorentzian(0.0, 1.0, 0.1);
    for (double delta : {0.1, 1.0}) {
        const auto sol = TrwaSolution::solve(d, delta);
        CHECK(sol.eta() == 1.0);
        CHECK(sol.uncoupled());
        CHECK(sol.level_shift(0.7) == 0.0);
        CHECK(sol.damping(0.7) == 0.0);
        std::vector<double> t;
        for (double x = 0.0; x <= 50.0 / delta; x += 0.05 / delta) t.push_back(x);
        const auto p = sol.population(t);
        double err = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) err = std::max(err, std::abs(p[i] - std::cos(delta * t[i])));
        CHECK(err <= 1e-3);
    }
}

TEST_CASE("eta solves its fixed point") {
    const double delta = 0.1, g0 = 0.1 * delta, gamma = 0.02;
    const double alpha = map_g0_to_alpha(g0, gamma, 1.0);
    const auto r = solve_eta(SpectralDensity::lorentzian(alpha, 1.0, gamma), delta);
    CHECK(r.residual <= 1e-10);
    CHECK(r.eta > 0.99);
    CHECK(r.eta <= 1.0);
    CHECK(r.eta == doctest::Approx(eta_oracle(alpha, gamma, delta)).epsilon(1e-9));

    const auto strong = solve_eta(SpectralDensity::lorentzian(0.05, 1.0, 0.3), 1.0);
    CHECK(strong.eta == doctest::Approx(eta_oracle(0.05, 0.3, 1.0)).epsilon(1e-9));
    CHECK(solve_eta(SpectralDensity::lorentzian(0.0, 1.0, 0.3), 1.0).eta == 1.0);
    CHECK_THROWS_AS(solve_eta(SpectralDensity::lorentzian(0.05, 1.0, 0.3), 0.0), DomainError);
    CHECK_THROWS_AS(solve_eta(quapi_density_from_physical(SpectralDensity::lorentzian(0.05, 1.0, 0.3)), 1.0),
                    DomainError);
}

TEST_CASE("eta decreases with coupling") {
    double prev = 1.0;
    for (double alpha : {1e-4, 1e-3, 1e-2, 5e-2, 0.1}) {
        const double eta = solve_eta(SpectralDensity::lorentzian(alpha, 1.0, 0.2), 1.0).eta;
        CHECK(eta < prev);
        prev = eta;
    }
}

TEST_CASE("damping is non-negative and matches its closed form") {
    const auto sol = TrwaSolution::solve(resonant_bath(0.1, 0.3), 1.0);
    const double ed = sol.eta() * sol.delta();
    CHECK(sol.damping(ed) == doctest::Approx(pi * sol.density()(ed) / 4.0).epsilon(1e-13));
    for (double w = 0.0; w <= 20.0; w += 0.01) CHECK(sol.damping(w) >= 0.0);
    CHECK_THROWS_AS(sol.damping(-1.0), DomainError);
}

TEST_CASE("level shift agrees with a QAWC principal value") {
    for (double gamma : {0.02, 0.3}) {
        const auto sol = TrwaSolution::solve(resonant_bath(0.1, gamma), 1.0);
        const ShiftKernel k{sol.density().alpha(), gamma, sol.eta() * sol.delta()};
        std::vector<double> got, want;
        for (int i = 0; i < 20; ++i) {
            const double w = 0.05 + 0.2 * i + 0.013;
            got.push_back(sol.level_shift(w));
            want.push_back(shift_oracle(k, w));
        }
        double scale = 0.0;
        for (double v : want) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-6 * scale);
    }
}

TEST_CASE("level shift and damping agree with a discretised bath") {
    // 2000 modes on [0, 20]; probes sit midway between modes so the mode sum
    // approximates the principal value symmetrically.
    const auto sol = TrwaSolution::solve(resonant_bath(0.1, 0.3), 1.0);
    const ShiftKernel k{sol.density().alpha(), 0.3, sol.eta() * sol.delta()};
    const int n = 2000;
    const double h = 20.0 / n;
    double scale = 0.0;
    std::vector<double> r_modes, r_lib, g_modes, g_lib;
    for (int j = 0; j < 20; ++j) {
        const double w = h * (10 + 37 * j);
        double r = 0.0;
        for (int m = 0; m < n; ++m) {
            const double wk = (m + 0.5) * h;
            r += k(wk) * h / (w - wk);
        }
        // Imaginary part: pi times the mode weight per unit frequency at w,
        // read through a Gaussian window a few modes wide.
        const double eps = 3.0 * h;
        double g = 0.0;
        for (int m = 0; m < n; ++m) {
            const double wk = (m + 0.5) * h;
            g += k(wk) * h * std::exp(-0.5 * (w - wk) * (w - wk) / (eps * eps)) / (std::sqrt(2.0 * pi) * eps);
        }
        g *= pi;
        r_modes.push_back(r);
        r_lib.push_back(sol.level_shift(w));
        g_modes.push_back(g);
        g_lib.push_back(sol.damping(w));
        scale = std::max(scale, std::abs(r));
    }
    double g_scale = *std::max_element(g_lib.begin(), g_lib.end());
    for (std::size_t i = 0; i < r_modes.size(); ++i) {
        CHECK(std::abs(r_modes[i] - r_lib[i]) <= 0.01 * scale);
        CHECK(std::abs(g_modes[i] - g_lib[i]) <= 0.01 * g_scale);
    }
}

TEST_CASE("level shift far above the bath") {
    const auto sol = TrwaSolution::solve(resonant_bath(0.1, 0.1), 1.0);
    const double ed = sol.eta() * sol.delta();
    const double bound_weight = ed * ed * sol.density().total_weight();
    for (double w : {50.0, 100.0, 400.0}) {
        // Every mode lies below w, so the shift approaches zero from above.
        const double r = sol.level_shift(w);
        CHECK(r > 0.0);
        CHECK(std::abs(r) <= bound_weight / (w / 2.0));
    }
}

TEST_CASE("narrow bath acts as a single mode") {
    const double gamma = 0.002;
    const auto sol = TrwaSolution::solve(resonant_bath(0.1, gamma), 1.0);
    const double ed = sol.eta() * sol.delta();
    const double weight = sol.density().total_weight();
    for (double w : {0.3, 0.6, 1.5, 2.5}) {
        const double single = ed * ed * weight / ((1.0 + ed) * (1.0 + ed) * (w - 1.0));
        CHECK(sol.level_shift(w) == doctest::Approx(single).epsilon(0.02));
    }
}

TEST_CASE("spectral function is assembled from R and gamma") {
    const double gamma = 0.3;
    const auto sol = TrwaSolution::solve(resonant_bath(0.1, gamma), 1.0);
    const ShiftKernel k{sol.density().alpha(), gamma, sol.eta() * sol.delta()};
    for (double w : {0.4, 0.93, 1.1, 2.0}) {
        const double g = pi * k(w);
        const double d = w - k.ed - shift_oracle(k, w);
        CHECK(sol.spectral_function(w) == doctest::Approx(g / (pi * (d * d + g * g))).epsilon(1e-6));
    }
}

TEST_CASE("population starts at one") {
    for (double gamma : {0.005, 0.02, 0.3}) {
        for (double delta : {0.1, 1.0}) {
            const auto sol = TrwaSolution::solve(resonant_bath(0.1 * delta, gamma), delta);
            CHECK(std::abs(sol.sum_rule() - 1.0) <= 1e-3);
            CHECK(std::abs(sol.population(0.0) - 1.0) <= 1e-3);
        }
    }
    const auto sol = TrwaSolution::solve(resonant_bath(0.1, 0.3), 1.0);
    CHECK_THROWS_AS(sol.population(-1.0), DomainError);
}

TEST_CASE("population matches a direct cosine transform of A") {
    const auto sol = TrwaSolution::solve(resonant_bath(0.1, 0.3), 1.0);
    const double h = 5e-4, top = 10.0;
    std::vector<double> a;
    for (double w = 0.5 * h; w < top; w += h) a.push_back(sol.spectral_function(w));
    std::vector<double> t;
    for (double x = 0.0; x <= 100.0; x += 0.5) t.push_back(x);
    const auto p = sol.population(t);
    double err = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) sum += a[j] * std::cos((j + 0.5) * h * t[i]);
        err = std::max(err, std::abs(sum * h - p[i]));
    }
    CHECK(err <= 1e-3);
    CHECK(sol.error_estimate(t) <= 1e-4);
}

TEST_CASE("resonant dynamics shows the vacuum Rabi doublet") {
    const double delta = 1.0, g0 = 0.1;
    const auto sol = TrwaSolution::solve(resonant_bath(g0, 0.005), delta);
    std::vector<double> t;
    for (double x = 0.0; x <= 300.0; x += 0.2) t.push_back(x);
    const auto p = sol.population(t);
    std::vector<double> w, mag;
    for (double f = 0.6; f <= 1.4; f += 0.001) {
        cplx s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double hann = 0.5 - 0.5 * std::cos(2.0 * pi * i / (t.size() - 1));
            s += hann * p[i] * std::exp(cplx(0.0, f * t[i]));
        }
        w.push_back(f);
        mag.push_back(std::abs(s));
    }
    std::vector<std::pair<double, double>> peaks;
    for (std::size_t i = 1; i + 1 < mag.size(); ++i) {
        if (mag[i] > mag[i - 1] && mag[i] >= mag[i + 1]) peaks.push_back({mag[i], w[i]});
    }
    std::sort(peaks.rbegin(), peaks.rend());
    REQUIRE(peaks.size() >= 2);
    std::vector<double> top = {peaks[0].second, peaks[1].second};
    std::sort(top.begin(), top.end());
    CHECK(std::abs(top[0] - (delta - g0)) <= 0.02 * delta);
    CHECK(std::abs(top[1] - (delta + g0)) <= 0.02 * delta);
}

TEST_CASE("peak damping estimate") {
    const double g0 = 0.1, delta = 1.0;
    CHECK(peak_damping_estimate(g0, 0.02, delta) ==
          doctest::Approx(g0 * g0 * 0.02 / (g0 * g0 + std::pow(pi * 0.02, 2))));
    const double small = 1e-7, large = 1e4;
    CHECK(peak_damping_estimate(g0, 2 * small, delta) / peak_damping_estimate(g0, small, delta) ==
          doctest::Approx(2.0).epsilon(1e-6));
    CHECK(peak_damping_estimate(g0, 2 * large, delta) / peak_damping_estimate(g0, large, delta) ==
          doctest::Approx(0.5).epsilon(1e-6));
    // Golden-section search for the maximum over Gamma.
    double a = 1e-4, b = 1.0;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 200; ++i) {
        const double c = b - r * (b - a), d = a + r * (b - a);
        if (peak_damping_estimate(g0, c, delta) > peak_damping_estimate(g0, d, delta)) b = d;
        else a = c;
    }
    CHECK(pi * 0.5 * (a + b) * delta == doctest::Approx(g0).epsilon(1e-7));
}
