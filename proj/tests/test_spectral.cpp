#include "doctest.h"

#include <cmath>
#include <vector>

#include "oracle.hpp"
#include "sbdyn/error.hpp"
#include "sbdyn/spectral.hpp"

using namespace sbdyn;
using oracle::pi;

TEST_CASE("lorentzian peak and ohmic cutoff values") {
    const double alpha = 0.003, gamma = 0.1;
    const auto lor = SpectralDensity::lorentzian(alpha, 1.0, gamma);
    CHECK(lor(1.0) == doctest::Approx(alpha / (2.0 * pi * pi * gamma * gamma)).epsilon(1e-14));
    const auto ohm = SpectralDensity::ohmic(0.05, 20.0);
    CHECK(ohm(20.0) == doctest::Approx(0.05 * 20.0 / std::exp(1.0)).epsilon(1e-14));
    CHECK(lor(0.0) == 0.0);
    CHECK_THROWS_AS(lor(-0.1), DomainError);
    CHECK_THROWS_AS(ohm(-1e-9), DomainError);
    CHECK_THROWS_AS(SpectralDensity::lorentzian(-1.0, 1.0, 0.1), DomainError);
    CHECK_THROWS_AS(SpectralDensity::lorentzian(0.1, 1.0, 0.0), DomainError);
}

TEST_CASE("lorentzian reduces to the ohmic form at low frequency") {
    const double alpha = 0.01;
    for (double gamma : {0.02, 0.1, 0.5}) {
        const auto lor = SpectralDensity::lorentzian(alpha, 1.0, gamma);
        for (double w = 1e-4; w <= 0.02; w += 1e-3) {
            CHECK(std::abs(lor(w) - 2.0 * alpha * w) / (2.0 * alpha * w) <= 0.05);
        }
    }
    const auto lor = SpectralDensity::lorentzian(alpha, 1.0, 0.1);
    CHECK(std::abs(lor(0.01) - 2.0 * alpha * 0.01) / (2.0 * alpha * 0.01) <= 0.02);
}

TEST_CASE("g0 and alpha mapping") {
    CHECK(map_g0_to_alpha(0.1, 0.02, 1.0) == doctest::Approx(1.6e-3).epsilon(1e-14));
    CHECK(map_alpha_to_g0(0.0, 0.3, 1.0) == 0.0);
    for (double g0 : {1e-4, 0.01, 0.1, 0.7}) {
        for (double gamma : {0.005, 0.1, 0.5, 3.0}) {
            for (double omega0 : {0.5, 1.0, 2.0}) {
                const double a = map_g0_to_alpha(g0, gamma, omega0);
                CHECK(std::abs(map_alpha_to_g0(a, gamma, omega0) - g0) <= 1e-14 * g0);
                CHECK(std::abs(map_g0_to_alpha(map_alpha_to_g0(a, gamma, omega0), gamma, omega0) - a) <=
                      1e-14 * a);
                CHECK(std::abs(g0 - omega0 * std::sqrt(a / (8.0 * gamma))) <= 1e-14 * g0);
            }
        }
    }
    const auto v = ViewMapping::from_g0(0.1, 0.02, 1.0);
    CHECK(v.alpha == doctest::Approx(1.6e-3));
    CHECK(ViewMapping::from_alpha(v.alpha, 0.02, 1.0).g0 == doctest::Approx(0.1).epsilon(1e-14));
    CHECK_THROWS_AS(map_g0_to_alpha(0.1, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(map_alpha_to_g0(0.1, 0.1, -1.0), DomainError);
    CHECK_THROWS_AS(map_g0_to_alpha(-0.1, 0.1, 1.0), DomainError);
}

TEST_CASE("lorentzian total weight matches the closed form") {
    for (double gamma : {0.02, 0.1, 0.3}) {
        const auto lor = SpectralDensity::lorentzian(0.01, 1.0, gamma);
        CHECK(lor.total_weight() == doctest::Approx(oracle::lorentzian_weight(0.01, gamma)).epsilon(1e-8));
    }
}

TEST_CASE("lorentzian weight beyond 50 Omega") {
    // The w^-3 tail carries alpha / 2500 of weight beyond 50 Omega, a relative
    // share of order 1e-4 rather than 1e-6; the library integrates it rather
    // than truncating.
    const double alpha = 0.01, gamma = 0.1;
    const double tail = oracle::gauss([&](double w) { return oracle::lorentzian_j(alpha, gamma, w); }, 50.0, 5000.0,
                                      20000) +
                        alpha / (5000.0 * 5000.0);
    const double share = tail / oracle::lorentzian_weight(alpha, gamma);
    CHECK(share == doctest::Approx(alpha / 2500.0 / oracle::lorentzian_weight(alpha, gamma)).epsilon(1e-2));
    CHECK(share > 1e-6);
}

TEST_CASE("response kernel at t = 0 is real and equals the weight over pi") {
    for (const auto& d : {SpectralDensity::lorentzian(0.01, 1.0, 0.1), SpectralDensity::ohmic(0.1, 20.0)}) {
        const auto a = response_kernel(d, kInfiniteBeta, 0.0);
        CHECK(a.imag() == 0.0);
        CHECK(a.real() > 0.0);
        CHECK(a.real() == doctest::Approx(d.total_weight() / pi).epsilon(1e-10));
    }
    CHECK(response_kernel(SpectralDensity::lorentzian(0.0, 1.0, 0.1), kInfiniteBeta, 3.0) == cplx(0.0, 0.0));
    CHECK_THROWS_AS(response_kernel(SpectralDensity::ohmic(0.1, 20.0), kInfiniteBeta, -1.0), DomainError);
    CHECK_THROWS_AS(response_kernel(SpectralDensity::ohmic(0.1, 20.0), 0.0, 1.0), DomainError);
}

TEST_CASE("ohmic kernel matches the closed form") {
    const double gamma = 0.1, wc = 20.0;
    const auto d = SpectralDensity::ohmic(gamma, wc);
    for (double t : {0.0, 0.01, 0.05, 0.2, 1.0, 3.0, 10.0}) {
        const cplx got = response_kernel(d, kInfiniteBeta, t);
        const cplx want = oracle::ohmic_kernel(gamma, wc, t);
        CHECK(std::abs(got - want) <= 1e-8 * std::abs(want));
    }
    // At t = 20 / wc the closed form gives |alpha| / |alpha(0)| = 1/401.
    const double ratio = std::abs(response_kernel(d, kInfiniteBeta, 20.0 / wc)) /
                         std::abs(response_kernel(d, kInfiniteBeta, 0.0));
    CHECK(ratio == doctest::Approx(1.0 / 401.0).epsilon(1e-8));
}

TEST_CASE("lorentzian kernel matches dense quadrature") {
    const double alpha = 0.01;
    for (double gamma : {0.02, 0.3}) {
        const auto d = SpectralDensity::lorentzian(alpha, 1.0, gamma);
        const double scale = std::abs(response_kernel(d, kInfiniteBeta, 0.0));
        for (double t : {0.0, 0.3, 1.7, 5.0, 12.5}) {
            const cplx got = response_kernel(d, kInfiniteBeta, t);
            const cplx want = oracle::lorentzian_kernel(alpha, gamma, t);
            CHECK(std::abs(got - want) <= 1e-6 * scale);
        }
    }
}

TEST_CASE("weakly damped lorentzian kernel oscillates at Omega") {
    const auto d = SpectralDensity::lorentzian(0.01, 1.0, 0.02);
    std::vector<double> zeros;
    double prev = response_kernel(d, kInfiniteBeta, 0.0).real();
    for (double t = 0.01; t < 12.0; t += 0.01) {
        const double cur = response_kernel(d, kInfiniteBeta, t).real();
        if ((prev > 0.0) != (cur > 0.0)) zeros.push_back(t);
        prev = cur;
    }
    REQUIRE(zeros.size() >= 4);
    for (std::size_t i = 1; i < zeros.size(); ++i) {
        CHECK(std::abs(zeros[i] - zeros[i - 1] - pi) <= 0.1 * pi);
    }
}

TEST_CASE("finite temperature kernel approaches the zero temperature one") {
    const auto d = SpectralDensity::lorentzian(0.01, 1.0, 0.1);
    for (double t : {0.0, 0.7, 4.0}) {
        const cplx cold = response_kernel(d, kInfiniteBeta, t);
        const cplx warm = response_kernel(d, 1e4, t);
        CHECK(std::abs(cold - warm) <= 1e-6 * std::abs(response_kernel(d, kInfiniteBeta, 0.0)));
        // The thermal excess comes from w below 1/beta and shrinks as beta^-2.
        const double d1 = std::abs(response_kernel(d, 100.0, t) - cold);
        const double d2 = std::abs(response_kernel(d, 1000.0, t) - cold);
        CHECK(d1 / d2 == doctest::Approx(100.0).epsilon(0.05));
        // Thermal occupation only adds to the real part.
        CHECK(std::abs(warm.imag() - cold.imag()) <= 1e-10);
    }
    // High temperature raises Re alpha(0) by the coth factor.
    CHECK(response_kernel(d, 2.0, 0.0).real() > response_kernel(d, kInfiniteBeta, 0.0).real());
}

TEST_CASE("tabulated kernel interpolates and conjugates") {
    const auto d = SpectralDensity::ohmic(0.1, 20.0);
    const ResponseKernel k(d, kInfiniteBeta, 2.0, 0.001);
    for (double t : {0.0, 0.00037, 0.0123, 0.5004, 1.9}) {
        const cplx want = oracle::ohmic_kernel(0.1, 20.0, t);
        CHECK(std::abs(k(t) - want) <= 1e-8 * std::abs(oracle::ohmic_kernel(0.1, 20.0, 0.0)));
        CHECK(k(-t) == std::conj(k(t)));
    }
    CHECK_THROWS_AS(k(5.0), ConfigError);
    CHECK_THROWS_AS(ResponseKernel(d, kInfiniteBeta, 1.0, 0.0), ConfigError);
}

TEST_CASE("path-integral density carries a factor pi") {
    const auto ohm = SpectralDensity::ohmic(0.1, 20.0);
    const auto q = quapi_density_from_physical(ohm);
    CHECK(q.quapi_mapped());
    CHECK(q.scale() == doctest::Approx(pi));
    for (double w : {0.1, 1.0, 20.0, 60.0}) CHECK(q(w) == doctest::Approx(pi * 0.1 * w * std::exp(-w / 20.0)));
    CHECK_THROWS_AS(quapi_density_from_physical(q), DomainError);
    const auto zero = quapi_density_from_physical(SpectralDensity::lorentzian(0.0, 1.0, 0.2));
    CHECK(zero.is_zero());
    CHECK(zero(1.0) == 0.0);
    // (1/pi) int pi Gamma exp(-w/wc) dw = Gamma wc.
    CHECK(q.reorganization() == doctest::Approx(0.1 * 20.0).epsilon(1e-10));
}
