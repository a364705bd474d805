// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed here.
// Exit status is the number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "sbdyn/error.hpp"
#include "sbdyn/harness.hpp"
#include "sbdyn/models.hpp"
#include "sbdyn/quapi.hpp"
#include "sbdyn/spectral.hpp"
#include "sbdyn/trwa.hpp"

using namespace sbdyn;

namespace {

constexpr double kTrwaFreeTol = 1e-3;
constexpr double kQuapiFreeTol = 1e-6;
constexpr double kBruteTol = 1e-10;
constexpr double kLadderTol = 0.02;
constexpr int kLadderMaxDk = 10;
constexpr double kAgreementTol = 0.1;
// Regression bounds on the achieved TRWA vs QUAPI2 gap (0.0031 and 0.151 on
// the first full run). fig4 misses the 0.1 bound: at Gamma = 0.005 the TRWA
// lines sit up to 0.004 Omega off the exact qubit-oscillator spectrum, which
// dephases by about 0.25 rad over ten periods.
constexpr double kFig2Pinned = 0.004;
constexpr double kFig4Pinned = 0.16;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

Scenario free_scenario(double delta) {
    Scenario s;
    s.name = "free";
    s.engines = {Engine::Trwa, Engine::Quapi1, Engine::Quapi2};
    s.delta = delta;
    s.g0 = 0.0;
    s.gamma = 0.1;
    s.horizon = 50.0;
    s.trwa_step = 0.05;
    s.dt = 0.25;
    s.dk_max = {2};
    return s;
}

void free_qubit(Outcome& o) {
    for (double delta : {1.0, 0.1}) {
        const auto records = run(free_scenario(delta));
        for (const auto& r : records) {
            double err = 0.0;
            for (std::size_t i = 0; i < r.times.size(); ++i) {
                err = std::max(err, std::abs(r.population[i] - std::cos(r.times[i])));
            }
            const double tol = r.engine == Engine::Trwa ? kTrwaFreeTol : kQuapiFreeTol;
            o.detail << " " << r.label << "(D=" << delta << ") " << err;
            o.require(err <= tol, r.label);
        }
    }
}

void brute_force(Outcome& o) {
    const auto q = build_qubit_model(1.0);
    const auto lor = quapi_density_from_physical(SpectralDensity::lorentzian(0.05, 1.0, 0.1));
    double worst = 0.0;
    for (int dk : {2, 3, 6}) {
        const auto table = make_influence_table(lor, kInfiniteBeta, 0.5, dk, q);
        const auto r = propagate(q, table, 6);
        for (int n = 1; n <= 6; ++n) {
            const auto want = oracle::path_sum(q, table, n);
            worst = std::max(worst, max_abs(r.rho[n] - want) / max_abs(want));
        }
    }
    o.detail << " max relative deviation " << worst;
    o.require(worst <= kBruteTol, "path sum");
}

void ladder(Outcome& o) {
    std::vector<double> gammas = {0.2, 0.3, 0.4, 0.5};
    std::vector<double> need;
    std::vector<double> values;
    for (int d = 1; d <= kLadderMaxDk; ++d) values.push_back(d);
    for (double g : gammas) {
        Scenario s;
        s.name = "ladder";
        s.engines = {Engine::Quapi1};
        s.delta = 1.0;
        s.g0 = 0.1;
        s.gamma = g;
        s.dt = 0.6;
        s.horizon = 50.0;
        s.dk_max = {kLadderMaxDk};
        s.scan_tolerance = kLadderTol;
        const auto rep = scan_convergence(s, ScanAxis::DkMax, values);
        const double n = rep.converged ? rep.converged_value : std::numeric_limits<double>::infinity();
        need.push_back(n);
        o.detail << " G=" << g << ":dk" << n << " (gaps";
        for (double x : rep.gaps) o.detail << " " << std::round(x * 1e4) / 1e4;
        o.detail << ")";
    }
    o.require(need[2] <= 3 && need[3] <= 3, "dk <= 3 at Gamma 0.4 and 0.5");
    o.require(std::abs(need[1] - 5) <= 1, "dk 5 +- 1 at Gamma 0.3");
    o.require(std::abs(need[0] - 7) <= 1, "dk 7 +- 1 at Gamma 0.2");
    o.require(std::is_sorted(need.rbegin(), need.rend()), "required dk non-increasing in Gamma");
}

void agreement(Outcome& o) {
    const double window = 20.0 * oracle::pi;  // ten periods in 1/Delta
    for (int fig : {2, 4}) {
        double worst = 0.0, worst_conv = 0.0;
        for (auto s : preset(fig)) {
            s.horizon = window;
            s.compare_horizon = window;
            const int top = s.dk_max.back();
            s.dk_max = {top - 1, top};
            const auto recs = run(s);
            const auto c = compare(recs[0], recs[2], kAgreementTol, window);
            worst = std::max(worst, c.sup);
            worst_conv = std::max(worst_conv, compare(recs[1], recs[2], kAgreementTol, window).sup);
            o.detail << " " << s.name << " " << c.sup;
        }
        const double pinned = fig == 2 ? kFig2Pinned : kFig4Pinned;
        o.detail << " | fig" << fig << " worst " << worst << " (pinned " << pinned << ", last dk step changes "
                 << worst_conv << ")";
        o.require(worst <= kAgreementTol, "fig" + std::to_string(fig) + " within 0.1");
        o.require(worst <= pinned, "fig" + std::to_string(fig) + " pinned bound");
    }
}

double trwa_rate(double delta, double gamma) {
    const double g0 = 0.1 * delta;
    const auto sol =
        TrwaSolution::solve(SpectralDensity::lorentzian(map_g0_to_alpha(g0, gamma, 1.0), 1.0, gamma), delta);
    return envelope_decay_rate(sol, 0.0, 200.0 / delta);
}

bool strictly(const std::vector<double>& v, bool increasing) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (increasing ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])) return false;
    }
    return true;
}

void reversal(Outcome& o) {
    const std::vector<double> weak = {0.005, 0.01, 0.02}, strong = {0.2, 0.3, 0.4, 0.5};
    for (double delta : {1.0, 0.1}) {
        std::vector<double> rw, rs;
        for (double g : weak) rw.push_back(trwa_rate(delta, g));
        for (double g : strong) rs.push_back(trwa_rate(delta, g));
        o.detail << " D=" << delta << " weak";
        for (double r : rw) o.detail << " " << r;
        o.detail << " strong";
        for (double r : rs) o.detail << " " << r;
        const bool resonant = delta == 1.0;
        o.require(strictly(rw, true), "weak set increasing at D=" + std::to_string(delta));
        o.require(strictly(rs, !resonant), std::string("strong set ") + (resonant ? "decreasing" : "increasing") +
                                              " at D=" + std::to_string(delta));
    }
}

void regime_law(Outcome& o) {
    const double g0 = 0.1, delta = 1.0;
    const double lo = peak_damping_estimate(g0, 2e-7, delta) / peak_damping_estimate(g0, 1e-7, delta);
    const double hi = peak_damping_estimate(g0, 2e4, delta) / peak_damping_estimate(g0, 1e4, delta);
    o.detail << " ratio small " << lo << " large " << hi;
    o.require(std::abs(lo - 2.0) <= 1e-5 && std::abs(hi - 0.5) <= 1e-5, "limiting ratios");
    double a = 1e-4, b = 1.0;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 200; ++i) {
        const double c = b - r * (b - a), d = a + r * (b - a);
        if (peak_damping_estimate(g0, c, delta) > peak_damping_estimate(g0, d, delta)) b = d;
        else a = c;
    }
    const double arg = 0.5 * (a + b);
    o.detail << " argmax pi*G*D/g0 " << oracle::pi * arg * delta / g0;
    o.require(std::abs(oracle::pi * arg * delta - g0) <= 1e-7 * g0, "argmax");
    std::vector<double> lw_weak, lw_strong;
    for (double g : {0.005, 0.01, 0.02}) {
        lw_weak.push_back(TrwaSolution::solve(SpectralDensity::lorentzian(map_g0_to_alpha(g0, g, 1.0), 1.0, g), delta)
                              .dominant_linewidth());
    }
    for (double g : {0.2, 0.3, 0.4, 0.5}) {
        lw_strong.push_back(
            TrwaSolution::solve(SpectralDensity::lorentzian(map_g0_to_alpha(g0, g, 1.0), 1.0, g), delta)
                .dominant_linewidth());
    }
    o.detail << " linewidth";
    for (double x : lw_weak) o.detail << " " << x;
    o.detail << " /";
    for (double x : lw_strong) o.detail << " " << x;
    o.require(strictly(lw_weak, true) && strictly(lw_strong, false), "linewidth rise then fall");
}

void memory_trend(Outcome& o) {
    std::vector<double> times;
    for (const auto& s : preset(1)) {
        times.push_back(tabulate_kernel(s).memory_time);
        o.detail << " G=" << s.gamma << ":" << times.back();
    }
    o.require(strictly(times, false), "memory time strictly decreasing");
}

void invariants(Outcome& o) {
    // Density matrix properties of a short-memory QUAPI run.
    const auto q = build_qubit_model(1.0);
    const auto ohm = quapi_density_from_physical(SpectralDensity::ohmic(0.005, 20.0));
    const auto r = propagate(q, make_influence_table(ohm, kInfiniteBeta, 0.3, 5, q), 300);
    o.detail << " trace " << r.max_trace_error << " herm " << r.max_hermiticity_error << " mineig "
             << r.min_eigenvalue;
    o.require(r.max_trace_error <= 1e-10, "trace");
    o.require(r.max_hermiticity_error <= 1e-10, "hermiticity");
    o.require(r.min_eigenvalue >= -1e-8, "positivity");

    // TRWA self-consistency and the level shift against an adaptive
    // principal-value rule.
    const double alpha = map_g0_to_alpha(0.1, 0.1, 1.0);
    const auto sol = TrwaSolution::solve(SpectralDensity::lorentzian(alpha, 1.0, 0.1), 1.0);
    o.detail << " eta residual " << sol.eta_residual();
    o.require(sol.eta_residual() <= 1e-10, "eta residual");
    const double ed = sol.eta() * 1.0;
    const auto f = [&](double w) { return ed * ed * oracle::lorentzian_j(alpha, 0.1, w) / ((w + ed) * (w + ed)); };
    double pv = 0.0, scale = 0.0;
    for (double w : {0.3, 0.9, 1.0, 1.1, 2.5}) {
        const double want = -oracle::cauchy(f, 0.0, 50.0, w) +
                            oracle::gauss([&](double x) { return f(x) / (w - x); }, 50.0, 5000.0, 20000);
        pv = std::max(pv, std::abs(sol.level_shift(w) - want));
        scale = std::max(scale, std::abs(want));
    }
    o.detail << " PV dev " << pv / scale;
    o.require(pv <= 1e-6 * scale, "principal value");

    // DVR basis change is unitary: H0 keeps the kept spectrum, propagator unitary.
    const auto ho = build_qubit_ho_model(1.0, 1.0, 0.1, 200, 6);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(ho.model.hamiltonian);
    double drift = 0.0;
    for (int i = 0; i < 6; ++i) drift = std::max(drift, std::abs(es.eigenvalues()(i) - ho.report.eigenvalues[i]));
    const auto u = bare_propagator(ho.model, 0.3);
    const double unit = max_abs(u * u.adjoint() - Eigen::MatrixXcd::Identity(6, 6));
    o.detail << " DVR spectrum " << drift << " unitarity " << unit;
    o.require(drift <= 1e-10 && unit <= 1e-12, "DVR unitarity");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<void(Outcome&)> check;
    };
    const std::vector<Criterion> all = {
        {1, "free qubit oracle", free_qubit},
        {2, "QUAPI equals brute-force path sum", brute_force},
        {3, "QUAPI1 memory convergence ladder", ladder},
        {4, "TRWA vs converged QUAPI2", agreement},
        {5, "decoherence reversal in TRWA decay rates", reversal},
        {6, "peak damping regime law", regime_law},
        {7, "kernel memory time trend", memory_trend},
        {8, "invariant suite", invariants},
    };
    int failed = 0;
    for (const auto& c : all) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.check(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [error: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d %s: %s (%.1fs)%s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                    o.detail.str().c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed;
}
