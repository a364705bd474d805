#include "sbdyn/quadrature.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <sstream>
#include <vector>

#include "sbdyn/error.hpp"

namespace sbdyn::quad {
namespace {

void disable_gsl_abort() {
    static std::once_flag flag;
    std::call_once(flag, [] { gsl_set_error_handler_off(); });
}

struct WorkspaceDeleter {
    void operator()(gsl_integration_workspace* w) const { gsl_integration_workspace_free(w); }
};
using Workspace = std::unique_ptr<gsl_integration_workspace, WorkspaceDeleter>;

struct QawoDeleter {
    void operator()(gsl_integration_qawo_table* t) const { gsl_integration_qawo_table_free(t); }
};
using QawoTable = std::unique_ptr<gsl_integration_qawo_table, QawoDeleter>;

Workspace make_workspace(std::size_t n) {
    Workspace w(gsl_integration_workspace_alloc(n));
    if (!w) throw ResourceError("cannot allocate integration workspace");
    return w;
}

// Carries the std::function through GSL's C callback and parks any exception
// so it can be rethrown once control is back in C++.
struct Thunk {
    const RealFn* fn;
    std::exception_ptr error;

    static double call(double x, void* p) {
        auto* self = static_cast<Thunk*>(p);
        if (self->error) return 0.0;
        try {
            return (*self->fn)(x);
        } catch (...) {
            self->error = std::current_exception();
            return 0.0;
        }
    }

    gsl_function as_gsl() { return gsl_function{&Thunk::call, this}; }
};

void check(int status, const Result& r, double tol, const Options& opt, const char* routine) {
    if (!std::isfinite(r.value) || !std::isfinite(r.error)) {
        throw NumericError(std::string(routine) + ": non-finite result", r.error);
    }
    if (status == GSL_SUCCESS) return;
    if (r.error <= opt.accept_factor * tol) return;
    std::ostringstream msg;
    msg << routine << " failed to converge (" << gsl_strerror(status)
        << "), error estimate " << r.error << " above tolerance " << tol;
    throw NumericError(msg.str(), r.error);
}

}  // namespace

Result integrate(const RealFn& f, double a, double b, std::span<const double> breakpoints,
                 const Options& opt) {
    disable_gsl_abort();
    if (!(b > a)) return {};
    std::vector<double> pts{a};
    for (double p : breakpoints) {
        if (p > a && p < b) pts.push_back(p);
    }
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](double x, double y) { return std::abs(x - y) <= 1e-14 * std::max(1.0, std::abs(x)); }),
              pts.end());

    // Panels between breakpoints are integrated separately with plain adaptive
    // Gauss-Kronrod; qagp's extrapolation misfires on smooth peaked integrands.
    Thunk thunk{&f, nullptr};
    gsl_function g = thunk.as_gsl();
    auto ws = make_workspace(opt.limit);
    Result total;
    int status = GSL_SUCCESS;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        Result r;
        const int s = gsl_integration_qag(&g, pts[i], pts[i + 1], opt.abs_tol / (pts.size() - 1),
                                          opt.rel_tol, opt.limit, GSL_INTEG_GAUSS31, ws.get(),
                                          &r.value, &r.error);
        if (thunk.error) std::rethrow_exception(thunk.error);
        if (s != GSL_SUCCESS) status = s;
        total.value += r.value;
        total.error += r.error;
    }
    check(status, total, std::max(opt.abs_tol, opt.rel_tol * std::abs(total.value)), opt,
          ("qag on [" + std::to_string(a) + ", " + std::to_string(b) + "]").c_str());
    return total;
}

Result integrate_to_infinity(const RealFn& f, double a, const Options& opt) {
    disable_gsl_abort();
    Thunk thunk{&f, nullptr};
    gsl_function g = thunk.as_gsl();
    auto ws = make_workspace(opt.limit);
    Result r;
    int status = gsl_integration_qagiu(&g, a, opt.abs_tol, opt.rel_tol, opt.limit, ws.get(),
                                       &r.value, &r.error);
    if (thunk.error) std::rethrow_exception(thunk.error);
    check(status, r, std::max(opt.abs_tol, opt.rel_tol * std::abs(r.value)), opt, "qagiu");
    return r;
}

Result fourier_to_infinity(const RealFn& f, double a, double omega, Weight w,
                           const Options& opt) {
    disable_gsl_abort();
    if (omega == 0.0) throw DomainError("fourier_to_infinity: omega must be non-zero");
    Thunk thunk{&f, nullptr};
    gsl_function g = thunk.as_gsl();
    auto ws = make_workspace(opt.limit);
    auto cycles = make_workspace(opt.limit);
    QawoTable table(gsl_integration_qawo_table_alloc(
        std::abs(omega), 1.0, w == Weight::Cos ? GSL_INTEG_COSINE : GSL_INTEG_SINE, 50));
    if (!table) throw ResourceError("cannot allocate qawo table");
    Result r;
    int status = gsl_integration_qawf(&g, a, opt.abs_tol, opt.limit, ws.get(), cycles.get(),
                                      table.get(), &r.value, &r.error);
    if (thunk.error) std::rethrow_exception(thunk.error);
    check(status, r, opt.abs_tol, opt, "qawf");
    if (omega < 0.0 && w == Weight::Sin) r.value = -r.value;
    return r;
}

Result fourier(const RealFn& f, double a, double b, double omega, Weight w, const Options& opt) {
    disable_gsl_abort();
    if (!(b > a)) return {};
    Thunk thunk{&f, nullptr};
    gsl_function g = thunk.as_gsl();
    auto ws = make_workspace(opt.limit);
    QawoTable table(gsl_integration_qawo_table_alloc(
        omega, b - a, w == Weight::Cos ? GSL_INTEG_COSINE : GSL_INTEG_SINE, 50));
    if (!table) throw ResourceError("cannot allocate qawo table");
    Result r;
    int status = gsl_integration_qawo(&g, a, opt.abs_tol, opt.rel_tol, opt.limit, ws.get(),
                                      table.get(), &r.value, &r.error);
    if (thunk.error) std::rethrow_exception(thunk.error);
    check(status, r, std::max(opt.abs_tol, opt.rel_tol * std::abs(r.value)), opt, "qawo");
    return r;
}

}  // namespace sbdyn::quad
