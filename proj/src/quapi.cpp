#include "sbdyn/quapi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "sbdyn/error.hpp"

namespace sbdyn {
namespace {

constexpr double kGaussNodes[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                   0.8611363115940526};
constexpr double kGaussWeights[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                     0.3478548451374538};

// int_lo^hi alpha(tau) w(tau) dtau with w linear from w_lo to w_hi. The
// interval is cut at kernel grid points so each piece sees one polynomial of
// the interpolant and four-point Gauss-Legendre is exact.
cplx weighted_integral(const ResponseKernel& kernel, double lo, double hi, double w_lo, double w_hi) {
    if (!(hi > lo)) return 0.0;
    const double h = kernel.spacing();
    const double slope = (w_hi - w_lo) / (hi - lo);
    cplx acc = 0.0;
    double a = lo;
    while (a < hi) {
        double b = (std::floor(a / h + 1e-9) + 1.0) * h;
        if (b > hi || hi - b < 1e-12 * h) b = hi;
        const double mid = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        for (int q = 0; q < 4; ++q) {
            const double tau = mid + half * kGaussNodes[q];
            acc += kGaussWeights[q] * half * (w_lo + slope * (tau - lo)) * kernel(tau);
        }
        a = b;
    }
    return acc;
}

// int_{I1} dt' int_{I2} dt'' alpha(t' - t'') with I1 = [a1, b1] after I2 = [a2, b2].
cplx window_pair(const ResponseKernel& kernel, double a1, double b1, double a2, double b2) {
    const auto overlap = [&](double tau) {
        return std::max(0.0, std::min(b1, b2 + tau) - std::max(a1, a2 + tau));
    };
    std::vector<double> knots = {a1 - b2, a1 - a2, b1 - b2, b1 - a2};
    std::sort(knots.begin(), knots.end());
    cplx acc = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        acc += weighted_integral(kernel, knots[i], knots[i + 1], overlap(knots[i]), overlap(knots[i + 1]));
    }
    return acc;
}

// int_0^L dt' int_0^t' dt'' alpha(t' - t'').
cplx window_self(const ResponseKernel& kernel, double length) {
    return weighted_integral(kernel, 0.0, length, length, 0.0);
}

// exp{-(s+_k - s-_k)(eta s+_k' - eta* s-_k')}
cplx pair_factor(cplx eta, double fk, double bk, double fkp, double bkp) {
    return std::exp(-(fk - bk) * (eta * fkp - std::conj(eta) * bkp));
}

struct TensorStep {
    std::size_t dim;  // M^2
    std::size_t length;
    bool drop;
    std::size_t keep_modulus;  // D^(length - 2): digits that survive a drop
    const std::vector<cplx>* source;
    std::vector<cplx>* target;
    std::vector<const cplx*> factor_int;
    std::vector<const cplx*> factor_end;
    const cplx* propagator_row;
    cplx out;
    std::size_t x_new;

    void run(std::size_t level, std::size_t index, cplx prefix_int, cplx prefix_end) {
        const cplx* fi = factor_int[level];
        const cplx* fe = factor_end[level];
        if (level + 1 == length) {
            const cplx* a = source->data() + index * dim;
            cplx acc_end = 0.0;
            if (drop) {
                // The oldest digit is summed out; the survivors shift up one place.
                const std::size_t base = length == 1 ? 0 : (index % keep_modulus) * dim;
                cplx* t = target->data() + base * dim + x_new;
                for (std::size_t x = 0; x < dim; ++x) {
                    const cplx common = a[x] * propagator_row[x];
                    acc_end += common * fe[x];
                    if (length == 1) {
                        *t += common * prefix_int * fi[x];
                    } else {
                        t[x * dim] += common * prefix_int * fi[x];
                    }
                }
            } else {
                cplx* t = target->data() + index * dim * dim + x_new;
                for (std::size_t x = 0; x < dim; ++x) {
                    const cplx common = a[x] * propagator_row[x];
                    acc_end += common * fe[x];
                    t[x * dim] = common * prefix_int * fi[x];
                }
            }
            out += acc_end * prefix_end;
            return;
        }
        for (std::size_t x = 0; x < dim; ++x) {
            run(level + 1, index * dim + x, prefix_int * fi[x], prefix_end * fe[x]);
        }
    }
};

}  // namespace

cplx InfluenceTable::coefficient(int k, int kp, int n_final) const {
    if (kp > k) std::swap(k, kp);
    const int d = k - kp;
    if (d > dk_max) return 0.0;
    const cplx i(0.0, 1.0);
    if (d == 0) {
        if (k == 0) return diag_start + (counter_term ? i * reorganization * 0.5 * dt : 0.0);
        if (k == n_final) return diag_end + (counter_term ? i * reorganization * 0.5 * dt : 0.0);
        return diag_interior + (counter_term ? i * reorganization * dt : 0.0);
    }
    const auto ud = static_cast<std::size_t>(d);
    if (k == n_final) return kp == 0 ? end_start[ud] : to_end[ud];
    return kp == 0 ? from_start[ud] : interior[ud];
}

double kernel_spacing(const SpectralDensity& density, double dt) {
    return std::min(dt / 20.0, 1.0 / (50.0 * density.frequency_scale()));
}

InfluenceTable build_influence_table(const ResponseKernel& kernel, double dt, int dk_max,
                                     std::span<const double> dvr_values, bool counter_term) {
    if (!(dt > 0.0)) throw DomainError("influence table needs dt > 0");
    if (dk_max < 1) throw DomainError("influence table needs dk_max >= 1");
    if (kernel.spacing() > dt / 20.0 * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "kernel grid spacing " << kernel.spacing() << " too coarse for dt = " << dt;
        throw ConfigError(msg.str());
    }
    if (kernel.t_max() < (dk_max + 1) * dt * (1.0 - 1e-12)) {
        throw ConfigError("kernel table shorter than the memory window");
    }
    InfluenceTable t;
    t.dt = dt;
    t.dk_max = dk_max;
    t.dvr_values.assign(dvr_values.begin(), dvr_values.end());
    t.counter_term = counter_term;
    t.reorganization = counter_term ? kernel.density().reorganization() : 0.0;
    const double h = 0.5 * dt;
    t.diag_interior = window_self(kernel, dt);
    t.diag_start = window_self(kernel, h);
    t.diag_end = t.diag_start;
    const auto n = static_cast<std::size_t>(dk_max) + 1;
    t.interior.assign(n, 0.0);
    t.from_start.assign(n, 0.0);
    t.to_end.assign(n, 0.0);
    t.end_start.assign(n, 0.0);
    for (int d = 1; d <= dk_max; ++d) {
        const double c = d * dt;
        const auto ud = static_cast<std::size_t>(d);
        t.interior[ud] = window_pair(kernel, c - h, c + h, -h, h);
        t.from_start[ud] = window_pair(kernel, c - h, c + h, 0.0, h);
        t.to_end[ud] = window_pair(kernel, c - h, c, -h, h);
        t.end_start[ud] = window_pair(kernel, c - h, c, 0.0, h);
    }
    return t;
}

InfluenceTable make_influence_table(const SpectralDensity& quapi_density, double beta, double dt,
                                    int dk_max, const SystemModel& model) {
    const double spacing = kernel_spacing(quapi_density, dt);
    const ResponseKernel kernel(quapi_density, beta, (dk_max + 1) * dt, spacing);
    return build_influence_table(kernel, dt, dk_max, model.dvr_values, model.counter_term);
}

cplx influence_factor(const InfluenceTable& table, std::span<const PathPoint> window,
                      bool starts_at_origin, bool ends_at_final) {
    const int len = static_cast<int>(window.size());
    if (len > table.dk_max + 1) throw DomainError("influence window longer than dk_max + 1");
    if (len == 0) return 1.0;
    const int offset = starts_at_origin ? 0 : 1;
    const int last = len - 1 + offset;
    const int n_final = ends_at_final ? last : last + 1;
    cplx exponent = 0.0;
    for (int k = 0; k < len; ++k) {
        for (int kp = 0; kp <= k; ++kp) {
            const cplx eta = table.coefficient(k + offset, kp + offset, n_final);
            const auto& a = window[static_cast<std::size_t>(k)];
            const auto& b = window[static_cast<std::size_t>(kp)];
            exponent += (a.forward - a.backward) * (eta * b.forward - std::conj(eta) * b.backward);
        }
    }
    return std::exp(-exponent);
}

Eigen::MatrixXcd bare_propagator(const SystemModel& model, double dt) {
    if (!(dt >= 0.0)) throw DomainError("bare propagator needs dt >= 0");
    const auto& h = model.hamiltonian;
    if (h.rows() != h.cols()) throw ModelError("H0 is not square");
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw ModelError("H0 is not hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() != Eigen::Success) throw ModelError("H0 diagonalisation failed");
    const Eigen::VectorXcd phase =
        (es.eigenvalues().cast<cplx>() * cplx(0.0, -dt)).array().exp().matrix();
    return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

std::size_t tensor_entries(std::size_t dimension, int dk_max) {
    const std::size_t d = dimension * dimension;
    std::size_t n = 1;
    for (int i = 0; i < dk_max; ++i) {
        if (n > std::numeric_limits<std::size_t>::max() / d) return std::numeric_limits<std::size_t>::max();
        n *= d;
    }
    return n;
}

PropagationResult propagate(const SystemModel& model, const InfluenceTable& table, int n_steps,
                            const PropagationOptions& opt) {
    model.validate();
    if (n_steps < 0) throw DomainError("propagate needs n_steps >= 0");
    const std::size_t m = model.dimension();
    if (table.dvr_values.size() != m) throw ModelError("influence table and model disagree on dimension");
    for (std::size_t i = 0; i < m; ++i) {
        if (std::abs(table.dvr_values[i] - model.dvr_values[i]) > 1e-12) {
            throw ModelError("influence table and model disagree on DVR values");
        }
    }
    const int dk = table.dk_max;
    if (tensor_entries(m, dk) > opt.max_tensor_entries) {
        std::ostringstream msg;
        msg << "augmented tensor needs " << tensor_entries(m, dk) << " entries (M = " << m
            << ", dk_max = " << dk << "), cap is " << opt.max_tensor_entries;
        throw ResourceError(msg.str());
    }

    const std::size_t dim = m * m;
    std::vector<double> fwd(dim), bwd(dim);
    for (std::size_t x = 0; x < dim; ++x) {
        fwd[x] = model.dvr_values[x / m];
        bwd[x] = model.dvr_values[x % m];
    }
    const Eigen::MatrixXcd u = bare_propagator(model, table.dt);
    std::vector<cplx> prop(dim * dim);
    for (std::size_t xn = 0; xn < dim; ++xn) {
        for (std::size_t xo = 0; xo < dim; ++xo) {
            prop[xn * dim + xo] = u(static_cast<Eigen::Index>(xn / m), static_cast<Eigen::Index>(xo / m)) *
                                  std::conj(u(static_cast<Eigen::Index>(xn % m), static_cast<Eigen::Index>(xo % m)));
        }
    }
    const auto pair_matrix = [&](cplx eta) {
        std::vector<cplx> f(dim * dim);
        for (std::size_t xk = 0; xk < dim; ++xk) {
            for (std::size_t xp = 0; xp < dim; ++xp) {
                f[xk * dim + xp] = pair_factor(eta, fwd[xk], bwd[xk], fwd[xp], bwd[xp]);
            }
        }
        return f;
    };
    const auto local_vector = [&](cplx eta) {
        std::vector<cplx> g(dim);
        for (std::size_t x = 0; x < dim; ++x) g[x] = pair_factor(eta, fwd[x], bwd[x], fwd[x], bwd[x]);
        return g;
    };
    // Large n_final so that coefficient() reports interior/start variants.
    const int far = std::numeric_limits<int>::max();
    const auto g_start = local_vector(table.coefficient(0, 0, far));
    const auto g_int = local_vector(table.coefficient(1, 1, far));
    const auto g_end = local_vector(table.coefficient(1, 1, 1));
    std::vector<std::vector<cplx>> f_int(static_cast<std::size_t>(dk) + 1), f_start(f_int.size()),
        f_end(f_int.size()), f_end_start(f_int.size());
    for (int d = 1; d <= dk; ++d) {
        const auto ud = static_cast<std::size_t>(d);
        f_int[ud] = pair_matrix(table.coefficient(d + 1, 1, far));
        f_start[ud] = pair_matrix(table.coefficient(d, 0, far));
        f_end[ud] = pair_matrix(table.coefficient(d + 1, 1, d + 1));
        f_end_start[ud] = pair_matrix(table.coefficient(d, 0, d));
    }

    PropagationResult res;
    res.pre_asymptotic = n_steps < dk;
    res.times.reserve(static_cast<std::size_t>(n_steps) + 1);
    res.rho.reserve(static_cast<std::size_t>(n_steps) + 1);

    std::vector<cplx> tensor(dim);
    for (std::size_t x = 0; x < dim; ++x) {
        tensor[x] = model.initial_state(static_cast<Eigen::Index>(x / m), static_cast<Eigen::Index>(x % m)) * g_start[x];
    }
    res.times.push_back(0.0);
    res.rho.push_back(model.initial_state);
    std::size_t length = 1;
    int first_index = 0;  // path index of the oldest point held in the tensor

    for (int n = 0; n < n_steps; ++n) {
        const int k_new = n + 1;
        const bool drop = static_cast<int>(length) == dk;
        const std::size_t new_length = drop ? length : length + 1;
        std::size_t keep_modulus = 1;
        for (std::size_t i = 0; i + 2 < length; ++i) keep_modulus *= dim;
        std::size_t next_size = 1;
        for (std::size_t i = 0; i < new_length; ++i) next_size *= dim;
        std::vector<cplx> next(next_size, 0.0);

        std::vector<const std::vector<cplx>*> sel_int(length), sel_end(length);
        for (std::size_t p = 0; p < length; ++p) {
            const int k = first_index + static_cast<int>(p);
            const auto d = static_cast<std::size_t>(k_new - k);
            sel_int[p] = k == 0 ? &f_start[d] : &f_int[d];
            sel_end[p] = k == 0 ? &f_end_start[d] : &f_end[d];
        }

        std::vector<cplx> out(dim, 0.0);
        TensorStep step;
        step.dim = dim;
        step.length = length;
        step.drop = drop;
        step.keep_modulus = keep_modulus;
        step.source = &tensor;
        step.target = &next;
        step.factor_int.resize(length);
        step.factor_end.resize(length);
        for (std::size_t xn = 0; xn < dim; ++xn) {
            for (std::size_t p = 0; p < length; ++p) {
                step.factor_int[p] = sel_int[p]->data() + xn * dim;
                step.factor_end[p] = sel_end[p]->data() + xn * dim;
            }
            step.propagator_row = prop.data() + xn * dim;
            step.out = 0.0;
            step.x_new = xn;
            step.run(0, 0, g_int[xn], g_end[xn]);
            out[xn] = step.out;
        }

        Eigen::MatrixXcd rho(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        for (std::size_t x = 0; x < dim; ++x) {
            rho(static_cast<Eigen::Index>(x / m), static_cast<Eigen::Index>(x % m)) = out[x];
        }
        res.times.push_back(k_new * table.dt);
        res.rho.push_back(std::move(rho));

        tensor = std::move(next);
        if (drop) {
            ++first_index;
        } else {
            ++length;
        }
    }

    const auto obs = observable_series(model, res.rho);
    res.population = obs.values;
    res.max_imaginary = obs.max_imaginary;
    res.min_eigenvalue = 1.0;
    for (const auto& r : res.rho) {
        res.max_trace_error = std::max(res.max_trace_error, std::abs(r.trace() - 1.0));
        res.max_hermiticity_error = std::max(res.max_hermiticity_error, (r - r.adjoint()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly);
        res.min_eigenvalue = std::min(res.min_eigenvalue, es.eigenvalues().minCoeff());
    }
    return res;
}

ConvergenceReport convergence_report(std::span<const double> parameters,
                                     std::span<const std::vector<double>> series, double tolerance) {
    if (parameters.size() != series.size()) throw ConfigError("convergence report: parameter/series count mismatch");
    if (series.size() < 2) throw ConfigError("convergence report needs at least two series");
    for (const auto& s : series) {
        if (s.size() != series[0].size()) throw ConfigError("convergence report: mismatched time grids");
    }
    ConvergenceReport r;
    r.parameters.assign(parameters.begin(), parameters.end());
    r.tolerance = tolerance;
    for (std::size_t i = 0; i + 1 < series.size(); ++i) {
        double gap = 0.0;
        for (std::size_t j = 0; j < series[i].size(); ++j) {
            gap = std::max(gap, std::abs(series[i + 1][j] - series[i][j]));
        }
        r.gaps.push_back(gap);
    }
    if (const auto i = sustained_convergence(r.gaps, tolerance)) {
        r.converged = true;
        r.converged_parameter = parameters[*i];
    }
    return r;
}

std::optional<std::size_t> sustained_convergence(std::span<const double> gaps, double tol) {
    std::optional<std::size_t> first;
    for (std::size_t i = gaps.size(); i-- > 0;) {
        if (!(gaps[i] <= tol)) break;
        first = i;
    }
    return first;
}

}  // namespace sbdyn
