#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sbdyn/models.hpp"
#include "sbdyn/spectral.hpp"

namespace sbdyn {

// Discretised influence coefficients eta_{kk'} for the symmetric splitting.
// Interior points own a slice of width dt centred on k dt; the first and the
// final point own half slices [0, dt/2] and [t - dt/2, t].
struct InfluenceTable {
    double dt = 0.0;
    int dk_max = 0;
    std::vector<double> dvr_values;

    // Bare double integrals of alpha over the slice windows.
    cplx diag_interior;
    cplx diag_start;
    cplx diag_end;
    // Indexed by separation d = 1..dk_max (entry 0 unused).
    std::vector<cplx> interior;    // full slice vs full slice
    std::vector<cplx> from_start;  // full slice vs initial half slice
    std::vector<cplx> to_end;      // final half slice vs full slice
    std::vector<cplx> end_start;   // final half slice vs initial half slice

    // (1/pi) int J(w)/w dw; enters the local coefficients as i * mu * width
    // when counter_term is set.
    double reorganization = 0.0;
    bool counter_term = false;

    // eta_{k,k'} (k >= k') along a path whose last point is n_final,
    // counter-term included. Zero beyond dk_max.
    cplx coefficient(int k, int kp, int n_final) const;
};

// Builds the table from a cached kernel; the kernel grid must have spacing
// <= dt/20 and cover (dk_max + 1) dt, otherwise ConfigError.
InfluenceTable build_influence_table(const ResponseKernel& kernel, double dt, int dk_max,
                                     std::span<const double> dvr_values, bool counter_term);

// Grid spacing used when building a kernel for the given step.
double kernel_spacing(const SpectralDensity& density, double dt);

// Convenience: tabulates the kernel of a path-integral density and builds
// the table for a model.
InfluenceTable make_influence_table(const SpectralDensity& quapi_density, double beta, double dt,
                                    int dk_max, const SystemModel& model);

struct PathPoint {
    double forward;
    double backward;
};

// exp{-sum_{k >= k'} (s+_k - s-_k)(eta_{kk'} s+_k' - eta*_{kk'} s-_k')} over a
// window of consecutive points (length <= dk_max + 1). Interior coefficients
// are used unless the window starts at t = 0 or ends at the final time.
cplx influence_factor(const InfluenceTable& table, std::span<const PathPoint> window,
                      bool starts_at_origin = false, bool ends_at_final = false);

// <s'| exp(-i H0 dt) |s> in the DVR basis.
Eigen::MatrixXcd bare_propagator(const SystemModel& model, double dt);

struct PropagationOptions {
    std::size_t max_tensor_entries = std::size_t{1} << 26;
};

struct PropagationResult {
    std::vector<double> times;
    std::vector<Eigen::MatrixXcd> rho;
    std::vector<double> population;
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
    double max_imaginary = 0.0;
    // Fewer steps than dk_max: the memory window never filled.
    bool pre_asymptotic = false;
};

// Iterative augmented-tensor evaluation of the discretised path sum with
// memory truncated after dk_max steps. rho[k] is the reduced density matrix at
// k dt, k = 0..n_steps.
PropagationResult propagate(const SystemModel& model, const InfluenceTable& table, int n_steps,
                            const PropagationOptions& opt = {});

// Number of tensor entries for a given system dimension and memory length.
std::size_t tensor_entries(std::size_t dimension, int dk_max);

struct ConvergenceReport {
    std::vector<double> parameters;
    std::vector<double> gaps;  // gaps[i] = sup |series[i+1] - series[i]|
    double tolerance = 0.0;
    bool converged = false;
    // First parameter from which every later successive gap stays within
    // tolerance; a single small gap followed by larger ones does not count.
    double converged_parameter = 0.0;
};

// Smallest i with gaps[j] <= tol for every j >= i.
std::optional<std::size_t> sustained_convergence(std::span<const double> gaps, double tol);

// Pairwise sup-norm gaps between series on the same grid, ordered by parameter.
ConvergenceReport convergence_report(std::span<const double> parameters,
                                     std::span<const std::vector<double>> series, double tolerance);

}  // namespace sbdyn
