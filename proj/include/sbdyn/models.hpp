#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sbdyn {

// Finite bare system for the path-integral engine, expressed in the
// discrete variable representation (eigenbasis of the system coordinate).
struct SystemModel {
    std::string name;
    Eigen::MatrixXcd hamiltonian;    // H0
    std::vector<double> dvr_values;  // coordinate eigenvalues, ascending
    Eigen::MatrixXcd observable;     // sigma_z (or sigma_z x 1 projected)
    Eigen::MatrixXcd initial_state;  // rho_s(0)
    // Fold the counter-term phase into the local influence coefficients.
    bool counter_term = false;

    std::size_t dimension() const noexcept { return dvr_values.size(); }

    // Throws ModelError when an invariant is violated.
    void validate() const;
};

struct TruncationReport {
    std::size_t full_dimension = 0;
    std::size_t kept_dimension = 0;
    std::vector<double> eigenvalues;  // lowest kept energies, ascending
    double retained_norm = 1.0;       // |P_M psi0|^2 before renormalisation
};

// Bare qubit -(Delta/2) sigma_x with coordinate sigma_z / 2, starting in the
// upper sigma_z eigenstate.
SystemModel build_qubit_model(double delta);

struct QubitOscillatorModel {
    SystemModel model;
    TruncationReport report;
};

// Qubit coupled to one oscillator, -(Delta/2) sigma_x + Omega B^dag B
// + g0 sigma_z (B^dag + B), diagonalised on 2 * fock_cut states and truncated
// to the m_keep lowest eigenstates. Coordinate is B^dag + B.
QubitOscillatorModel build_qubit_ho_model(double delta, double omega0, double g0,
                                          int fock_cut = 200, int m_keep = 2,
                                          double min_retained_norm = 0.999);

struct ObservableSeries {
    std::vector<double> values;
    double max_imaginary = 0.0;
};

// Re Tr(observable * rho_k) for each matrix; the largest imaginary residue is
// reported alongside.
ObservableSeries observable_series(const SystemModel& model, std::span<const Eigen::MatrixXcd> rho);

}  // namespace sbdyn
