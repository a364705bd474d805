#include "sbdyn/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sbdyn/error.hpp"

namespace sbdyn {
namespace {

double hermiticity_gap(const Eigen::MatrixXcd& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace

void SystemModel::validate() const {
    const auto n = static_cast<Eigen::Index>(dimension());
    if (n == 0) throw ModelError("system model has no states");
    for (const auto* m : {&hamiltonian, &observable, &initial_state}) {
        if (m->rows() != n || m->cols() != n) throw ModelError("system model matrix has wrong dimension");
    }
    if (hermiticity_gap(hamiltonian) > 1e-12) throw ModelError("H0 is not hermitian");
    if (hermiticity_gap(observable) > 1e-12) throw ModelError("observable is not hermitian");
    if (!std::is_sorted(dvr_values.begin(), dvr_values.end())) {
        throw ModelError("DVR values must be ascending");
    }
    if (hermiticity_gap(initial_state) > 1e-12) throw ModelError("initial state is not hermitian");
    if (std::abs(initial_state.trace() - 1.0) > 1e-10) throw ModelError("initial state trace differs from 1");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(initial_state, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) throw ModelError("initial state is not positive semidefinite");
}

SystemModel build_qubit_model(double delta) {
    if (!(delta > 0.0)) throw DomainError("qubit model needs delta > 0");
    // Basis order follows the ascending coordinate: |down> (s = -1/2), |up> (s = +1/2).
    SystemModel m;
    m.name = "qubit";
    m.dvr_values = {-0.5, 0.5};
    m.hamiltonian = Eigen::MatrixXcd::Zero(2, 2);
    m.hamiltonian(0, 1) = m.hamiltonian(1, 0) = -0.5 * delta;
    m.observable = Eigen::MatrixXcd::Zero(2, 2);
    m.observable(0, 0) = -1.0;
    m.observable(1, 1) = 1.0;
    m.initial_state = Eigen::MatrixXcd::Zero(2, 2);
    m.initial_state(1, 1) = 1.0;
    m.counter_term = false;
    return m;
}

QubitOscillatorModel build_qubit_ho_model(double delta, double omega0, double g0, int fock_cut,
                                          int m_keep, double min_retained_norm) {
    if (!(delta > 0.0) || !(omega0 > 0.0) || !(g0 >= 0.0)) {
        throw DomainError("qubit-oscillator model needs delta > 0, Omega > 0, g0 >= 0");
    }
    if (m_keep < 1 || fock_cut < 1 || 2 * fock_cut < 10 * m_keep) {
        throw ConfigError("qubit-oscillator truncation needs 2 * fock_cut >= 10 * m_keep");
    }
    const int nf = fock_cut;
    const int n = 2 * nf;
    // Product basis index q * nf + k with q = 0 for |up>, q = 1 for |down>.
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd sz = Eigen::MatrixXd::Zero(n, n);
    for (int q = 0; q < 2; ++q) {
        const double sign = q == 0 ? 1.0 : -1.0;
        for (int k = 0; k < nf; ++k) {
            const int i = q * nf + k;
            h(i, i) = omega0 * k;
            sz(i, i) = sign;
            // -(Delta/2) sigma_x couples |up,k> and |down,k>.
            h(i, (1 - q) * nf + k) = -0.5 * delta;
            if (k + 1 < nf) {
                const double amp = std::sqrt(static_cast<double>(k + 1));
                x(i, i + 1) = x(i + 1, i) = amp;
                h(i, i + 1) += sign * g0 * amp;
                h(i + 1, i) += sign * g0 * amp;
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> energy(h);
    if (energy.info() != Eigen::Success) throw ModelError("qubit-oscillator diagonalisation failed");
    const Eigen::MatrixXd kept = energy.eigenvectors().leftCols(m_keep);

    Eigen::VectorXd psi0 = Eigen::VectorXd::Zero(n);
    psi0(0) = 1.0;  // |up> x |0>
    Eigen::VectorXd c = kept.transpose() * psi0;
    const double retained = c.squaredNorm();
    if (retained < min_retained_norm) {
        std::ostringstream msg;
        msg << "truncated subspace keeps only " << retained
            << " of the initial state norm; increase m_keep";
        throw TruncationError(msg.str(), retained);
    }
    c /= std::sqrt(retained);

    const Eigen::MatrixXd x_m = kept.transpose() * x * kept;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> coord(x_m);
    if (coord.info() != Eigen::Success) throw ModelError("coordinate diagonalisation failed");
    Eigen::MatrixXd w = coord.eigenvectors();
    for (int j = 0; j < m_keep; ++j) {
        Eigen::Index big;
        w.col(j).cwiseAbs().maxCoeff(&big);
        if (w(big, j) < 0.0) w.col(j) *= -1.0;
    }

    QubitOscillatorModel out;
    auto& m = out.model;
    m.name = "qubit-ho";
    m.dvr_values.assign(coord.eigenvalues().data(), coord.eigenvalues().data() + m_keep);
    const Eigen::VectorXd e = energy.eigenvalues().head(m_keep);
    m.hamiltonian = (w.transpose() * e.asDiagonal() * w).cast<std::complex<double>>();
    m.observable = (w.transpose() * (kept.transpose() * sz * kept) * w).cast<std::complex<double>>();
    const Eigen::VectorXd psi_dvr = w.transpose() * c;
    m.initial_state = (psi_dvr * psi_dvr.transpose()).cast<std::complex<double>>();
    m.counter_term = true;

    out.report.full_dimension = static_cast<std::size_t>(n);
    out.report.kept_dimension = static_cast<std::size_t>(m_keep);
    out.report.eigenvalues.assign(e.data(), e.data() + m_keep);
    out.report.retained_norm = retained;
    return out;
}

ObservableSeries observable_series(const SystemModel& model, std::span<const Eigen::MatrixXcd> rho) {
    ObservableSeries s;
    s.values.reserve(rho.size());
    const auto n = static_cast<Eigen::Index>(model.dimension());
    for (const auto& r : rho) {
        if (r.rows() != n || r.cols() != n) throw ModelError("density matrix dimension mismatch");
        const std::complex<double> v = (model.observable * r).trace();
        s.values.push_back(v.real());
        s.max_imaginary = std::max(s.max_imaginary, std::abs(v.imag()));
    }
    return s;
}

}  // namespace sbdyn
