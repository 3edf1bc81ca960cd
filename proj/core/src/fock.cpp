#include "qfilt/fock.hpp"

#include <cmath>

namespace qfilt {

double PureState::renormalize() {
    const double n = amplitudes.norm();
    if (!(n > 0.0)) {
        throw NumericalAbort("state norm vanished during propagation");
    }
    amplitudes /= n;
    normalized = true;
    return std::abs(n - 1.0);
}

Operator annihilation(FockCutoff cutoff) {
    Operator b = Operator::Zero(cutoff.dim, cutoff.dim);
    for (int n = 1; n < cutoff.dim; ++n) {
        b(n - 1, n) = std::sqrt(double(n));
    }
    return b;
}

Operator creation(FockCutoff cutoff) {
    return annihilation(cutoff).adjoint();
}

Operator number_operator(FockCutoff cutoff) {
    Operator n = Operator::Zero(cutoff.dim, cutoff.dim);
    for (int k = 0; k < cutoff.dim; ++k) n(k, k) = double(k);
    return n;
}

Operator hamiltonian(FockCutoff cutoff, double omega) {
    Operator h = Operator::Zero(cutoff.dim, cutoff.dim);
    for (int k = 0; k < cutoff.dim; ++k) h(k, k) = omega * (double(k) + 0.5);
    return h;
}

PureState vacuum_state(FockCutoff cutoff) {
    PureState s{Eigen::VectorXcd::Zero(cutoff.dim), true};
    s.amplitudes(0) = 1.0;
    return s;
}

PureState fock_state(FockCutoff cutoff, int n) {
    if (n < 0 || n >= cutoff.dim) {
        throw std::invalid_argument("fock_state: level outside the truncated space");
    }
    PureState s{Eigen::VectorXcd::Zero(cutoff.dim), true};
    s.amplitudes(n) = 1.0;
    return s;
}

double coherent_tail_weight(FockCutoff cutoff, Complex beta) {
    // Photon number of |beta> is Poisson with mean |beta|^2; accumulate the
    // retained weight with the stable term recursion p_n = p_{n-1} m / n.
    const double mean = std::norm(beta);
    double term = std::exp(-mean);
    double kept = term;
    for (int n = 1; n < cutoff.dim; ++n) {
        term *= mean / double(n);
        kept += term;
    }
    return std::max(0.0, 1.0 - kept);
}

PureState coherent_state(FockCutoff cutoff, Complex beta, double max_leakage) {
    const double tail = coherent_tail_weight(cutoff, beta);
    if (tail > max_leakage) {
        throw std::invalid_argument(
            "coherent_state: truncation leakage " + std::to_string(tail) +
            " exceeds " + std::to_string(max_leakage) +
            "; raise the cutoff or shrink |beta|");
    }
    PureState s{Eigen::VectorXcd(cutoff.dim), true};
    // c_n = beta^n / sqrt(n!) via c_n = c_{n-1} beta / sqrt(n); the overall
    // e^{-|beta|^2/2} factor is absorbed by the final renormalization.
    Complex c = 1.0;
    s.amplitudes(0) = c;
    for (int n = 1; n < cutoff.dim; ++n) {
        c *= beta / std::sqrt(double(n));
        s.amplitudes(n) = c;
    }
    s.amplitudes /= s.amplitudes.norm();
    return s;
}

DensityMatrix thermal_state(FockCutoff cutoff, double nbar) {
    if (nbar < 0.0) throw std::invalid_argument("thermal_state: nbar must be >= 0");
    DensityMatrix rho = DensityMatrix::Zero(cutoff.dim, cutoff.dim);
    const double ratio = nbar / (1.0 + nbar);
    double w = 1.0, total = 0.0;
    for (int n = 0; n < cutoff.dim; ++n) {
        rho(n, n) = w;
        total += w;
        w *= ratio;
    }
    rho /= total;
    return rho;
}

DensityMatrix projector(const PureState& state) {
    return state.amplitudes * state.amplitudes.adjoint();
}

Complex expectation(const Operator& z, const PureState& state) {
    if (z.rows() != state.dim() || z.cols() != state.dim()) {
        throw std::invalid_argument("expectation: operator/state dimension mismatch");
    }
    if (!state.normalized || std::abs(state.norm() - 1.0) > 1e-8) {
        throw std::invalid_argument("expectation: state is not normalized");
    }
    return state.amplitudes.dot(z * state.amplitudes);  // Eigen dot conjugates lhs
}

Complex expectation(const Operator& z, const DensityMatrix& rho) {
    if (z.rows() != rho.rows() || z.cols() != rho.cols()) {
        throw std::invalid_argument("expectation: operator/state dimension mismatch");
    }
    return (z * rho).trace();
}

double purity(const DensityMatrix& rho) {
    return (rho * rho).trace().real();
}

double trace_defect(const DensityMatrix& rho) {
    return std::abs(rho.trace() - Complex(1.0));
}

double hermiticity_defect(const Eigen::MatrixXcd& m) {
    return (m - m.adjoint().eval()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const DensityMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(
        ((rho + rho.adjoint()) / 2.0).eval(), Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

double trace_distance(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    if (rho1.rows() != rho2.rows()) {
        throw std::invalid_argument("trace_distance: dimension mismatch");
    }
    Eigen::MatrixXcd diff = rho1 - rho2;
    diff = ((diff + diff.adjoint()) / 2.0).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(diff, Eigen::EigenvaluesOnly);
    return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

double fidelity(const PureState& a, const PureState& b) {
    return std::abs(a.amplitudes.dot(b.amplitudes));
}

double fidelity(const PureState& state, const DensityMatrix& rho) {
    const Complex overlap = state.amplitudes.dot(rho * state.amplitudes);
    return std::sqrt(std::max(0.0, overlap.real()));
}

double top_level_population(const PureState& state) {
    const int d = state.dim();
    const double n2 = state.norm_squared();
    if (!(n2 > 0.0)) return 1.0;
    return (std::norm(state.amplitudes(d - 1)) + std::norm(state.amplitudes(d - 2))) / n2;
}

double top_level_population(const DensityMatrix& rho) {
    const int d = int(rho.rows());
    const double tr = rho.trace().real();
    if (!(tr > 0.0)) return 1.0;
    return (rho(d - 1, d - 1).real() + rho(d - 2, d - 2).real()) / tr;
}

}  // namespace qfilt
