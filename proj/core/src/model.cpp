#include "qfilt/model.hpp"

#include <cmath>

namespace qfilt {

void SystemModel::validate() const {
    if (mu < 0.0) {
        throw std::invalid_argument("model.mu: coupling rate must be >= 0");
    }
    if (!std::isfinite(mu) || !std::isfinite(omega)) {
        throw std::invalid_argument("model.omega/model.mu: must be finite");
    }
    if (drive.lambda < 0.0 || !std::isfinite(drive.lambda)) {
        throw std::invalid_argument("drive.lambda: amplitude must be >= 0 and finite");
    }
    if (lo.enabled && !(lo.epsilon > 0.0)) {
        throw std::invalid_argument("lo.epsilon: must be > 0 when lo.enabled");
    }
    const int d = cutoff.dim;
    if (initial_is_pure()) {
        const PureState& s = std::get<PureState>(initial);
        if (s.dim() != d) {
            throw std::invalid_argument("model.initial: state dimension != cutoff");
        }
        if (std::abs(s.norm() - 1.0) > 1e-10) {
            throw std::invalid_argument("model.initial: pure state is not normalized");
        }
    } else {
        const DensityMatrix& rho = std::get<DensityMatrix>(initial);
        if (rho.rows() != d || rho.cols() != d) {
            throw std::invalid_argument("model.initial: state dimension != cutoff");
        }
        if (trace_defect(rho) > 1e-8 || hermiticity_defect(rho) > 1e-10) {
            throw std::invalid_argument(
                "model.initial: density matrix must be Hermitian with unit trace");
        }
    }
}

Operator derived_K(const SystemModel& m) {
    const int d = m.dim();
    Operator k = Operator::Zero(d, d);
    for (int n = 0; n < d; ++n) {
        k(n, n) = Complex(0.5 * m.mu * double(n),               // (mu/2) n
                          m.omega * (double(n) + 0.5));         // i omega (n+1/2)
    }
    return k;
}

Operator derived_R(const SystemModel& m, double t) {
    const int d = m.dim();
    const double sqrt_mu = std::sqrt(m.mu);
    const Complex f = eval_f(m, t);
    const Complex g = jump_shift(m, t);

    Operator r = derived_K(m);
    r += 0.5 * std::norm(g) * Operator::Identity(d, d);
    const FockCutoff cutoff(d);
    r += sqrt_mu * f * creation(cutoff);
    if (m.lo.enabled) {
        r += sqrt_mu * (std::conj(m.lo.eval(t)) / m.lo.epsilon) * annihilation(cutoff);
    }
    return r;
}

CavityOps::CavityOps(const SystemModel& m)
    : dim(m.dim()),
      mu(m.mu),
      sqrt_mu(std::sqrt(m.mu)),
      omega(m.omega),
      b(annihilation(m.cutoff)),
      bdag(creation(m.cutoff)),
      num(number_operator(m.cutoff)),
      h(hamiltonian(m.cutoff, m.omega)),
      k(derived_K(m)),
      sqrt_np1(dim),
      n_diag(dim),
      h_diag(dim),
      k_diag(dim) {
    for (int n = 0; n < dim; ++n) {
        sqrt_np1(n) = std::sqrt(double(n) + 1.0);
        n_diag(n) = double(n);
        h_diag(n) = m.omega * (double(n) + 0.5);
        k_diag(n) = Complex(0.5 * m.mu * double(n), h_diag(n));
    }
}

}  // namespace qfilt
