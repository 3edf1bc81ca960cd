#pragma once

// Physical model: damped cavity mode driven through a coherent input channel,
// optionally interfered with a local-oscillator field before detection.
//
// Conventions (hbar = 1 throughout):
//   H      = omega (b^dag b + 1/2)
//   f(t)   = lambda exp(-i omega_f t + i phi)     input-channel amplitude
//   r(t)   = exp(i (omega_r t + theta))           local oscillator (if enabled)
//   K      = i H + (mu/2) b^dag b                 damping-dressed generator
//
// The detector sees the jump operator C(t) = sqrt(mu) b + g(t) with the scalar
// shift g(t) = f(t) + r(t)/eps; direct photon counting is the g = f special
// case (oscillator off), which is why both unravelings share one code path.

#include <variant>

#include "qfilt/fock.hpp"

namespace qfilt {

struct DriveField {
    double lambda = 0.0;   // amplitude, >= 0
    double omega_f = 0.0;  // carrier frequency
    double phi = 0.0;      // phase at t = 0

    Complex eval(double t) const {
        return lambda * std::exp(Complex(0.0, -omega_f * t + phi));
    }
};

struct LocalOscillator {
    bool enabled = false;
    double epsilon = 0.0;  // inverse oscillator strength, > 0 when enabled
    double theta = 0.0;    // phase at t = 0 (selects the measured quadrature)
    double omega_r = 0.0;  // oscillator frequency

    // r(t); identically zero when the oscillator is off.
    Complex eval(double t) const {
        if (!enabled) return Complex(0.0, 0.0);
        return std::exp(Complex(0.0, omega_r * t + theta));
    }
};

using InitialState = std::variant<PureState, DensityMatrix>;

struct SystemModel {
    FockCutoff cutoff;
    double omega = 0.0;  // cavity frequency
    double mu = 0.0;     // coupling (damping) rate, >= 0
    DriveField drive;
    LocalOscillator lo;
    InitialState initial;

    int dim() const { return cutoff.dim; }
    bool initial_is_pure() const { return std::holds_alternative<PureState>(initial); }

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

// Input-channel amplitude f(t).
inline Complex eval_f(const SystemModel& m, double t) { return m.drive.eval(t); }

// Scalar shift g(t) = f(t) + r(t)/eps entering the jump operator.
inline Complex jump_shift(const SystemModel& m, double t) {
    Complex g = m.drive.eval(t);
    if (m.lo.enabled) g += m.lo.eval(t) / m.lo.epsilon;
    return g;
}

// K = i H + (mu/2) b^dag b.
Operator derived_K(const SystemModel& m);

// Drift generator of the linear (unnormalized) filter between detections:
//   R(t) = K + sqrt(mu) f(t) b^dag + sqrt(mu) (conj(r(t))/eps) b
//        + (1/2) |f(t) + r(t)/eps|^2 I
// With the oscillator off this is exactly K + sqrt(mu) f b^dag + |f|^2/2 I.
Operator derived_R(const SystemModel& m, double t);

// Operators a propagator needs, built once per run.  The dense forms are the
// public currency; the diagonal/off-diagonal arrays let the steppers apply
// b, b^dag, H and K in O(dim) since all of them are banded in the Fock basis.
struct CavityOps {
    explicit CavityOps(const SystemModel& m);

    int dim;
    double mu, sqrt_mu, omega;

    Operator b, bdag, num, h;  // dense copies
    Operator k;                // i h + (mu/2) num

    Eigen::VectorXd sqrt_np1;   // sqrt(n+1), n = 0..dim-1
    Eigen::VectorXd n_diag;     // 0..dim-1
    Eigen::VectorXd h_diag;     // omega (n + 1/2)
    Eigen::VectorXcd k_diag;    // (mu/2) n + i omega (n + 1/2)
};

// (b phi) into out: out[n] = sqrt(n+1) phi[n+1].
inline void apply_lower(const CavityOps& ops, const Eigen::VectorXcd& phi,
                        Eigen::VectorXcd& out) {
    const int d = ops.dim;
    for (int n = 0; n + 1 < d; ++n) out(n) = ops.sqrt_np1(n) * phi(n + 1);
    out(d - 1) = Complex(0.0, 0.0);
}

// (b^dag phi) into out: out[n] = sqrt(n) phi[n-1].
inline void apply_raise(const CavityOps& ops, const Eigen::VectorXcd& phi,
                        Eigen::VectorXcd& out) {
    const int d = ops.dim;
    out(0) = Complex(0.0, 0.0);
    for (int n = 1; n < d; ++n) out(n) = ops.sqrt_np1(n - 1) * phi(n - 1);
}

// <b> of a unit vector: sum_n sqrt(n+1) conj(phi_n) phi_{n+1}.
inline Complex mean_lowering(const CavityOps& ops, const Eigen::VectorXcd& phi) {
    Complex acc(0.0, 0.0);
    for (int n = 0; n + 1 < ops.dim; ++n) {
        acc += ops.sqrt_np1(n) * std::conj(phi(n)) * phi(n + 1);
    }
    return acc;
}

// <b^dag b> of a unit vector.
inline double mean_number(const CavityOps& ops, const Eigen::VectorXcd& phi) {
    double acc = 0.0;
    for (int n = 1; n < ops.dim; ++n) acc += double(n) * std::norm(phi(n));
    return acc;
}

}  // namespace qfilt
