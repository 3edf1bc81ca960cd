#pragma once

// Model builders shared across the suites.  Unless a test says otherwise the
// drive is resonant (omega_f = omega) and the run starts from vacuum.

#include "qfilt/fock.hpp"
#include "qfilt/model.hpp"
#include "qfilt/rng.hpp"

namespace testutil {

using qfilt::Complex;
using qfilt::FockCutoff;
using qfilt::PureState;
using qfilt::SystemModel;

inline SystemModel driven_cavity(int dim, double omega, double mu, double lambda,
                                 double phi = 0.0) {
    SystemModel m;
    m.cutoff = FockCutoff(dim);
    m.omega = omega;
    m.mu = mu;
    m.drive.lambda = lambda;
    m.drive.omega_f = omega;
    m.drive.phi = phi;
    m.initial = qfilt::vacuum_state(m.cutoff);
    return m;
}

inline SystemModel with_oscillator(SystemModel m, double epsilon,
                                   double theta = 0.0, double omega_r = 0.0) {
    m.lo.enabled = true;
    m.lo.epsilon = epsilon;
    m.lo.theta = theta;
    m.lo.omega_r = omega_r;
    return m;
}

// Random unit vector with the top `guard_levels` amplitudes zeroed, so the
// truncation-leakage monitors start from exactly zero top population.
inline PureState random_low_state(FockCutoff cutoff, std::uint64_t seed,
                                  int guard_levels = 4) {
    qfilt::CounterRng rng(seed, 0xabcd);
    PureState s;
    s.amplitudes = Eigen::VectorXcd::Zero(cutoff.dim);
    const int live = std::max(1, cutoff.dim - guard_levels);
    for (int n = 0; n < live; ++n) {
        // Damp the tail so the state stays well inside the truncated space.
        const double w = std::exp(-0.5 * n);
        s.amplitudes(n) = w * Complex(rng.next_gaussian(), rng.next_gaussian());
    }
    s.renormalize();
    return s;
}

}  // namespace testutil
