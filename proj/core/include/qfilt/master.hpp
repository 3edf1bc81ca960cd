#pragma once

// Unconditional (ensemble-averaged) dynamics:
//
//   d sigma/dt = -i[H, sigma] - (mu/2){b^dag b, sigma} + mu b sigma b^dag
//                + sqrt(mu) [ conj(f) b - f b^dag, sigma ]
//
// integrated with classical RK4.  This is the cross-validation oracle for the
// stochastic unravelings: averaging conditional states over records must
// reproduce sigma(t).
//
// For any initial coherent state the solution stays coherent with amplitude
//   d beta/dt = -(i omega + mu/2) beta - sqrt(mu) f(t),
// which has the closed form implemented by coherent_amplitude(); that gives an
// independent analytic oracle for the integrator itself.

#include <cstdint>
#include <vector>

#include "qfilt/model.hpp"

namespace qfilt {

struct MasterDiag {
    double max_trace_defect = 0.0;   // before each renormalization
    double max_herm_defect = 0.0;    // over samples
    double min_eigenvalue = 1.0;     // over samples
    double max_top_population = 0.0;
    std::int64_t renorm_events = 0;  // trace drift beyond 1e-9
    std::int64_t leak_warnings = 0;  // top-two-level population beyond 1e-8
    bool dt_guard_warning = false;   // dt * max(omega, mu, lambda^2) > 0.1
};

struct MasterRun {
    std::vector<double> grid;            // sample times (k * dt)
    std::vector<DensityMatrix> states;   // sigma at each sample
    double dt = 0.0;
    MasterDiag diag;
};

// Right-hand side of the master equation at time t (drive evaluated there).
DensityMatrix lindblad_rhs(const SystemModel& m, const DensityMatrix& sigma,
                           double t);

// Fast in-place form used by the integrators; `out` must be dim x dim.
void lindblad_rhs_into(const CavityOps& ops, const SystemModel& m,
                       const DensityMatrix& sigma, double t,
                       DensityMatrix& out);

// RK4 integration from the model's initial state.  t_final must be an integer
// multiple of dt (within 1e-9 relative).  Samples every `sample_stride` steps
// plus always the final time.  Aborts (NumericalAbort) on truncation leakage
// above 1e-4 or a sampled eigenvalue below -1e-8.
MasterRun integrate_master(const SystemModel& m, double t_final, double dt,
                           int sample_stride = 1);

// Analytic coherent amplitude beta(t) for initial amplitude beta0.
Complex coherent_amplitude(const SystemModel& m, Complex beta0, double t);

// |beta|^2 of the rotating steady state, mu lambda^2 / |i(omega-omega_f)+mu/2|^2
// (= 4 lambda^2 / mu on resonance).  Requires mu > 0 or detuned drive.
double steady_photon_number(const SystemModel& m);

}  // namespace qfilt
