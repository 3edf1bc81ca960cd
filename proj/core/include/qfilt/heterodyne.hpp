#pragma once

// Counting of the output field after interference with a local oscillator
// r(t)/eps (heterodyne-style detection).  The only change relative to direct
// counting is the scalar shift in the jump operator:
//
//   C(t) = sqrt(mu) b + f(t) + r(t)/eps
//
// so this module reuses the counting engine verbatim; with the oscillator
// disabled (r = 0) every function here is bit-for-bit simulate_counting.
// Clicks arrive at O(1/eps^2) rate, which is why the step guard is a hard
// error here and why dt should scale like eps^2 (default_heterodyne_dt).
// The observed photocurrent is stored as (click times, eps); the diffusive
// scaling limit eps -> 0 is exercised by diffusion.hpp's convergence harness.

#include "qfilt/counting.hpp"

namespace qfilt {

using HeterodyneTrajectory = JumpTrajectory;

// I(t) = ||(sqrt(mu) b + f + r/eps) phi||^2, with f, r evaluated at t.
double het_intensity(const PureState& state, const SystemModel& m, double t);
double het_intensity(const DensityMatrix& rho, const SystemModel& m, double t);

// phi -> C phi / ||C phi||.
PureState het_apply_jump(const PureState& state, const SystemModel& m, double t);

// Same sampler as simulate_counting; named separately so call sites say which
// detection scheme the model describes.
HeterodyneTrajectory simulate_heterodyne(const SystemModel& m,
                                         const TrajectoryParams& params);

// Step size keeping the oscillator-driven click probability per step at 5%:
// dt = eps^2 / 20.
double default_heterodyne_dt(double epsilon);

}  // namespace qfilt
