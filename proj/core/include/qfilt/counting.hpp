#pragma once

// Conditional dynamics under direct photon counting of the output channel.
//
// Detections occur at rate I(t) = ||C(t) phi||^2 with C(t) = sqrt(mu) b + g(t)
// (g = f for direct counting; heterodyne.hpp reuses everything here with
// g = f + r/eps, so both unravelings share one sampler and one stepper).
//
// Between clicks the normalized state obeys
//   d phi = [ -R(t) + I(t)/2 ] phi dt,     R(t) = derived_R(m, t),
// and at a click phi -> C phi / ||C phi||.  Two samplers are provided:
//   euler_bernoulli -- Euler drift plus a Bernoulli(I dt) click per step;
//   waiting_time    -- propagate the unnormalized linear filter
//                      d psi = -R(t) psi dt and click when ||psi||^2 first
//                      crosses a uniform threshold (the squared norm is the
//                      no-click survival probability).
// Both have O(dt) sampling bias; they must agree in distribution.
//
// Density-matrix initial states are propagated with the conditional master
// equation sme_counting_step (same click statistics, mixed states allowed).

#include <cstdint>
#include <optional>
#include <vector>

#include "qfilt/model.hpp"
#include "qfilt/rng.hpp"

namespace qfilt {

enum class JumpMethod { euler_bernoulli, waiting_time };

// Hard step-size failure: with the local oscillator on, dt * intensity must
// stay below 0.1 (the sampler refuses to clamp a click probability that
// large).  Direct counting only warns and clamps.
struct StepGuardViolation : NumericalAbort {
    using NumericalAbort::NumericalAbort;
};

// Detection record: strictly increasing click times in (0, t_final].
// `epsilon` is set when the local oscillator was on -- together with the
// times it is the stored form of the observed photocurrent.
struct JumpRecord {
    std::vector<double> jump_times;
    std::optional<double> epsilon;
};

struct TrajectoryDiag {
    double max_defect = 0.0;          // pre-renormalization norm/trace defect
    double max_top_population = 0.0;  // leakage monitor
    std::int64_t leak_warnings = 0;
    std::int64_t guard_warnings = 0;  // dt * intensity >= 0.1 occurrences
    double min_eigenvalue = 1.0;      // density-matrix paths only
};

// One row of the observable time series (the CSV row format).
struct SampleRow {
    double t;
    double re_b, im_b;  // <b>
    double n;           // <b^dag b>
    double purity;      // tr(rho^2); exactly 1 on pure-state paths
    double defect;      // pre-renormalization defect at the sample step
};

struct TrajectoryParams {
    double t_final = 1.0;
    double dt = 1e-3;
    std::uint64_t base_seed = 0;
    std::uint64_t trajectory_index = 0;  // selects the private RNG stream
    JumpMethod method = JumpMethod::euler_bernoulli;
    int sample_stride = 1;
    bool record_states = false;  // keep per-sample states (ensembles, tests)
    bool record_noise = true;    // keep per-step dW (diffusion unraveling only)
};

struct JumpTrajectory {
    std::vector<SampleRow> samples;  // includes t = 0 and t = t_final
    JumpRecord record;
    bool pure = true;  // pure-filter path vs density-matrix path
    std::vector<PureState> states;          // per sample, when recorded (pure)
    std::vector<DensityMatrix> dm_states;   // per sample, when recorded (mixed)
    PureState final_state;
    DensityMatrix final_dm;
    JumpMethod method = JumpMethod::euler_bernoulli;
    std::uint64_t base_seed = 0, trajectory_index = 0;
    TrajectoryDiag diag;
};

using CountingTrajectory = JumpTrajectory;

// --- single-operation API (drive evaluated at time t) ------------------------

// I(t) = mu <b^dag b> + 2 sqrt(mu) Re(<b> conj(g)) + |g|^2, g = jump_shift(m,t).
double jump_intensity(const PureState& state, const SystemModel& m, double t);
double jump_intensity(const DensityMatrix& rho, const SystemModel& m, double t);

// phi -> C phi / ||C phi||; throws when ||C phi||^2 <= 1e-14 (a click with
// vanishing probability signals a sampler bug, not a physical event).
PureState apply_jump(const PureState& state, const SystemModel& m, double t);
DensityMatrix apply_jump(const DensityMatrix& rho, const SystemModel& m, double t);

// One no-click Euler step of the normalized filter, renormalized.
PureState nonlinear_drift_step(const PureState& state, const SystemModel& m,
                               double t, double dt);

// One Euler step of the conditional master equation with click indicator dN:
//   rho' = rho + L(rho) dt + (C rho C^dag / I - rho)(dN - I dt)
DensityMatrix sme_counting_step(const DensityMatrix& rho, const SystemModel& m,
                                double t, double dt, int dN);

// --- trajectory simulation ----------------------------------------------------

// Samples a full conditional trajectory.  Pure initial states use the method
// in `params`; density-matrix initial states always use the conditional
// master equation (the waiting-time construction needs the linear pure
// filter).  Bit-reproducible from (model, params).
CountingTrajectory simulate_counting(const SystemModel& m,
                                     const TrajectoryParams& params);

// --- deterministic replay of a fixed record ----------------------------------
// Click times must lie on the step grid (as produced by the samplers above).
// These drive the linear/nonlinear and pure/mixed consistency checks and work
// for either unraveling (the model's oscillator settings pick g).

PureState replay_record_nonlinear(const SystemModel& m, const JumpRecord& record,
                                  double t_final, double dt);
// Normalized endpoint of the linear (unnormalized) filter.
PureState replay_record_linear(const SystemModel& m, const JumpRecord& record,
                               double t_final, double dt);
DensityMatrix replay_record_sme(const SystemModel& m, const JumpRecord& record,
                                double t_final, double dt);

}  // namespace qfilt
