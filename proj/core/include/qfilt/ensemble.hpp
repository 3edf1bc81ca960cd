// Deterministic trajectory ensembles.
//
// An ensemble runs n_traj independent trajectories of one unraveling and
// accumulates sample-grid statistics: per-observable means with standard
// errors, optionally the mean density matrix (for cross-checks against the
// deterministic evolution of the average state), the distribution of jump
// counts, and the pooled moments of the observed noise record.
//
// Determinism contract: results are bit-identical for any worker count.
// Trajectory i always draws from the RNG stream keyed by (base_seed, i).
// Trajectories are grouped into B = min(n_traj, 32) contiguous index batches;
// each batch is processed by exactly one worker in index order, and finished
// batches are folded into the global accumulator strictly in batch order
// (workers park out-of-order results until their turn). Floating-point
// reductions therefore happen in one fixed order no matter how the batches
// are scheduled. The batch partition depends only on n_traj, so the same
// (seed, n_traj) pair is reproducible across runs and machines.
//
// The per-batch partial sums are also the basis for the standard errors:
// with at least 20 trajectories there are at least 20 batches, and the SE of
// a mean is estimated from the spread of the per-batch means (batch-means
// estimator). This keeps the error bars well-defined even though individual
// samples along one trajectory are strongly correlated.

#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfilt/counting.hpp"
#include "qfilt/master.hpp"
#include "qfilt/model.hpp"

namespace qfilt {

// Which conditional dynamics generates the trajectories.
enum class Unraveling { counting, heterodyne, diffusion };

std::string to_string(Unraveling u);

// A sample mean together with its batch-means standard error. The SE is NaN
// when fewer than two batches contributed (no spread to estimate from).
struct MeanWithSe {
    double mean = 0.0;
    double se = std::numeric_limits<double>::quiet_NaN();
};

// Ensemble statistics at one sample time.
struct EnsembleSampleStats {
    double t = 0.0;
    MeanWithSe re_b;     // Re<b>
    MeanWithSe im_b;     // Im<b>
    MeanWithSe n;        // <N>
    double mean_purity = 0.0;
};

// Everything run_ensemble needs to know. Deliberately plain data so configs
// can be parsed into it and logged back out.
struct EnsembleSpec {
    SystemModel model;
    Unraveling unraveling = Unraveling::counting;
    JumpMethod method = JumpMethod::euler_bernoulli;  // ignored for diffusion
    std::int64_t n_traj = 1;
    double t_final = 1.0;
    double dt = 1e-3;
    int sample_stride = 1;
    std::uint64_t base_seed = 0;
    // Accumulate the per-sample mean density matrix (needed for validation
    // against the deterministic average-state evolution; costs O(dim^2) per
    // sample per trajectory).
    bool accumulate_mean_state = false;
};

struct EnsembleStats {
    // Echo of the run parameters that downstream consumers need.
    Unraveling unraveling = Unraveling::counting;
    double dt = 0.0;
    std::int64_t n_requested = 0;
    std::int64_t n_completed = 0;
    std::int64_t n_aborted = 0;
    int n_batches = 0;

    std::vector<double> grid;              // sample times
    std::vector<EnsembleSampleStats> obs;  // one entry per sample time

    // Mean conditioned state at each sample time (empty unless requested).
    std::vector<DensityMatrix> mean_rho;

    // Jump-count distribution across trajectories (index = number of jumps);
    // empty for the diffusion unraveling.
    std::vector<std::int64_t> count_histogram;
    double mean_count = std::numeric_limits<double>::quiet_NaN();
    double count_variance = std::numeric_limits<double>::quiet_NaN();

    // Pooled per-step moments of the observed noise record, normalized so
    // that a standard Wiener record gives mean_rate -> 0 and var_rate -> 1:
    // mean_rate = sum(dW) / (total steps * dt), var_rate = Var(dW) / dt.
    // Present for jump unravelings with the reference oscillator enabled
    // (where dW = eps*dN - dt/eps) and for the diffusion unraveling.
    bool has_w_moments = false;
    double w_mean_rate = std::numeric_limits<double>::quiet_NaN();
    double w_var_rate = std::numeric_limits<double>::quiet_NaN();

    // Worst-case per-trajectory diagnostics merged over the ensemble.
    TrajectoryDiag diag;
};

// Run the ensemble on `workers` threads (>= 1). Individual trajectories that
// fail with NumericalAbort are dropped and counted; if more than 0.1% of the
// requested trajectories abort the whole ensemble fails with NumericalAbort.
EnsembleStats run_ensemble(const EnsembleSpec& spec, int workers = 1);

// Comparison of an ensemble mean against the deterministic evolution of the
// average state, which the trajectory mean must reproduce.
struct ValidationReport {
    bool pass = false;
    // The comparison is only conclusive when the acceptance bound is tight
    // enough to mean anything (< 0.5) and enough trajectories completed
    // (>= 20); otherwise callers should report an inconclusive outcome
    // rather than a pass or fail.
    bool conclusive = false;
    double bound = 0.0;              // trace-distance acceptance bound
    double max_trace_distance = 0.0;
    double t_at_max = 0.0;
    double max_abs_z = 0.0;          // worst |mean - reference| / SE over
                                     // {Re<b>, Im<b>, <N>} and sample times
    std::vector<double> trace_distances;  // per sample time
    std::int64_t n_completed = 0;
};

// Compare ensemble means (which must have been run with
// accumulate_mean_state = true) against a deterministic reference evolution
// on the same sample grid. The bound is max(4/sqrt(n), C*dt) with C = 10 for
// jump unravelings and C = 20 for the diffusion unraveling (first-order
// time-stepping bias is the dominant systematic there).
ValidationReport validate_against_master(const EnsembleStats& stats,
                                         const MasterRun& reference);

}  // namespace qfilt
