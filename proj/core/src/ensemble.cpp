#include "qfilt/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "qfilt/detail/grid.hpp"
#include "qfilt/diffusion.hpp"
#include "qfilt/heterodyne.hpp"

namespace qfilt {

namespace {

using Eigen::VectorXcd;

// Partial sums from one contiguous batch of trajectories. All members are
// plain accumulations, so merging partials in batch-index order reproduces
// the single-threaded reduction exactly.
struct BatchPartial {
    std::vector<double> sum_re, sum_im, sum_n, sum_purity;  // per sample
    std::vector<DensityMatrix> sum_rho;                     // per sample (optional)
    std::vector<std::int64_t> hist;                         // jump-count histogram
    double sum_count = 0.0, sum_count2 = 0.0;
    double sum_w = 0.0, sum_w2 = 0.0;
    std::int64_t completed = 0;
    std::int64_t aborted = 0;
    TrajectoryDiag diag;
};

// Per-batch means kept for the batch-means standard errors. Each row is
// written by the single worker that owns the batch, so no locking is needed.
struct BatchMeans {
    std::vector<double> re, im, n;  // per sample
    std::int64_t completed = 0;
};

BatchPartial make_partial(std::size_t n_samples, int dim, bool want_rho) {
    BatchPartial p;
    p.sum_re.assign(n_samples, 0.0);
    p.sum_im.assign(n_samples, 0.0);
    p.sum_n.assign(n_samples, 0.0);
    p.sum_purity.assign(n_samples, 0.0);
    if (want_rho) {
        p.sum_rho.assign(n_samples, DensityMatrix::Zero(dim, dim));
    }
    return p;
}

void merge_diag(TrajectoryDiag& into, const TrajectoryDiag& from) {
    into.max_defect = std::max(into.max_defect, from.max_defect);
    into.max_top_population =
        std::max(into.max_top_population, from.max_top_population);
    into.leak_warnings += from.leak_warnings;
    into.guard_warnings += from.guard_warnings;
    into.min_eigenvalue = std::min(into.min_eigenvalue, from.min_eigenvalue);
}

// Samples, mean-state contribution and diagnostics are shaped identically for
// jump and diffusion trajectories.
template <typename Traj>
void accumulate_samples(BatchPartial& p, const Traj& tr, bool want_rho,
                        std::size_t n_samples) {
    if (tr.samples.size() != n_samples) {
        throw std::logic_error("trajectory sample count does not match grid");
    }
    for (std::size_t s = 0; s < n_samples; ++s) {
        const SampleRow& row = tr.samples[s];
        p.sum_re[s] += row.re_b;
        p.sum_im[s] += row.im_b;
        p.sum_n[s] += row.n;
        p.sum_purity[s] += row.purity;
        if (want_rho) {
            if (tr.pure) {
                const VectorXcd& v = tr.states[s].amplitudes;
                p.sum_rho[s] += v * v.adjoint();
            } else {
                p.sum_rho[s] += tr.dm_states[s];
            }
        }
    }
    merge_diag(p.diag, tr.diag);
}

// Jump-count bookkeeping plus the per-step increments dW = eps dN - dt/eps of
// the scaled click record. Click times sit on the step grid, so clicks can be
// grouped by step without storing a per-step array: every unclicked step
// contributes (dt/eps)^2 to sum(dW^2), and a step with c clicks replaces that
// with (eps c - dt/eps)^2.
void accumulate_jump_record(BatchPartial& p, const JumpRecord& rec, double dt,
                            std::int64_t n_steps, bool w_moments) {
    const std::size_t n_jumps = rec.jump_times.size();
    if (p.hist.size() <= n_jumps) p.hist.resize(n_jumps + 1, 0);
    ++p.hist[n_jumps];
    const double nj = double(n_jumps);
    p.sum_count += nj;
    p.sum_count2 += nj * nj;

    if (!w_moments) return;
    const double eps = rec.epsilon.value();
    const double a = dt / eps;
    p.sum_w += eps * nj - double(n_steps) * a;
    double sum2 = double(n_steps) * a * a;
    std::size_t i = 0;
    while (i < n_jumps) {
        const std::int64_t k = detail::event_step(rec.jump_times[i], dt, n_steps);
        std::size_t j = i + 1;
        while (j < n_jumps &&
               detail::event_step(rec.jump_times[j], dt, n_steps) == k) {
            ++j;
        }
        const double c = double(j - i);
        sum2 += (eps * c - a) * (eps * c - a) - a * a;
        i = j;
    }
    p.sum_w2 += sum2;
}

void merge_partial(BatchPartial& into, const BatchPartial& from) {
    const std::size_t n_samples = into.sum_re.size();
    for (std::size_t s = 0; s < n_samples; ++s) {
        into.sum_re[s] += from.sum_re[s];
        into.sum_im[s] += from.sum_im[s];
        into.sum_n[s] += from.sum_n[s];
        into.sum_purity[s] += from.sum_purity[s];
    }
    if (!into.sum_rho.empty()) {
        for (std::size_t s = 0; s < n_samples; ++s) {
            into.sum_rho[s] += from.sum_rho[s];
        }
    }
    if (from.hist.size() > into.hist.size()) into.hist.resize(from.hist.size(), 0);
    for (std::size_t k = 0; k < from.hist.size(); ++k) into.hist[k] += from.hist[k];
    into.sum_count += from.sum_count;
    into.sum_count2 += from.sum_count2;
    into.sum_w += from.sum_w;
    into.sum_w2 += from.sum_w2;
    into.completed += from.completed;
    into.aborted += from.aborted;
    merge_diag(into.diag, from.diag);
}

}  // namespace

std::string to_string(Unraveling u) {
    switch (u) {
        case Unraveling::counting: return "counting";
        case Unraveling::heterodyne: return "heterodyne";
        case Unraveling::diffusion: return "diffusion";
    }
    throw std::invalid_argument("unknown unraveling");
}

EnsembleStats run_ensemble(const EnsembleSpec& spec, int workers) {
    spec.model.validate();
    if (spec.n_traj < 1) {
        throw std::invalid_argument("run_ensemble: n_traj must be >= 1");
    }
    if (spec.sample_stride < 1) {
        throw std::invalid_argument("run_ensemble: sample_stride must be >= 1");
    }
    if (workers < 1) {
        throw std::invalid_argument("run_ensemble: workers must be >= 1");
    }
    const std::int64_t n_steps = detail::step_count(spec.t_final, spec.dt);
    const bool diffusion = spec.unraveling == Unraveling::diffusion;
    if (diffusion) {
        // Fail fast on constraints the per-trajectory propagator enforces.
        if (!spec.model.lo.enabled) {
            throw std::invalid_argument(
                "diffusion unraveling requires the reference oscillator "
                "(lo.enabled)");
        }
        const double rate = std::max({spec.model.mu, std::abs(spec.model.omega),
                                      spec.model.drive.lambda *
                                          spec.model.drive.lambda});
        if (spec.dt * rate > 0.01) {
            throw std::invalid_argument(
                "diffusion step too coarse: dt * max(mu, |omega|, lambda^2) "
                "must be <= 0.01");
        }
    }
    const bool w_moments = diffusion || spec.model.lo.enabled;

    // Sample grid shared by every trajectory: t = 0, then every stride-th
    // step and the final step.
    std::vector<double> grid;
    grid.reserve(std::size_t(detail::sample_count(n_steps, spec.sample_stride)));
    grid.push_back(0.0);
    for (std::int64_t step = 1; step <= n_steps; ++step) {
        if (detail::is_sample_step(step, n_steps, spec.sample_stride)) {
            grid.push_back(double(step) * spec.dt);
        }
    }
    const std::size_t n_samples = grid.size();
    const int dim = spec.model.dim();

    // Fixed batch partition: depends on n_traj only, never on the worker
    // count, so the reduction order (and thus the result) is scheduling
    // independent.
    const std::int64_t n_batches = std::min<std::int64_t>(spec.n_traj, 32);
    auto batch_begin = [&](std::int64_t b) {
        return b * spec.n_traj / n_batches;
    };

    BatchPartial total = make_partial(n_samples, dim, spec.accumulate_mean_state);
    std::vector<BatchMeans> batch_means(static_cast<std::size_t>(n_batches));

    std::mutex merge_mu;
    std::map<std::int64_t, BatchPartial> parked;
    std::int64_t next_batch = 0;
    std::exception_ptr first_error;
    std::atomic<bool> stop{false};

    auto run_batch = [&](std::int64_t b) {
        BatchPartial part =
            make_partial(n_samples, dim, spec.accumulate_mean_state);
        const std::int64_t begin = batch_begin(b);
        const std::int64_t end = batch_begin(b + 1);
        for (std::int64_t i = begin; i < end; ++i) {
            if (stop.load(std::memory_order_relaxed)) return;
            TrajectoryParams tp;
            tp.t_final = spec.t_final;
            tp.dt = spec.dt;
            tp.base_seed = spec.base_seed;
            tp.trajectory_index = std::uint64_t(i);
            tp.method = spec.method;
            tp.sample_stride = spec.sample_stride;
            tp.record_states = spec.accumulate_mean_state;
            tp.record_noise = diffusion;
            try {
                switch (spec.unraveling) {
                    case Unraveling::counting: {
                        JumpTrajectory tr = simulate_counting(spec.model, tp);
                        accumulate_samples(part, tr,
                                           spec.accumulate_mean_state, n_samples);
                        accumulate_jump_record(part, tr.record, spec.dt, n_steps,
                                               w_moments);
                        break;
                    }
                    case Unraveling::heterodyne: {
                        JumpTrajectory tr = simulate_heterodyne(spec.model, tp);
                        accumulate_samples(part, tr,
                                           spec.accumulate_mean_state, n_samples);
                        accumulate_jump_record(part, tr.record, spec.dt, n_steps,
                                               w_moments);
                        break;
                    }
                    case Unraveling::diffusion: {
                        DiffusionTrajectory tr =
                            simulate_diffusion(spec.model, tp);
                        accumulate_samples(part, tr,
                                           spec.accumulate_mean_state, n_samples);
                        for (double dw : tr.w_increments) {
                            part.sum_w += dw;
                            part.sum_w2 += dw * dw;
                        }
                        break;
                    }
                }
                ++part.completed;
            } catch (const NumericalAbort&) {
                ++part.aborted;
            }
        }

        BatchMeans& bm = batch_means[std::size_t(b)];
        bm.completed = part.completed;
        if (part.completed > 0) {
            const double inv = 1.0 / double(part.completed);
            bm.re.resize(n_samples);
            bm.im.resize(n_samples);
            bm.n.resize(n_samples);
            for (std::size_t s = 0; s < n_samples; ++s) {
                bm.re[s] = part.sum_re[s] * inv;
                bm.im[s] = part.sum_im[s] * inv;
                bm.n[s] = part.sum_n[s] * inv;
            }
        }

        // Park the finished batch; fold everything that is ready, in batch
        // order, so the global sums see one canonical sequence.
        std::lock_guard<std::mutex> lk(merge_mu);
        parked.emplace(b, std::move(part));
        while (!parked.empty() && parked.begin()->first == next_batch) {
            merge_partial(total, parked.begin()->second);
            parked.erase(parked.begin());
            ++next_batch;
        }
    };

    auto worker_fn = [&](int w) {
        try {
            for (std::int64_t b = w; b < n_batches; b += workers) {
                if (stop.load(std::memory_order_relaxed)) return;
                run_batch(b);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lk(merge_mu);
            if (!first_error) first_error = std::current_exception();
            stop.store(true, std::memory_order_relaxed);
        }
    };

    if (workers == 1) {
        worker_fn(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(std::size_t(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn, w);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    if (double(total.aborted) > 1e-3 * double(spec.n_traj)) {
        throw NumericalAbort("ensemble aborted: " + std::to_string(total.aborted) +
                             " of " + std::to_string(spec.n_traj) +
                             " trajectories failed numerically");
    }

    EnsembleStats out;
    out.unraveling = spec.unraveling;
    out.dt = spec.dt;
    out.n_requested = spec.n_traj;
    out.n_completed = total.completed;
    out.n_aborted = total.aborted;
    out.n_batches = int(n_batches);
    out.grid = std::move(grid);
    out.diag = total.diag;

    const double inv_n = 1.0 / double(total.completed);
    out.obs.resize(n_samples);

    // Batch-means standard errors over the batches that completed at least
    // one trajectory.
    std::vector<const BatchMeans*> live;
    for (const BatchMeans& bm : batch_means) {
        if (bm.completed > 0) live.push_back(&bm);
    }
    const double nb = double(live.size());
    auto batch_se = [&](auto&& value) {
        if (live.size() < 2) return std::numeric_limits<double>::quiet_NaN();
        double mean = 0.0;
        for (const BatchMeans* bm : live) mean += value(*bm);
        mean /= nb;
        double ss = 0.0;
        for (const BatchMeans* bm : live) {
            const double d = value(*bm) - mean;
            ss += d * d;
        }
        return std::sqrt(ss / (nb * (nb - 1.0)));
    };

    for (std::size_t s = 0; s < n_samples; ++s) {
        EnsembleSampleStats& e = out.obs[s];
        e.t = out.grid[s];
        e.re_b.mean = total.sum_re[s] * inv_n;
        e.im_b.mean = total.sum_im[s] * inv_n;
        e.n.mean = total.sum_n[s] * inv_n;
        e.mean_purity = total.sum_purity[s] * inv_n;
        e.re_b.se = batch_se([s](const BatchMeans& bm) { return bm.re[s]; });
        e.im_b.se = batch_se([s](const BatchMeans& bm) { return bm.im[s]; });
        e.n.se = batch_se([s](const BatchMeans& bm) { return bm.n[s]; });
    }

    if (spec.accumulate_mean_state) {
        out.mean_rho.resize(n_samples);
        for (std::size_t s = 0; s < n_samples; ++s) {
            out.mean_rho[s] = total.sum_rho[s] * inv_n;
        }
    }

    if (!diffusion) {
        out.count_histogram = std::move(total.hist);
        out.mean_count = total.sum_count * inv_n;
        if (total.completed >= 2) {
            out.count_variance =
                (total.sum_count2 - double(total.completed) * out.mean_count *
                                        out.mean_count) /
                double(total.completed - 1);
        }
    }

    if (w_moments) {
        out.has_w_moments = true;
        const double m_steps = double(total.completed) * double(n_steps);
        const double mean_dw = total.sum_w / m_steps;
        out.w_mean_rate = mean_dw / spec.dt;
        out.w_var_rate = (total.sum_w2 / m_steps - mean_dw * mean_dw) / spec.dt;
    }
    return out;
}

ValidationReport validate_against_master(const EnsembleStats& stats,
                                         const MasterRun& reference) {
    if (stats.mean_rho.empty()) {
        throw std::invalid_argument(
            "validate_against_master: ensemble was run without "
            "accumulate_mean_state");
    }
    if (reference.grid.size() != stats.grid.size()) {
        throw std::invalid_argument(
            "validate_against_master: sample grids differ in length");
    }
    for (std::size_t s = 0; s < stats.grid.size(); ++s) {
        if (std::abs(reference.grid[s] - stats.grid[s]) >
            1e-12 * std::max(1.0, std::abs(stats.grid[s]))) {
            throw std::invalid_argument(
                "validate_against_master: sample grids differ at index " +
                std::to_string(s));
        }
    }

    ValidationReport rep;
    rep.n_completed = stats.n_completed;
    const double c = stats.unraveling == Unraveling::diffusion ? 20.0 : 10.0;
    rep.bound = std::max(4.0 / std::sqrt(double(stats.n_completed)),
                         c * stats.dt);
    rep.conclusive = rep.bound < 0.5 && stats.n_completed >= 20;

    rep.trace_distances.resize(stats.grid.size());
    for (std::size_t s = 0; s < stats.grid.size(); ++s) {
        const DensityMatrix& sigma = reference.states[s];
        const double d = trace_distance(stats.mean_rho[s], sigma);
        rep.trace_distances[s] = d;
        if (d >= rep.max_trace_distance) {
            rep.max_trace_distance = d;
            rep.t_at_max = stats.grid[s];
        }

        // Reference observables straight from the density matrix.
        Complex mb = 0.0;
        double mn = 0.0;
        const int dim = int(sigma.rows());
        for (int i = 0; i + 1 < dim; ++i) {
            mb += std::sqrt(double(i + 1)) * sigma(i + 1, i);
        }
        for (int i = 0; i < dim; ++i) mn += double(i) * sigma(i, i).real();

        auto push_z = [&](const MeanWithSe& v, double ref_value) {
            if (std::isfinite(v.se) && v.se > 0.0) {
                rep.max_abs_z =
                    std::max(rep.max_abs_z, std::abs(v.mean - ref_value) / v.se);
            }
        };
        push_z(stats.obs[s].re_b, mb.real());
        push_z(stats.obs[s].im_b, mb.imag());
        push_z(stats.obs[s].n, mn);
    }
    rep.pass = rep.max_trace_distance <= rep.bound;
    return rep;
}

}  // namespace qfilt
