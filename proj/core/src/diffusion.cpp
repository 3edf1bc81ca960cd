#include "qfilt/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qfilt/detail/banded.hpp"
#include "qfilt/detail/grid.hpp"
#include "qfilt/ensemble.hpp"
#include "qfilt/master.hpp"

namespace qfilt {
namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

void require_oscillator(const SystemModel& m) {
    if (!m.lo.enabled) {
        throw std::invalid_argument(
            "lo.enabled: the diffusion unraveling needs the local oscillator "
            "(its phase selects the measured quadrature)");
    }
}

void require_dt_guard(const SystemModel& m, double dt) {
    const double scale =
        std::max({m.mu, std::abs(m.omega), m.drive.lambda * m.drive.lambda});
    if (dt * scale > 0.01) {
        throw std::invalid_argument(
            "dt * max(mu, |omega|, lambda^2) = " + std::to_string(dt * scale) +
            " exceeds 0.01; Euler-Maruyama needs a smaller step");
    }
}

double drift_from_mean(Complex mean_b, const SystemModel& m, double t) {
    const Complex rbar = std::conj(m.lo.eval(t));
    return 2.0 * ((std::sqrt(m.mu) * mean_b + eval_f(m, t)) * rbar).real();
}

struct DiffPureStepper {
    const SystemModel& m;
    CavityOps ops;
    VectorXcd bphi, bdphi, next;

    explicit DiffPureStepper(const SystemModel& model)
        : m(model), ops(model), bphi(ops.dim), bdphi(ops.dim), next(ops.dim) {}

    // One Euler-Maruyama step; renormalizes and returns the defect.
    // mean_b must be <b> of the incoming normalized phi.
    double step(VectorXcd& phi, Complex mean_b, double t, double dt, double dB) {
        apply_lower(ops, phi, bphi);
        apply_raise(ops, phi, bdphi);
        const Complex f = eval_f(m, t);
        const Complex rbar = std::conj(m.lo.eval(t));
        const double mu = ops.mu;
        const double sq = ops.sqrt_mu;
        // drift  = -K phi + sq(conj(f) b - f b^dag) phi + mu <b^dag> b phi
        //          - (mu/2)|<b>|^2 phi
        // noise  = sq conj(r) (b - <b>) phi
        const Complex b_coeff = sq * std::conj(f) + mu * std::conj(mean_b);
        const Complex noise_b = sq * rbar;
        const double half_b2 = 0.5 * mu * std::norm(mean_b);
        for (int n = 0; n < ops.dim; ++n) {
            const Complex drift = (-ops.k_diag(n) - half_b2) * phi(n) +
                                  b_coeff * bphi(n) - sq * f * bdphi(n);
            const Complex noise = noise_b * (bphi(n) - mean_b * phi(n));
            next(n) = phi(n) + dt * drift + dB * noise;
        }
        const double nrm = next.norm();
        if (!(nrm > 0.0)) throw NumericalAbort("state norm vanished");
        phi = next / nrm;
        return std::abs(nrm - 1.0);
    }
};

struct DiffDmStepper {
    const SystemModel& m;
    CavityOps ops;
    MatrixXcd lrho, brho, rhobd, next;

    explicit DiffDmStepper(const SystemModel& model)
        : m(model), ops(model), lrho(ops.dim, ops.dim), brho(ops.dim, ops.dim),
          rhobd(ops.dim, ops.dim), next(ops.dim, ops.dim) {}

    double step(MatrixXcd& rho, Complex mean_b, double t, double dt, double dB) {
        lindblad_rhs_into(ops, m, rho, t, lrho);
        detail::dm_b_left(ops, rho, brho);
        detail::dm_bdag_right(ops, rho, rhobd);
        const Complex r = m.lo.eval(t);
        const Complex rbar = std::conj(r);
        const double sq = ops.sqrt_mu;
        next = rho + dt * lrho +
               (dB * sq) * (rbar * (brho - mean_b * rho) +
                            r * (rhobd - std::conj(mean_b) * rho));
        const double tr = next.trace().real();
        if (!(tr > 0.0)) throw NumericalAbort("state trace vanished");
        rho = next / tr;
        return std::abs(tr - 1.0);
    }
};

double top_population(const VectorXcd& v) {
    const int d = int(v.size());
    return std::norm(v(d - 1)) + std::norm(v(d - 2));
}

void check_leakage(double top, double t, TrajectoryDiag& diag) {
    diag.max_top_population = std::max(diag.max_top_population, top);
    if (top > 1e-4) {
        throw NumericalAbort("truncation leakage " + std::to_string(top) +
                             " at t = " + std::to_string(t) +
                             "; raise the cutoff");
    }
    if (top > 1e-8) ++diag.leak_warnings;
}

DiffusionTrajectory simulate_pure(const SystemModel& m,
                                  const TrajectoryParams& p,
                                  std::int64_t n_steps) {
    DiffusionTrajectory traj;
    traj.pure = true;
    traj.base_seed = p.base_seed;
    traj.trajectory_index = p.trajectory_index;

    CounterRng rng = make_trajectory_rng(p.base_seed, p.trajectory_index);
    DiffPureStepper st(m);
    VectorXcd phi = std::get<PureState>(m.initial).amplitudes;
    const double dt = p.dt;
    const double sqrt_dt = std::sqrt(dt);
    if (p.record_noise) traj.w_increments.reserve(std::size_t(n_steps));

    auto push_sample = [&](double t, double defect) {
        const Complex mb = mean_lowering(st.ops, phi);
        traj.samples.push_back(SampleRow{t, mb.real(), mb.imag(),
                                         mean_number(st.ops, phi), 1.0, defect});
        if (p.record_states) traj.states.push_back(PureState{phi, true});
    };

    push_sample(0.0, 0.0);
    for (std::int64_t step = 0; step < n_steps; ++step) {
        const double t = double(step) * dt;
        const Complex mean_b = mean_lowering(st.ops, phi);
        const double dB = rng.next_gaussian() * sqrt_dt;
        if (p.record_noise) {
            traj.w_increments.push_back(drift_from_mean(mean_b, m, t) * dt + dB);
        }
        const double defect = st.step(phi, mean_b, t, dt, dB);
        traj.diag.max_defect = std::max(traj.diag.max_defect, defect);
        check_leakage(top_population(phi), double(step + 1) * dt, traj.diag);
        if (detail::is_sample_step(step + 1, n_steps, p.sample_stride)) {
            push_sample(double(step + 1) * dt, defect);
        }
    }
    traj.final_state = PureState{phi, true};
    return traj;
}

DiffusionTrajectory simulate_mixed(const SystemModel& m,
                                   const TrajectoryParams& p,
                                   std::int64_t n_steps) {
    DiffusionTrajectory traj;
    traj.pure = false;
    traj.base_seed = p.base_seed;
    traj.trajectory_index = p.trajectory_index;

    CounterRng rng = make_trajectory_rng(p.base_seed, p.trajectory_index);
    DiffDmStepper st(m);
    MatrixXcd rho = std::get<DensityMatrix>(m.initial);
    const double dt = p.dt;
    const double sqrt_dt = std::sqrt(dt);
    if (p.record_noise) traj.w_increments.reserve(std::size_t(n_steps));

    auto push_sample = [&](double t, double defect) {
        const Complex mb = detail::dm_mean_lowering(st.ops, rho);
        traj.samples.push_back(SampleRow{t, mb.real(), mb.imag(),
                                         detail::dm_mean_number(st.ops, rho),
                                         rho.squaredNorm(), defect});
        const double lam_min = min_eigenvalue(rho);
        traj.diag.min_eigenvalue = std::min(traj.diag.min_eigenvalue, lam_min);
        if (lam_min < -1e-4) {
            throw NumericalAbort("conditional state lost positivity at t = " +
                                 std::to_string(t) + " (min eigenvalue " +
                                 std::to_string(lam_min) + ")");
        }
        if (p.record_states) traj.dm_states.push_back(rho);
    };

    push_sample(0.0, 0.0);
    for (std::int64_t step = 0; step < n_steps; ++step) {
        const double t = double(step) * dt;
        const Complex mean_b = detail::dm_mean_lowering(st.ops, rho);
        const double dB = rng.next_gaussian() * sqrt_dt;
        if (p.record_noise) {
            traj.w_increments.push_back(drift_from_mean(mean_b, m, t) * dt + dB);
        }
        const double defect = st.step(rho, mean_b, t, dt, dB);
        traj.diag.max_defect = std::max(traj.diag.max_defect, defect);
        check_leakage(top_level_population(rho), double(step + 1) * dt,
                      traj.diag);
        if (detail::is_sample_step(step + 1, n_steps, p.sample_stride)) {
            push_sample(double(step + 1) * dt, defect);
        }
    }
    traj.final_dm = rho;
    return traj;
}

}  // namespace

double innovation_drift(const PureState& state, const SystemModel& m, double t) {
    require_oscillator(m);
    if (state.dim() != m.dim()) {
        throw std::invalid_argument("innovation_drift: state dimension != cutoff");
    }
    CavityOps ops(m);
    return drift_from_mean(mean_lowering(ops, state.amplitudes), m, t);
}

double innovation_drift(const DensityMatrix& rho, const SystemModel& m, double t) {
    require_oscillator(m);
    if (rho.rows() != m.dim() || rho.cols() != m.dim()) {
        throw std::invalid_argument("innovation_drift: state dimension != cutoff");
    }
    CavityOps ops(m);
    return drift_from_mean(detail::dm_mean_lowering(ops, rho), m, t);
}

PureState diffusion_pure_step(const PureState& state, const SystemModel& m,
                              double t, double dt, double dB) {
    require_oscillator(m);
    require_dt_guard(m, dt);
    if (state.dim() != m.dim()) {
        throw std::invalid_argument("diffusion_pure_step: state dimension != cutoff");
    }
    DiffPureStepper st(m);
    Eigen::VectorXcd phi = state.amplitudes;
    st.step(phi, mean_lowering(st.ops, phi), t, dt, dB);
    return PureState{std::move(phi), true};
}

DensityMatrix diffusion_sme_step(const DensityMatrix& rho, const SystemModel& m,
                                 double t, double dt, double dB) {
    require_oscillator(m);
    require_dt_guard(m, dt);
    if (rho.rows() != m.dim() || rho.cols() != m.dim()) {
        throw std::invalid_argument("diffusion_sme_step: state dimension != cutoff");
    }
    DiffDmStepper st(m);
    Eigen::MatrixXcd next = rho;
    st.step(next, detail::dm_mean_lowering(st.ops, rho), t, dt, dB);
    return next;
}

DiffusionTrajectory simulate_diffusion(const SystemModel& m,
                                       const TrajectoryParams& p) {
    m.validate();
    require_oscillator(m);
    require_dt_guard(m, p.dt);
    if (p.sample_stride < 1) {
        throw std::invalid_argument("sample_stride must be >= 1");
    }
    const std::int64_t n_steps = detail::step_count(p.t_final, p.dt);
    return m.initial_is_pure() ? simulate_pure(m, p, n_steps)
                               : simulate_mixed(m, p, n_steps);
}

PureState replay_diffusion_pure(const SystemModel& m,
                                const std::vector<double>& w_increments,
                                double dt) {
    m.validate();
    require_oscillator(m);
    require_dt_guard(m, dt);
    if (!m.initial_is_pure()) {
        throw std::invalid_argument("replay_diffusion_pure needs a pure initial state");
    }
    DiffPureStepper st(m);
    Eigen::VectorXcd phi = std::get<PureState>(m.initial).amplitudes;
    for (std::size_t k = 0; k < w_increments.size(); ++k) {
        const double t = double(k) * dt;
        const Complex mean_b = mean_lowering(st.ops, phi);
        const double dB = w_increments[k] - drift_from_mean(mean_b, m, t) * dt;
        st.step(phi, mean_b, t, dt, dB);
    }
    return PureState{std::move(phi), true};
}

DensityMatrix replay_diffusion_sme(const SystemModel& m,
                                   const std::vector<double>& w_increments,
                                   double dt) {
    m.validate();
    require_oscillator(m);
    require_dt_guard(m, dt);
    DiffDmStepper st(m);
    Eigen::MatrixXcd rho = m.initial_is_pure()
                               ? projector(std::get<PureState>(m.initial))
                               : std::get<DensityMatrix>(m.initial);
    for (std::size_t k = 0; k < w_increments.size(); ++k) {
        const double t = double(k) * dt;
        const Complex mean_b = detail::dm_mean_lowering(st.ops, rho);
        const double dB = w_increments[k] - drift_from_mean(mean_b, m, t) * dt;
        st.step(rho, mean_b, t, dt, dB);
    }
    return rho;
}

EpsConvergenceReport epsilon_convergence(const SystemModel& m,
                                         const std::vector<double>& eps_list,
                                         const EpsConvergenceOptions& options) {
    require_oscillator(m);
    if (eps_list.empty()) {
        throw std::invalid_argument("epsilon_convergence: eps_list is empty");
    }
    for (double eps : eps_list) {
        if (!(eps > 0.0)) {
            throw std::invalid_argument("epsilon_convergence: eps must be > 0");
        }
    }
    if (options.n_grid < 1 || options.n_traj < 1) {
        throw std::invalid_argument("epsilon_convergence: n_grid and n_traj must be >= 1");
    }

    EpsConvergenceReport report;
    report.n_traj = options.n_traj;
    const double delta = options.t_final / options.n_grid;

    // dt = dt_scale eps^2, snapped so an integer number of steps spans each
    // common-grid interval; all ensembles then sample on identical times.
    auto snapped = [&](double eps) {
        const double want = options.dt_scale * eps * eps;
        const std::int64_t per = std::max<std::int64_t>(1, std::llround(delta / want));
        return std::pair<double, int>(delta / double(per), int(per));
    };

    auto run = [&](double eps, bool diffusion, std::uint64_t seed) {
        EnsembleSpec spec;
        spec.model = m;
        spec.model.lo.enabled = true;
        spec.model.lo.epsilon = eps;
        spec.unraveling = diffusion ? Unraveling::diffusion : Unraveling::heterodyne;
        spec.method = JumpMethod::euler_bernoulli;
        spec.n_traj = options.n_traj;
        spec.t_final = options.t_final;
        const auto [dt, stride] = snapped(eps);
        spec.dt = dt;
        spec.sample_stride = stride;
        spec.base_seed = seed;
        spec.accumulate_mean_state = false;
        return run_ensemble(spec, options.workers);
    };

    const double eps_finest = *std::min_element(eps_list.begin(), eps_list.end());
    const EnsembleStats diff = run(eps_finest, true, options.base_seed + 1000000);
    report.grid = diff.grid;
    report.diffusion_dt = snapped(eps_finest).first;
    for (const auto& s : diff.obs) {
        report.diff_mean_x.push_back(2.0 * s.re_b.mean);
        report.diff_se_x.push_back(2.0 * s.re_b.se);
        report.diff_mean_n.push_back(s.n.mean);
        report.diff_se_n.push_back(s.n.se);
    }

    for (std::size_t k = 0; k < eps_list.size(); ++k) {
        const EnsembleStats het =
            run(eps_list[k], false, options.base_seed + std::uint64_t(k));
        if (het.grid.size() != report.grid.size()) {
            throw std::logic_error("epsilon_convergence: grid mismatch");
        }
        EpsConvergenceEntry entry;
        entry.eps = eps_list[k];
        entry.dt = snapped(eps_list[k]).first;
        entry.w_mean_rate = het.w_mean_rate;
        entry.w_var_rate = het.w_var_rate;
        for (std::size_t s = 0; s < het.obs.size(); ++s) {
            const double mx = 2.0 * het.obs[s].re_b.mean;
            const double sx = 2.0 * het.obs[s].re_b.se;
            const double mn = het.obs[s].n.mean;
            const double sn = het.obs[s].n.se;
            entry.mean_x.push_back(mx);
            entry.se_x.push_back(sx);
            entry.mean_n.push_back(mn);
            entry.se_n.push_back(sn);
            const double dev_x = std::abs(mx - report.diff_mean_x[s]);
            const double dev_n = std::abs(mn - report.diff_mean_n[s]);
            const double dev = std::max(dev_x, dev_n);
            if (dev >= entry.max_deviation) {
                entry.max_deviation = dev;
                entry.se_at_max = dev_x >= dev_n
                                      ? std::hypot(sx, report.diff_se_x[s])
                                      : std::hypot(sn, report.diff_se_n[s]);
            }
        }
        report.entries.push_back(std::move(entry));
    }

    report.monotone_within_2se = true;
    for (std::size_t k = 0; k + 1 < report.entries.size(); ++k) {
        const auto& a = report.entries[k];
        const auto& b = report.entries[k + 1];
        const double slack = 2.0 * std::hypot(a.se_at_max, b.se_at_max);
        if (b.max_deviation > a.max_deviation + slack) {
            report.monotone_within_2se = false;
        }
    }
    report.resolvable = !report.entries.empty() &&
                        report.entries.front().max_deviation >=
                            2.0 * report.entries.front().se_at_max;
    return report;
}

}  // namespace qfilt
