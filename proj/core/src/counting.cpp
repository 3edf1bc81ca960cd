#include "qfilt/counting.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qfilt/detail/banded.hpp"
#include "qfilt/detail/grid.hpp"
#include "qfilt/master.hpp"

namespace qfilt {
namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

// All banded applications write into preallocated workspaces; a trajectory
// step allocates nothing.
struct PureStepper {
    const SystemModel& m;
    CavityOps ops;
    VectorXcd bphi, bdphi, cphi, next;

    explicit PureStepper(const SystemModel& model)
        : m(model), ops(model),
          bphi(ops.dim), bdphi(ops.dim), cphi(ops.dim), next(ops.dim) {}

    // Fills bphi and cphi = (sqrt(mu) b + g) phi; returns ||cphi||^2.
    double intensity(const VectorXcd& phi, Complex g) {
        apply_lower(ops, phi, bphi);
        cphi = ops.sqrt_mu * bphi + g * phi;
        return cphi.squaredNorm();
    }

    // sqrt(mu) conj(r(t))/eps, the coefficient of b in the drift.
    Complex lo_coeff(double t) const {
        if (!m.lo.enabled) return Complex(0.0, 0.0);
        return ops.sqrt_mu * std::conj(m.lo.eval(t)) / m.lo.epsilon;
    }

    // One Euler step of the normalized filter, with or without a click;
    // renormalizes phi and returns the pre-renormalization defect.  Pass the
    // value returned by intensity(phi, jump_shift(m, t)) as `prepared` to
    // reuse the workspaces it filled; negative means "compute here".
    double nonlinear_step(VectorXcd& phi, double t, double dt, bool click,
                          double prepared = -1.0) {
        const Complex f = eval_f(m, t);
        const Complex g = jump_shift(m, t);
        const double intens = prepared >= 0.0 ? prepared : intensity(phi, g);
        apply_raise(ops, phi, bdphi);
        const Complex clo = lo_coeff(t);
        const Complex sf = ops.sqrt_mu * f;
        // drift = -K phi - sqrt(mu) f b^dag phi - clo b phi + (I - |g|^2)/2 phi
        const double gain = 0.5 * (intens - std::norm(g));
        for (int n = 0; n < ops.dim; ++n) {
            const Complex v = (gain - ops.k_diag(n)) * phi(n) - sf * bdphi(n) -
                              clo * bphi(n);
            next(n) = phi(n) + dt * v;
        }
        if (click) {
            if (intens <= 1e-14) {
                throw NumericalAbort("click sampled with vanishing intensity");
            }
            next += cphi / std::sqrt(intens) - phi;
        }
        const double nrm = next.norm();
        if (!(nrm > 0.0)) throw NumericalAbort("state norm vanished");
        phi = next / nrm;
        return std::abs(nrm - 1.0);
    }

    // One Euler step of the linear (unnormalized) filter d psi = -R(t) psi dt.
    void linear_step(VectorXcd& psi, double t, double dt) {
        const Complex f = eval_f(m, t);
        const Complex g = jump_shift(m, t);
        apply_lower(ops, psi, bphi);
        apply_raise(ops, psi, bdphi);
        const Complex clo = lo_coeff(t);
        const Complex sf = ops.sqrt_mu * f;
        const double half_g2 = 0.5 * std::norm(g);
        for (int n = 0; n < ops.dim; ++n) {
            psi(n) -= dt * ((ops.k_diag(n) + half_g2) * psi(n) +
                            sf * bdphi(n) + clo * bphi(n));
        }
    }

    // Applies C(t)/||C phi|| to a normalized phi.
    void click(VectorXcd& phi, double t) {
        const double intens = intensity(phi, jump_shift(m, t));
        if (intens <= 1e-14) {
            throw NumericalAbort("click sampled with vanishing intensity");
        }
        phi = cphi / std::sqrt(intens);
    }
};

struct DmStepper {
    const SystemModel& m;
    CavityOps ops;
    MatrixXcd lrho, brho, rhobd, sand, meas, next;

    explicit DmStepper(const SystemModel& model)
        : m(model), ops(model),
          lrho(ops.dim, ops.dim), brho(ops.dim, ops.dim),
          rhobd(ops.dim, ops.dim), sand(ops.dim, ops.dim),
          meas(ops.dim, ops.dim), next(ops.dim, ops.dim) {}

    // Fills meas = C rho C^dag and returns its trace (the click intensity).
    double measurement_update(const MatrixXcd& rho, double t) {
        const Complex g = jump_shift(m, t);
        detail::dm_b_left(ops, rho, brho);
        detail::dm_bdag_right(ops, rho, rhobd);
        detail::dm_sandwich(ops, rho, sand);
        meas = ops.mu * sand + ops.sqrt_mu * std::conj(g) * brho +
               ops.sqrt_mu * g * rhobd + std::norm(g) * rho;
        return meas.trace().real();
    }

    // rho' = rho + L(rho) dt + (meas/I - rho)(dN - I dt), trace-renormalized.
    // Returns the pre-renormalization trace defect.  `prepared` reuses the
    // meas workspace exactly as in PureStepper::nonlinear_step.
    double sme_step(MatrixXcd& rho, double t, double dt, bool click,
                    double prepared = -1.0) {
        lindblad_rhs_into(ops, m, rho, t, lrho);
        const double intens =
            prepared >= 0.0 ? prepared : measurement_update(rho, t);
        if (click) {
            if (intens <= 1e-14) {
                throw NumericalAbort("click sampled with vanishing intensity");
            }
            next = rho + dt * lrho + (1.0 - intens * dt) * (meas / intens - rho);
        } else {
            // (meas/I - rho)(-I dt) needs no division by I:
            next = rho + dt * lrho - dt * meas + (intens * dt) * rho;
        }
        const double tr = next.trace().real();
        if (!(tr > 0.0)) throw NumericalAbort("state trace vanished");
        rho = next / tr;
        return std::abs(tr - 1.0);
    }
};

// Top-two-level population of a state vector with squared norm norm2.
double top_population(const VectorXcd& v, double norm2) {
    const int d = int(v.size());
    return (std::norm(v(d - 1)) + std::norm(v(d - 2))) / norm2;
}

// Per-step leakage bookkeeping shared by every trajectory loop.
void check_leakage(double top, double t, TrajectoryDiag& diag) {
    diag.max_top_population = std::max(diag.max_top_population, top);
    if (top > 1e-4) {
        throw NumericalAbort("truncation leakage " + std::to_string(top) +
                             " at t = " + std::to_string(t) +
                             "; raise the cutoff");
    }
    if (top > 1e-8) ++diag.leak_warnings;
}

// Bernoulli click probability for this step, applying the guard policy:
// a heterodyne-resolved run (oscillator on) treats dt * I >= 0.1 as a hard
// error, direct counting records a warning and clamps.
double click_probability(double intens, double dt, bool lo_on, double t,
                         TrajectoryDiag& diag) {
    double p = intens * dt;
    if (p >= 0.1) {
        if (lo_on) {
            throw StepGuardViolation(
                "dt * intensity = " + std::to_string(p) + " at t = " +
                std::to_string(t) + " exceeds the 0.1 step guard; shrink dt");
        }
        ++diag.guard_warnings;
        p = std::min(p, 1.0);
    }
    return p;
}

CountingTrajectory simulate_pure(const SystemModel& m,
                                 const TrajectoryParams& p,
                                 std::int64_t n_steps) {
    CountingTrajectory traj;
    traj.pure = true;
    traj.method = p.method;
    traj.base_seed = p.base_seed;
    traj.trajectory_index = p.trajectory_index;
    if (m.lo.enabled) traj.record.epsilon = m.lo.epsilon;

    CounterRng rng = make_trajectory_rng(p.base_seed, p.trajectory_index);
    PureStepper st(m);
    VectorXcd phi = std::get<PureState>(m.initial).amplitudes;

    const double dt = p.dt;
    const bool waiting = p.method == JumpMethod::waiting_time;

    auto push_sample = [&](double t, const VectorXcd& state, double norm2,
                           double defect) {
        const double inv = 1.0 / norm2;
        SampleRow row;
        row.t = t;
        const Complex mb = mean_lowering(st.ops, state) * inv;
        row.re_b = mb.real();
        row.im_b = mb.imag();
        row.n = mean_number(st.ops, state) * inv;
        row.purity = 1.0;
        row.defect = defect;
        traj.samples.push_back(row);
        if (p.record_states) {
            PureState s{state / std::sqrt(norm2), true};
            traj.states.push_back(std::move(s));
        }
    };

    push_sample(0.0, phi, 1.0, 0.0);

    if (!waiting) {
        for (std::int64_t step = 0; step < n_steps; ++step) {
            const double t = double(step) * dt;
            const double intens = st.intensity(phi, jump_shift(m, t));
            const double prob =
                click_probability(intens, dt, m.lo.enabled, t, traj.diag);
            const bool click = rng.next_double() < prob;
            const double defect = st.nonlinear_step(phi, t, dt, click, intens);
            traj.diag.max_defect = std::max(traj.diag.max_defect, defect);
            if (click) traj.record.jump_times.push_back(double(step + 1) * dt);
            check_leakage(top_population(phi, 1.0), double(step + 1) * dt,
                          traj.diag);
            if (detail::is_sample_step(step + 1, n_steps, p.sample_stride)) {
                push_sample(double(step + 1) * dt, phi, 1.0, defect);
            }
        }
        traj.final_state = PureState{phi, true};
        return traj;
    }

    // Waiting-time sampler: ||psi||^2 is the no-click survival probability.
    VectorXcd& psi = phi;  // same storage, but unnormalized between clicks
    double threshold = rng.next_double();
    double prev_norm2 = 1.0;
    for (std::int64_t step = 0; step < n_steps; ++step) {
        const double t = double(step) * dt;
        st.linear_step(psi, t, dt);
        double norm2 = psi.squaredNorm();
        if (!(norm2 > 0.0)) throw NumericalAbort("state norm vanished");
        // Same accuracy guard as the Bernoulli sampler, measured through the
        // realized survival decrement.
        const double decay = 1.0 - norm2 / prev_norm2;
        if (decay >= 0.1) {
            if (m.lo.enabled) {
                throw StepGuardViolation(
                    "survival dropped by " + std::to_string(decay) +
                    " in one step at t = " + std::to_string(t) +
                    "; shrink dt");
            }
            ++traj.diag.guard_warnings;
        }
        if (norm2 <= threshold) {
            const double t_click = double(step + 1) * dt;
            psi /= std::sqrt(norm2);
            st.click(psi, t_click);
            traj.record.jump_times.push_back(t_click);
            threshold = rng.next_double();
            norm2 = 1.0;
        }
        prev_norm2 = norm2;
        check_leakage(top_population(psi, norm2), double(step + 1) * dt,
                      traj.diag);
        if (detail::is_sample_step(step + 1, n_steps, p.sample_stride)) {
            push_sample(double(step + 1) * dt, psi, norm2, 0.0);
        }
    }
    psi /= std::sqrt(prev_norm2);
    traj.final_state = PureState{psi, true};
    return traj;
}

CountingTrajectory simulate_mixed(const SystemModel& m,
                                  const TrajectoryParams& p,
                                  std::int64_t n_steps) {
    CountingTrajectory traj;
    traj.pure = false;
    traj.method = JumpMethod::euler_bernoulli;  // density matrices always sample clicks per step
    traj.base_seed = p.base_seed;
    traj.trajectory_index = p.trajectory_index;
    if (m.lo.enabled) traj.record.epsilon = m.lo.epsilon;

    CounterRng rng = make_trajectory_rng(p.base_seed, p.trajectory_index);
    DmStepper st(m);
    MatrixXcd rho = std::get<DensityMatrix>(m.initial);
    const double dt = p.dt;

    auto push_sample = [&](double t, double defect) {
        SampleRow row;
        row.t = t;
        const Complex mb = detail::dm_mean_lowering(st.ops, rho);
        row.re_b = mb.real();
        row.im_b = mb.imag();
        row.n = detail::dm_mean_number(st.ops, rho);
        row.purity = rho.squaredNorm();  // tr(rho^2) for Hermitian rho
        row.defect = defect;
        traj.samples.push_back(row);
        traj.diag.min_eigenvalue =
            std::min(traj.diag.min_eigenvalue, min_eigenvalue(rho));
        if (p.record_states) traj.dm_states.push_back(rho);
    };

    push_sample(0.0, 0.0);
    for (std::int64_t step = 0; step < n_steps; ++step) {
        const double t = double(step) * dt;
        const double intens = st.measurement_update(rho, t);
        const double prob =
            click_probability(intens, dt, m.lo.enabled, t, traj.diag);
        const bool click = rng.next_double() < prob;
        const double defect = st.sme_step(rho, t, dt, click, intens);
        traj.diag.max_defect = std::max(traj.diag.max_defect, defect);
        if (click) traj.record.jump_times.push_back(double(step + 1) * dt);
        check_leakage(top_level_population(rho), double(step + 1) * dt,
                      traj.diag);
        if (detail::is_sample_step(step + 1, n_steps, p.sample_stride)) {
            push_sample(double(step + 1) * dt, defect);
        }
    }
    traj.final_dm = rho;
    return traj;
}

// Marks the steps (by index) whose update carries a click.
std::vector<bool> click_flags(const JumpRecord& record, double dt,
                              std::int64_t n_steps) {
    std::vector<bool> flags(std::size_t(n_steps), false);
    double prev = 0.0;
    for (double tj : record.jump_times) {
        if (tj <= prev) {
            throw std::invalid_argument(
                "record times must be strictly increasing");
        }
        prev = tj;
        flags[std::size_t(detail::event_step(tj, dt, n_steps))] = true;
    }
    return flags;
}

const PureState& require_pure(const SystemModel& m) {
    if (!m.initial_is_pure()) {
        throw std::invalid_argument("this propagator needs a pure initial state");
    }
    return std::get<PureState>(m.initial);
}

}  // namespace

double jump_intensity(const PureState& state, const SystemModel& m, double t) {
    if (state.dim() != m.dim()) {
        throw std::invalid_argument("jump_intensity: state dimension != cutoff");
    }
    if (std::abs(state.norm() - 1.0) > 1e-8) {
        throw std::invalid_argument("jump_intensity: state is not normalized");
    }
    PureStepper st(m);
    return st.intensity(state.amplitudes, jump_shift(m, t));
}

double jump_intensity(const DensityMatrix& rho, const SystemModel& m, double t) {
    if (rho.rows() != m.dim() || rho.cols() != m.dim()) {
        throw std::invalid_argument("jump_intensity: state dimension != cutoff");
    }
    DmStepper st(m);
    return st.measurement_update(rho, t);
}

PureState apply_jump(const PureState& state, const SystemModel& m, double t) {
    if (state.dim() != m.dim()) {
        throw std::invalid_argument("apply_jump: state dimension != cutoff");
    }
    PureStepper st(m);
    Eigen::VectorXcd phi = state.amplitudes;
    st.click(phi, t);
    return PureState{std::move(phi), true};
}

DensityMatrix apply_jump(const DensityMatrix& rho, const SystemModel& m,
                         double t) {
    DmStepper st(m);
    const double intens = st.measurement_update(rho, t);
    if (intens <= 1e-14) {
        throw NumericalAbort("click sampled with vanishing intensity");
    }
    return st.meas / intens;
}

PureState nonlinear_drift_step(const PureState& state, const SystemModel& m,
                               double t, double dt) {
    if (state.dim() != m.dim()) {
        throw std::invalid_argument("nonlinear_drift_step: state dimension != cutoff");
    }
    PureStepper st(m);
    Eigen::VectorXcd phi = state.amplitudes;
    st.nonlinear_step(phi, t, dt, false);
    return PureState{std::move(phi), true};
}

DensityMatrix sme_counting_step(const DensityMatrix& rho, const SystemModel& m,
                                double t, double dt, int dN) {
    if (rho.rows() != m.dim() || rho.cols() != m.dim()) {
        throw std::invalid_argument("sme_counting_step: state dimension != cutoff");
    }
    if (dN != 0 && dN != 1) {
        throw std::invalid_argument("sme_counting_step: dN must be 0 or 1");
    }
    DmStepper st(m);
    MatrixXcd next = rho;
    st.sme_step(next, t, dt, dN == 1);
    return next;
}

CountingTrajectory simulate_counting(const SystemModel& m,
                                     const TrajectoryParams& p) {
    m.validate();
    if (p.sample_stride < 1) {
        throw std::invalid_argument("sample_stride must be >= 1");
    }
    const std::int64_t n_steps = detail::step_count(p.t_final, p.dt);
    return m.initial_is_pure() ? simulate_pure(m, p, n_steps)
                               : simulate_mixed(m, p, n_steps);
}

PureState replay_record_nonlinear(const SystemModel& m, const JumpRecord& record,
                                  double t_final, double dt) {
    m.validate();
    const std::int64_t n_steps = detail::step_count(t_final, dt);
    const std::vector<bool> clicks = click_flags(record, dt, n_steps);
    PureStepper st(m);
    Eigen::VectorXcd phi = require_pure(m).amplitudes;
    for (std::int64_t step = 0; step < n_steps; ++step) {
        st.nonlinear_step(phi, double(step) * dt, dt, clicks[std::size_t(step)]);
    }
    return PureState{std::move(phi), true};
}

PureState replay_record_linear(const SystemModel& m, const JumpRecord& record,
                               double t_final, double dt) {
    m.validate();
    const std::int64_t n_steps = detail::step_count(t_final, dt);
    const std::vector<bool> clicks = click_flags(record, dt, n_steps);
    PureStepper st(m);
    Eigen::VectorXcd psi = require_pure(m).amplitudes;
    for (std::int64_t step = 0; step < n_steps; ++step) {
        st.linear_step(psi, double(step) * dt, dt);
        if (clicks[std::size_t(step)]) {
            const double norm = psi.norm();
            if (!(norm > 0.0)) throw NumericalAbort("state norm vanished");
            psi /= norm;
            st.click(psi, double(step + 1) * dt);
        }
    }
    PureState out{std::move(psi), false};
    out.renormalize();
    return out;
}

DensityMatrix replay_record_sme(const SystemModel& m, const JumpRecord& record,
                                double t_final, double dt) {
    m.validate();
    const std::int64_t n_steps = detail::step_count(t_final, dt);
    const std::vector<bool> clicks = click_flags(record, dt, n_steps);
    DmStepper st(m);
    MatrixXcd rho = m.initial_is_pure()
                        ? projector(std::get<PureState>(m.initial))
                        : std::get<DensityMatrix>(m.initial);
    for (std::int64_t step = 0; step < n_steps; ++step) {
        st.sme_step(rho, double(step) * dt, dt, clicks[std::size_t(step)]);
    }
    return rho;
}

}  // namespace qfilt
