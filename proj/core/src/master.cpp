#include "qfilt/master.hpp"

#include <cmath>
#include <string>

#include "qfilt/detail/grid.hpp"

namespace qfilt {

void lindblad_rhs_into(const CavityOps& ops, const SystemModel& m,
                       const DensityMatrix& sigma, double t,
                       DensityMatrix& out) {
    const int d = ops.dim;
    const double mu = ops.mu;
    const double sq = ops.sqrt_mu;
    const Complex f = eval_f(m, t);
    const Complex fc = std::conj(f);
    const auto& s = ops.sqrt_np1;  // s(n) = sqrt(n+1)

    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            // -i[H, .] and -(mu/2){b^dag b, .} are diagonal in (i,j):
            const Complex coeff(-0.5 * mu * double(i + j),
                                -(ops.h_diag(i) - ops.h_diag(j)));
            Complex v = coeff * sigma(i, j);
            // + mu b sigma b^dag
            if (i + 1 < d && j + 1 < d) {
                v += mu * s(i) * s(j) * sigma(i + 1, j + 1);
            }
            // + sqrt(mu) [conj(f) b - f b^dag, sigma]
            Complex drive(0.0, 0.0);
            if (i + 1 < d) drive += fc * s(i) * sigma(i + 1, j);   // b sigma
            if (j >= 1) drive -= fc * s(j - 1) * sigma(i, j - 1);  // - sigma b
            if (i >= 1) drive -= f * s(i - 1) * sigma(i - 1, j);   // - b^dag sigma
            if (j + 1 < d) drive += f * s(j) * sigma(i, j + 1);    // + sigma b^dag
            out(i, j) = v + sq * drive;
        }
    }
}

DensityMatrix lindblad_rhs(const SystemModel& m, const DensityMatrix& sigma,
                           double t) {
    if (sigma.rows() != m.dim() || sigma.cols() != m.dim()) {
        throw std::invalid_argument("lindblad_rhs: state dimension != cutoff");
    }
    CavityOps ops(m);
    DensityMatrix out(m.dim(), m.dim());
    lindblad_rhs_into(ops, m, sigma, t, out);
    return out;
}

MasterRun integrate_master(const SystemModel& m, double t_final, double dt,
                           int sample_stride) {
    m.validate();
    if (sample_stride < 1) {
        throw std::invalid_argument("sample_stride must be >= 1");
    }
    const std::int64_t n_steps = detail::step_count(t_final, dt);

    MasterRun run;
    run.dt = dt;
    const double rate_scale =
        std::max({std::abs(m.omega), m.mu, m.drive.lambda * m.drive.lambda});
    run.diag.dt_guard_warning = dt * rate_scale > 0.1;

    CavityOps ops(m);
    const int d = m.dim();
    DensityMatrix sigma = m.initial_is_pure()
                              ? projector(std::get<PureState>(m.initial))
                              : std::get<DensityMatrix>(m.initial);
    DensityMatrix k1(d, d), k2(d, d), k3(d, d), k4(d, d), tmp(d, d);

    auto sample = [&](std::int64_t step) {
        run.grid.push_back(double(step) * dt);
        run.states.push_back(sigma);
        run.diag.max_herm_defect =
            std::max(run.diag.max_herm_defect, hermiticity_defect(sigma));
        const double lam_min = min_eigenvalue(sigma);
        run.diag.min_eigenvalue = std::min(run.diag.min_eigenvalue, lam_min);
        if (lam_min < -1e-8) {
            throw NumericalAbort("master integration lost positivity at t = " +
                                 std::to_string(double(step) * dt) +
                                 " (min eigenvalue " + std::to_string(lam_min) + ")");
        }
    };

    sample(0);
    for (std::int64_t step = 0; step < n_steps; ++step) {
        const double t = double(step) * dt;
        lindblad_rhs_into(ops, m, sigma, t, k1);
        tmp = sigma + (0.5 * dt) * k1;
        lindblad_rhs_into(ops, m, tmp, t + 0.5 * dt, k2);
        tmp = sigma + (0.5 * dt) * k2;
        lindblad_rhs_into(ops, m, tmp, t + 0.5 * dt, k3);
        tmp = sigma + dt * k3;
        lindblad_rhs_into(ops, m, tmp, t + dt, k4);
        sigma += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const double defect = trace_defect(sigma);
        run.diag.max_trace_defect = std::max(run.diag.max_trace_defect, defect);
        if (defect > 1e-9) {
            sigma /= sigma.trace();
            ++run.diag.renorm_events;
        }

        const double top = top_level_population(sigma);
        run.diag.max_top_population = std::max(run.diag.max_top_population, top);
        if (top > 1e-4) {
            throw NumericalAbort(
                "truncation leakage " + std::to_string(top) + " at t = " +
                std::to_string(t + dt) + "; raise the cutoff");
        }
        if (top > 1e-8) ++run.diag.leak_warnings;

        if ((step + 1) % sample_stride == 0 || step + 1 == n_steps) {
            sample(step + 1);
        }
    }
    return run;
}

Complex coherent_amplitude(const SystemModel& m, Complex beta0, double t) {
    const Complex z(0.5 * m.mu, m.omega);            // i omega + mu/2
    const Complex w(0.5 * m.mu, m.omega - m.drive.omega_f);  // z - i omega_f
    // integral of e^{w s} over [0, t]; series for small |w t| to stay accurate
    // through the resonant-undamped limit w -> 0.
    const Complex wt = w * t;
    Complex q;
    if (std::abs(wt) < 1e-6) {
        q = t * (1.0 + wt / 2.0 + wt * wt / 6.0);
    } else {
        q = (std::exp(wt) - 1.0) / w;
    }
    const Complex driven =
        std::sqrt(m.mu) * m.drive.lambda * std::exp(Complex(0.0, m.drive.phi)) * q;
    return std::exp(-z * t) * (beta0 - driven);
}

double steady_photon_number(const SystemModel& m) {
    const Complex w(0.5 * m.mu, m.omega - m.drive.omega_f);
    if (std::norm(w) == 0.0) {
        throw std::invalid_argument(
            "steady_photon_number: undamped resonant drive has no steady state");
    }
    const double lam = m.drive.lambda;
    return m.mu * lam * lam / std::norm(w);
}

}  // namespace qfilt
