#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "qfilt/fock.hpp"
#include "qfilt/master.hpp"
#include "qfilt/rng.hpp"
#include "support/models.hpp"

using namespace qfilt;

namespace {

// Random density matrix (positive, trace one) for structural checks.
DensityMatrix random_density(int dim, std::uint64_t seed) {
    CounterRng rng(seed, 3);
    Eigen::MatrixXcd a(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            a(i, j) = Complex(rng.next_gaussian(), rng.next_gaussian());
        }
    }
    DensityMatrix rho = a * a.adjoint();
    rho /= rho.trace();
    return rho;
}

// Dense textbook form of the generator, used as the oracle for the banded
// implementation: -i[H,.] + damping dissipator + drive commutator.
DensityMatrix dense_rhs(const SystemModel& m, const DensityMatrix& sigma,
                        double t) {
    const Operator h = hamiltonian(m.cutoff, m.omega);
    const Operator b = annihilation(m.cutoff);
    const Operator bd = creation(m.cutoff);
    const Operator num = number_operator(m.cutoff);
    const Complex f = eval_f(m, t);
    const Complex i1(0, 1);
    DensityMatrix out = -i1 * (h * sigma - sigma * h);
    out += m.mu * b * sigma * bd - 0.5 * m.mu * (num * sigma + sigma * num);
    const Operator drive = std::conj(f) * b - f * bd;
    out += std::sqrt(m.mu) * (drive * sigma - sigma * drive);
    return out;
}

// Scalar RK4 for d beta/dt = -(i omega + mu/2) beta - sqrt(mu) f(t); the
// independent oracle for the closed-form amplitude.
Complex amplitude_rk4(const SystemModel& m, Complex beta0, double t_final,
                      double dt) {
    auto rhs = [&](Complex beta, double t) {
        return -(Complex(0, m.omega) + 0.5 * m.mu) * beta -
               std::sqrt(m.mu) * eval_f(m, t);
    };
    Complex beta = beta0;
    const auto steps = long(std::llround(t_final / dt));
    for (long k = 0; k < steps; ++k) {
        const double t = double(k) * dt;
        const Complex k1 = rhs(beta, t);
        const Complex k2 = rhs(beta + 0.5 * dt * k1, t + 0.5 * dt);
        const Complex k3 = rhs(beta + 0.5 * dt * k2, t + 0.5 * dt);
        const Complex k4 = rhs(beta + dt * k3, t + dt);
        beta += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return beta;
}

}  // namespace

TEST_CASE("generator fixed points and structure") {
    SUBCASE("free vacuum is stationary") {
        SystemModel m = testutil::driven_cavity(4, 0.0, 0.0, 0.0);
        const DensityMatrix rhs =
            lindblad_rhs(m, projector(vacuum_state(m.cutoff)), 0.0);
        CHECK(rhs.norm() == doctest::Approx(0.0).epsilon(1e-16));
    }
    SUBCASE("damped vacuum is stationary for any mu and omega") {
        SystemModel m = testutil::driven_cavity(5, 1.3, 2.1, 0.0);
        const DensityMatrix rhs =
            lindblad_rhs(m, projector(vacuum_state(m.cutoff)), 1.7);
        CHECK(rhs.norm() < 1e-15);
    }
    SUBCASE("trace-free and Hermiticity-preserving on random states") {
        SystemModel m = testutil::driven_cavity(8, 1.1, 0.9, 0.5, 0.3);
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            const DensityMatrix rho = random_density(8, seed);
            const DensityMatrix rhs = lindblad_rhs(m, rho, 0.4 * double(seed));
            CHECK(std::abs(rhs.trace()) < 1e-12);
            CHECK(hermiticity_defect(rhs) < 1e-12);
        }
    }
    SUBCASE("amplitude source term: d<b>/dt from vacuum is -sqrt(mu) f") {
        SystemModel m = testutil::driven_cavity(6, 1.0, 1.3, 0.7, 0.3);
        const DensityMatrix rhs =
            lindblad_rhs(m, projector(vacuum_state(m.cutoff)), 0.0);
        const Complex got = (annihilation(m.cutoff) * rhs).trace();
        const Complex want = -std::sqrt(1.3) * eval_f(m, 0.0);
        CHECK(std::abs(got - want) < 1e-12);
    }
    SUBCASE("banded implementation equals the dense textbook form") {
        SystemModel m = testutil::driven_cavity(7, 0.8, 1.4, 0.6, 1.1);
        m.drive.omega_f = 0.5;  // detuned, keeps the time dependence honest
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const DensityMatrix rho = random_density(7, 100 + seed);
            const double t = 0.3 * double(seed);
            CHECK((lindblad_rhs(m, rho, t) - dense_rhs(m, rho, t)).norm() < 1e-13);
        }
    }
}

TEST_CASE("excited-state decay follows exp(-mu t)") {
    SystemModel m = testutil::driven_cavity(4, 0.9, 0.8, 0.0);
    m.initial = fock_state(m.cutoff, 1);
    const MasterRun run = integrate_master(m, 2.0, 1e-3, 100);
    for (std::size_t k = 0; k < run.grid.size(); ++k) {
        const double p1 = run.states[k](1, 1).real();
        const double want = std::exp(-0.8 * run.grid[k]);
        CHECK(std::abs(p1 - want) < 1e-6);
        CHECK(std::abs(run.states[k](0, 0).real() - (1.0 - want)) < 1e-6);
    }
}

TEST_CASE("driven cavity stays coherent and tracks the analytic amplitude") {
    SystemModel m = testutil::driven_cavity(16, 1.3, 0.9, 0.35, 0.4);
    const MasterRun run = integrate_master(m, 3.0, 1e-3, 50);
    const Operator b = annihilation(m.cutoff);

    double worst = 0.0;
    for (std::size_t k = 0; k < run.grid.size(); ++k) {
        const Complex beta = coherent_amplitude(m, Complex(0, 0), run.grid[k]);
        const Complex got = expectation(b, run.states[k]);
        worst = std::max(worst, std::abs(got - beta));
        CHECK(purity(run.states[k]) > 1.0 - 1e-6);
    }
    CHECK(worst < 1e-8);

    // Endpoint state is the coherent projector with that amplitude.
    const Complex beta_end = coherent_amplitude(m, Complex(0, 0), 3.0);
    const DensityMatrix want = projector(coherent_state(m.cutoff, beta_end));
    CHECK(trace_distance(run.states.back(), want) < 1e-5);
}

TEST_CASE("closed-form amplitude against an independent scalar integration") {
    SUBCASE("detuned, damped, driven") {
        SystemModel m = testutil::driven_cavity(2, 1.0, 0.7, 0.5, 1.1);
        m.drive.omega_f = 0.6;
        const Complex beta0(0.3, -0.2);
        for (double t : {0.5, 1.5, 3.0}) {
            const Complex closed = coherent_amplitude(m, beta0, t);
            const Complex numeric = amplitude_rk4(m, beta0, t, 1e-4);
            CHECK(std::abs(closed - numeric) < 1e-9);
        }
    }
    SUBCASE("undriven decay is a damped rotation") {
        SystemModel m = testutil::driven_cavity(2, 2.0, 0.5, 0.0);
        const Complex beta0(1, 1);
        const Complex got = coherent_amplitude(m, beta0, 1.3);
        const Complex want =
            beta0 * std::exp(-(Complex(0, 2.0) + 0.25) * 1.3);
        CHECK(std::abs(got - want) < 1e-12);
    }
    SUBCASE("near-degenerate rate stays continuous (series branch)") {
        SystemModel m = testutil::driven_cavity(2, 1.0, 1e-9, 0.4);
        const Complex closed = coherent_amplitude(m, Complex(0, 0), 2.0);
        const Complex numeric = amplitude_rk4(m, Complex(0, 0), 2.0, 1e-4);
        CHECK(std::abs(closed - numeric) < 1e-8);
    }
    SUBCASE("uncoupled drive leaves the amplitude rotating freely") {
        SystemModel m = testutil::driven_cavity(2, 1.0, 0.0, 0.9);
        const Complex beta0(0.4, 0.1);
        const Complex got = coherent_amplitude(m, beta0, 0.7);
        CHECK(std::abs(got - beta0 * std::exp(Complex(0, -0.7))) < 1e-12);
    }
}

TEST_CASE("steady photon number") {
    SystemModel m = testutil::driven_cavity(2, 1.0, 1.0, 0.5);
    CHECK(steady_photon_number(m) == doctest::Approx(1.0).epsilon(1e-14));

    // Detuning suppresses the stationary population.
    SystemModel det = m;
    det.drive.omega_f = 0.5;
    const double delta = 0.5;
    const double want = 1.0 * 0.25 / (delta * delta + 0.25);
    CHECK(steady_photon_number(det) == doctest::Approx(want).epsilon(1e-12));

    // The closed-form amplitude converges to it.
    const Complex beta_late = coherent_amplitude(m, Complex(0, 0), 60.0);
    CHECK(std::norm(beta_late) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("integrator converges at fourth order") {
    SystemModel m = testutil::driven_cavity(12, 1.3, 0.9, 0.35, 0.4);
    const Operator b = annihilation(m.cutoff);
    auto sup_error = [&](double dt) {
        const MasterRun run = integrate_master(m, 1.0, dt, 10);
        double worst = 0.0;
        for (std::size_t k = 0; k < run.grid.size(); ++k) {
            const Complex beta = coherent_amplitude(m, Complex(0, 0), run.grid[k]);
            worst = std::max(worst,
                             std::abs(expectation(b, run.states[k]) - beta));
        }
        return worst;
    };
    const double e1 = sup_error(0.02);
    const double e2 = sup_error(0.01);
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("sampling grid and step bookkeeping") {
    SystemModel m = testutil::driven_cavity(4, 1.0, 0.5, 0.1);
    const MasterRun run = integrate_master(m, 1.0, 1e-3, 7);
    CHECK(run.grid.front() == 0.0);
    CHECK(run.grid.back() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(run.grid[1] == doctest::Approx(0.007).epsilon(1e-12));
    for (std::size_t k = 1; k < run.grid.size(); ++k) {
        CHECK(run.grid[k] > run.grid[k - 1]);
    }
    CHECK(run.states.size() == run.grid.size());
    CHECK(run.dt == 1e-3);

    // t_final must sit on the step grid.
    CHECK_THROWS_AS(integrate_master(m, 1.0005, 1e-3), std::invalid_argument);
}

TEST_CASE("diagnostics and failure modes") {
    SUBCASE("well-resolved run keeps clean diagnostics") {
        SystemModel m = testutil::driven_cavity(12, 1.0, 1.0, 0.4);
        const MasterRun run = integrate_master(m, 1.0, 1e-3, 100);
        CHECK(run.diag.max_herm_defect < 1e-12);
        CHECK(run.diag.min_eigenvalue > -1e-10);
        CHECK(run.diag.max_top_population < 1e-8);
        CHECK_FALSE(run.diag.dt_guard_warning);
    }
    SUBCASE("coarse step trips the resolution warning") {
        // Fast damping with dt * mu > 0.1: the decay itself is still easy to
        // integrate, so the run finishes cleanly but carries the warning.
        SystemModel m = testutil::driven_cavity(4, 0.0, 2.0, 0.0);
        m.initial = fock_state(m.cutoff, 1);
        const MasterRun run = integrate_master(m, 0.6, 0.06, 1);
        CHECK(run.diag.dt_guard_warning);
    }
    SUBCASE("drive beyond the cutoff aborts on truncation leakage") {
        SystemModel m = testutil::driven_cavity(4, 1.0, 0.5, 2.0);
        CHECK_THROWS_AS(integrate_master(m, 2.0, 1e-3), NumericalAbort);
    }
}
