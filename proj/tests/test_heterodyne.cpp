#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "qfilt/heterodyne.hpp"
#include "qfilt/rng.hpp"
#include "support/models.hpp"
#include "support/stats.hpp"

using namespace qfilt;

namespace {

// Simpson integral of the instantaneous oscillator-shifted rate |g(t)|^2;
// the oracle for mean click counts of an uncoupled mode (mu = 0), where the
// state never reacts and the count is exactly Poisson with this mean.
double integrated_rate(const SystemModel& m, double t_final, int panels = 4000) {
    const double h = t_final / double(panels);
    double acc = std::norm(jump_shift(m, 0.0)) + std::norm(jump_shift(m, t_final));
    for (int k = 1; k < panels; ++k) {
        const double w = (k % 2 == 1) ? 4.0 : 2.0;
        acc += w * std::norm(jump_shift(m, double(k) * h));
    }
    return acc * h / 3.0;
}

}  // namespace

TEST_CASE("oscillator-shifted intensity") {
    SUBCASE("uncoupled dark mode clicks at exactly 1/eps^2") {
        SystemModel m = testutil::driven_cavity(4, 1.0, 0.0, 0.0);
        m = testutil::with_oscillator(m, 0.5, 0.3, 1.0);
        const PureState s = testutil::random_low_state(m.cutoff, 1);
        CHECK(het_intensity(s, m, 0.7) == doctest::Approx(4.0).epsilon(1e-12));
    }
    SUBCASE("oscillator off reduces to the direct-counting intensity") {
        SystemModel m = testutil::driven_cavity(8, 1.1, 0.9, 0.4, 0.2);
        const PureState s = testutil::random_low_state(m.cutoff, 2);
        CHECK(het_intensity(s, m, 0.9) == jump_intensity(s, m, 0.9));
    }
    SUBCASE("squared-norm identity against dense operators") {
        SystemModel m = testutil::driven_cavity(8, 1.0, 1.3, 0.5, 0.1);
        m = testutil::with_oscillator(m, 0.4, 0.6, -0.8);
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            const PureState s = testutil::random_low_state(m.cutoff, 20 + seed);
            const double t = 0.5 * double(seed);
            const Operator c =
                std::sqrt(1.3) * annihilation(m.cutoff) +
                jump_shift(m, t) * Operator::Identity(8, 8);
            const double want = (c * s.amplitudes).squaredNorm();
            CHECK(het_intensity(s, m, t) == doctest::Approx(want).epsilon(1e-12));
            CHECK(het_intensity(projector(s), m, t) ==
                  doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("oscillator-shifted click back-action") {
    SUBCASE("a weak oscillator reproduces the direct-counting click") {
        // eps = 1e3 means the oscillator contributes O(1/eps) amplitude; the
        // click outcome matches the bare jump to the same order.
        SystemModel m = testutil::driven_cavity(6, 1.0, 1.0, 0.0);
        SystemModel shifted = testutil::with_oscillator(m, 1e3);
        const PureState s = testutil::random_low_state(m.cutoff, 9);
        const PureState bare = apply_jump(s, m, 0.4);
        const PureState with_lo = het_apply_jump(s, shifted, 0.4);
        CHECK(fidelity(bare, with_lo) > 1.0 - 1e-2);
    }
    SUBCASE("uncoupled mode: the click is a phase, state untouched") {
        SystemModel m = testutil::driven_cavity(5, 1.0, 0.0, 0.3);
        m = testutil::with_oscillator(m, 0.5, 0.2);
        const PureState s = testutil::random_low_state(m.cutoff, 11);
        const PureState after = het_apply_jump(s, m, 1.1);
        CHECK(fidelity(after, s) == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("oscillator off: trajectories reduce to direct counting bit for bit") {
    SystemModel m = testutil::driven_cavity(10, 1.0, 1.0, 0.5, 0.2);
    TrajectoryParams p;
    p.t_final = 1.0;
    p.dt = 1e-3;
    p.base_seed = 31;
    for (std::uint64_t idx = 0; idx < 5; ++idx) {
        p.trajectory_index = idx;
        const HeterodyneTrajectory het = simulate_heterodyne(m, p);
        const CountingTrajectory direct = simulate_counting(m, p);
        REQUIRE(het.samples.size() == direct.samples.size());
        for (std::size_t k = 0; k < het.samples.size(); ++k) {
            CHECK(het.samples[k].re_b == direct.samples[k].re_b);
            CHECK(het.samples[k].im_b == direct.samples[k].im_b);
            CHECK(het.samples[k].n == direct.samples[k].n);
        }
        CHECK(het.record.jump_times == direct.record.jump_times);
        CHECK((het.final_state.amplitudes - direct.final_state.amplitudes).norm() ==
              0.0);
    }
}

TEST_CASE("records carry the oscillator scale") {
    SystemModel m = testutil::driven_cavity(4, 1.0, 0.0, 0.0);
    m = testutil::with_oscillator(m, 0.5);
    TrajectoryParams p;
    p.t_final = 0.5;
    p.dt = default_heterodyne_dt(0.5);
    const HeterodyneTrajectory traj = simulate_heterodyne(m, p);
    REQUIRE(traj.record.epsilon.has_value());
    CHECK(*traj.record.epsilon == 0.5);
    CHECK_FALSE(traj.record.jump_times.empty());
}

TEST_CASE("uncoupled mode produces Poisson counts at the integrated rate") {
    // With mu = 0 the state never reacts, so the click count is exactly
    // Poisson with mean = integral of |f + r/eps|^2.  Checked for a constant
    // cross term (carrier frequencies cancel) and an oscillating one.
    TrajectoryParams p;
    p.t_final = 2.0;
    p.dt = 1e-3;
    p.base_seed = 500;

    auto run_counts = [&](const SystemModel& m, int n_traj) {
        std::vector<double> counts;
        for (int i = 0; i < n_traj; ++i) {
            p.trajectory_index = std::uint64_t(i);
            counts.push_back(
                double(simulate_heterodyne(m, p).record.jump_times.size()));
        }
        return counts;
    };

    SUBCASE("constant beat: opposite carriers") {
        SystemModel m = testutil::driven_cavity(4, 0.0, 0.0, 0.45, 0.7);
        m.drive.omega_f = 1.0;
        m = testutil::with_oscillator(m, 0.5, 0.2, -1.0);
        // f conj(r) = lambda exp(i(phi - theta)) is time independent here.
        const double rate = std::norm(jump_shift(m, 0.0));
        CHECK(std::abs(std::norm(jump_shift(m, 1.234)) - rate) < 1e-12);

        const std::vector<double> counts = run_counts(m, 400);
        const double want = rate * p.t_final;
        const double se = std::sqrt(want / 400.0);
        CHECK(std::abs(teststat::mean(counts) - want) < 4.0 * se);
        // Per-step Bernoulli thinning leaves dispersion at 1 - rate dt.
        const double dispersion = teststat::variance(counts) / teststat::mean(counts);
        CHECK(dispersion > 0.85);
        CHECK(dispersion < 1.15);
    }
    SUBCASE("oscillating beat: co-rotating carriers") {
        SystemModel m = testutil::driven_cavity(4, 0.0, 0.0, 0.45, 0.7);
        m.drive.omega_f = 1.0;
        m = testutil::with_oscillator(m, 0.5, 0.2, 1.0);
        const double want = integrated_rate(m, p.t_final);
        const std::vector<double> counts = run_counts(m, 400);
        const double se = std::sqrt(want / 400.0);
        CHECK(std::abs(teststat::mean(counts) - want) < 4.0 * se);
    }
}

TEST_CASE("click rate scales like 1/eps^2 toward the diffusive regime") {
    // Undriven vacuum with the oscillator on: the conditional state stays in
    // the vacuum, every click is an oscillator photon.
    for (double eps : {0.5, 0.3, 0.15}) {
        SystemModel m = testutil::driven_cavity(4, 1.0, 1.0, 0.0);
        m = testutil::with_oscillator(m, eps);
        TrajectoryParams p;
        p.t_final = 2.0;
        // Snap the suggested step onto the run grid.
        p.dt = p.t_final / std::round(p.t_final / default_heterodyne_dt(eps));
        p.base_seed = 77;
        double total = 0.0;
        const int n_traj = 60;
        for (int i = 0; i < n_traj; ++i) {
            p.trajectory_index = std::uint64_t(i);
            total += double(simulate_heterodyne(m, p).record.jump_times.size());
        }
        const double per_time = total / double(n_traj) / p.t_final;
        const double want = 1.0 / (eps * eps);
        CHECK(std::abs(per_time - want) < 0.2 * want);
    }
}

TEST_CASE("default step size tracks the click rate") {
    CHECK(default_heterodyne_dt(0.3) == doctest::Approx(0.09 / 20.0).epsilon(1e-15));
    CHECK(default_heterodyne_dt(1.0) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK_THROWS_AS(default_heterodyne_dt(0.0), std::invalid_argument);
    CHECK_THROWS_AS(default_heterodyne_dt(-1.0), std::invalid_argument);
}

TEST_CASE("hard step guard with the oscillator on") {
    // dt chosen so the click probability per step exceeds 10%: with the
    // oscillator on this must abort rather than clamp.
    SystemModel m = testutil::driven_cavity(4, 1.0, 0.5, 0.0);
    m = testutil::with_oscillator(m, 0.2);  // rate 25
    TrajectoryParams p;
    p.t_final = 1.0;
    p.dt = 5e-3;  // I dt = 0.125
    CHECK_THROWS_AS(simulate_heterodyne(m, p), StepGuardViolation);
}
