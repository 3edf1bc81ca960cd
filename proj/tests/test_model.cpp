#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "qfilt/detail/banded.hpp"
#include "qfilt/model.hpp"
#include "qfilt/rng.hpp"
#include "support/models.hpp"

using namespace qfilt;
using std::numbers::pi;

namespace {

Eigen::MatrixXcd random_matrix(int dim, std::uint64_t seed) {
    CounterRng rng(seed, 1);
    Eigen::MatrixXcd m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            m(i, j) = Complex(rng.next_gaussian(), rng.next_gaussian());
        }
    }
    return m;
}

}  // namespace

TEST_CASE("drive field evaluation") {
    DriveField f;
    SUBCASE("zero amplitude is identically zero") {
        f.lambda = 0.0;
        CHECK(f.eval(0.0) == Complex(0, 0));
        CHECK(f.eval(17.3) == Complex(0, 0));
    }
    SUBCASE("static drive is the real amplitude") {
        f.lambda = 1.0;
        CHECK(f.eval(3.0) == Complex(1, 0));
    }
    SUBCASE("carrier and phase rotate as exp(i(phi - omega_f t))") {
        f.lambda = 2.0;
        f.omega_f = 1.0;
        f.phi = pi / 2.0;
        const Complex got = f.eval(pi);  // 2 exp(-i pi/2) = -2i
        CHECK(std::abs(got - Complex(0, -2)) < 1e-12);
    }
}

TEST_CASE("local oscillator evaluation") {
    LocalOscillator lo;
    CHECK(lo.eval(5.0) == Complex(0, 0));  // disabled -> identically zero

    lo.enabled = true;
    lo.epsilon = 0.5;
    lo.theta = 0.3;
    lo.omega_r = 2.0;
    const Complex r = lo.eval(0.7);
    CHECK(std::abs(r - std::exp(Complex(0, 2.0 * 0.7 + 0.3))) < 1e-15);
    CHECK(std::abs(r) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("jump shift combines drive and oscillator") {
    SystemModel m = testutil::driven_cavity(4, 1.0, 1.0, 0.4, 0.2);
    const double t = 1.3;
    CHECK(jump_shift(m, t) == eval_f(m, t));  // oscillator off: g = f

    m = testutil::with_oscillator(m, 0.25, 0.1, -1.0);
    const Complex want = eval_f(m, t) + m.lo.eval(t) / 0.25;
    CHECK(std::abs(jump_shift(m, t) - want) < 1e-15);
}

TEST_CASE("damping-dressed generator K") {
    SUBCASE("free undamped mode has K = 0") {
        SystemModel m = testutil::driven_cavity(3, 0.0, 0.0, 0.0);
        CHECK(derived_K(m).norm() == 0.0);
    }
    SUBCASE("dim 2, omega 1, mu 2") {
        SystemModel m = testutil::driven_cavity(2, 1.0, 2.0, 0.0);
        const Operator k = derived_K(m);
        CHECK(std::abs(k(0, 0) - Complex(0, 0.5)) < 1e-15);
        CHECK(std::abs(k(1, 1) - Complex(1, 1.5)) < 1e-15);
        CHECK(std::abs(k(0, 1)) == 0.0);
        CHECK(std::abs(k(1, 0)) == 0.0);
    }
    SUBCASE("anti-Hermitian part is the Hamiltonian, Hermitian part the damping") {
        SystemModel m = testutil::driven_cavity(7, 1.3, 0.8, 0.0);
        const Operator k = derived_K(m);
        const Operator herm = k + k.adjoint().eval();
        CHECK((herm - 0.8 * number_operator(m.cutoff)).norm() < 1e-14);
    }
}

TEST_CASE("filter drift generator R") {
    const double t = 0.37;

    SUBCASE("undriven, oscillator off: R is exactly K") {
        SystemModel m = testutil::driven_cavity(5, 1.1, 0.9, 0.0);
        CHECK((derived_R(m, t) - derived_K(m)).norm() == 0.0);
    }
    SUBCASE("driven, oscillator off: K + sqrt(mu) f b^dag + |f|^2/2") {
        SystemModel m = testutil::driven_cavity(6, 1.1, 0.9, 0.45, 0.8);
        const Complex f = eval_f(m, t);
        const Operator want =
            derived_K(m) + std::sqrt(0.9) * f * creation(m.cutoff) +
            0.5 * std::norm(f) * Operator::Identity(6, 6);
        CHECK((derived_R(m, t) - want).norm() < 1e-14);
    }
    SUBCASE("uncoupled mode with oscillator: iH plus a scalar") {
        SystemModel m = testutil::driven_cavity(4, 0.7, 0.0, 0.0);
        m = testutil::with_oscillator(m, 0.5);
        const Operator want = Complex(0, 1) * hamiltonian(m.cutoff, 0.7) +
                              0.5 * (1.0 / 0.25) * Operator::Identity(4, 4);
        CHECK((derived_R(m, t) - want).norm() < 1e-14);
    }
    SUBCASE("full form with drive and oscillator") {
        SystemModel m = testutil::driven_cavity(6, 1.0, 1.2, 0.3, 0.1);
        m = testutil::with_oscillator(m, 0.4, 0.2, -0.6);
        const Complex f = eval_f(m, t);
        const Complex r = m.lo.eval(t);
        const Complex g = f + r / 0.4;
        const double sq = std::sqrt(1.2);
        const Operator want = derived_K(m) + sq * f * creation(m.cutoff) +
                              sq * (std::conj(r) / 0.4) * annihilation(m.cutoff) +
                              0.5 * std::norm(g) * Operator::Identity(6, 6);
        CHECK((derived_R(m, t) - want).norm() < 1e-13);
    }
}

TEST_CASE("model validation names the offending field") {
    SystemModel good = testutil::driven_cavity(4, 1.0, 1.0, 0.5);
    CHECK_NOTHROW(good.validate());

    SystemModel m = good;
    m.mu = -0.5;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("mu"),
                         std::invalid_argument);

    m = good;
    m.drive.lambda = -1.0;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("lambda"),
                         std::invalid_argument);

    m = good;
    m.lo.enabled = true;
    m.lo.epsilon = 0.0;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("epsilon"),
                         std::invalid_argument);

    m = good;
    m.initial = vacuum_state(FockCutoff(6));  // wrong dimension
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("banded state kernels match the dense operators") {
    SystemModel m = testutil::driven_cavity(9, 1.3, 0.7, 0.2);
    const CavityOps ops(m);
    const PureState s = testutil::random_low_state(m.cutoff, 5, 0);
    const Eigen::VectorXcd& phi = s.amplitudes;

    Eigen::VectorXcd out(9);
    apply_lower(ops, phi, out);
    CHECK((out - annihilation(m.cutoff) * phi).norm() < 1e-14);

    apply_raise(ops, phi, out);
    CHECK((out - creation(m.cutoff) * phi).norm() < 1e-14);

    CHECK(std::abs(mean_lowering(ops, phi) - expectation(ops.b, s)) < 1e-13);
    CHECK(mean_number(ops, phi) ==
          doctest::Approx(expectation(ops.num, s).real()).epsilon(1e-13));

    // The precomputed dense copies agree with the factories.
    CHECK((ops.b - annihilation(m.cutoff)).norm() == 0.0);
    CHECK((ops.h - hamiltonian(m.cutoff, 1.3)).norm() == 0.0);
    CHECK((ops.k - derived_K(m)).norm() == 0.0);
}

TEST_CASE("banded density-matrix kernels match dense products") {
    SystemModel m = testutil::driven_cavity(8, 1.0, 1.0, 0.3);
    const CavityOps ops(m);
    const Eigen::MatrixXcd x = random_matrix(8, 21);
    const Operator b = annihilation(m.cutoff);
    const Operator bd = creation(m.cutoff);
    Eigen::MatrixXcd out(8, 8);

    detail::dm_b_left(ops, x, out);
    CHECK((out - b * x).norm() < 1e-13);
    detail::dm_b_right(ops, x, out);
    CHECK((out - x * b).norm() < 1e-13);
    detail::dm_bdag_left(ops, x, out);
    CHECK((out - bd * x).norm() < 1e-13);
    detail::dm_bdag_right(ops, x, out);
    CHECK((out - x * bd).norm() < 1e-13);
    detail::dm_sandwich(ops, x, out);
    CHECK((out - b * x * bd).norm() < 1e-13);

    CHECK(std::abs(detail::dm_mean_lowering(ops, x) - (b * x).trace()) < 1e-13);
    CHECK(detail::dm_mean_number(ops, x) ==
          doctest::Approx((number_operator(m.cutoff) * x).trace().real())
              .epsilon(1e-12));
}
