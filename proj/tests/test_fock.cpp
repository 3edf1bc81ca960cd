#include <doctest.h>

#include <cmath>
#include <complex>

#include "qfilt/fock.hpp"
#include "qfilt/rng.hpp"
#include "support/models.hpp"

using namespace qfilt;

TEST_CASE("ladder operators on the truncated space") {
    SUBCASE("dim 2 annihilation is [[0,1],[0,0]]") {
        const Operator b = annihilation(FockCutoff(2));
        CHECK(b(0, 0) == Complex(0, 0));
        CHECK(b(0, 1) == Complex(1, 0));
        CHECK(b(1, 0) == Complex(0, 0));
        CHECK(b(1, 1) == Complex(0, 0));
    }
    SUBCASE("matrix elements are sqrt(n) on the superdiagonal") {
        const Operator b = annihilation(FockCutoff(3));
        CHECK(b(1, 2).real() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
        CHECK(b(2, 2) == Complex(0, 0));
        CHECK(creation(FockCutoff(3)) == b.adjoint());
    }
    SUBCASE("number operator is exactly diag(0..dim-1)") {
        const Operator n = number_operator(FockCutoff(5));
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                CHECK(n(i, j) == (i == j ? Complex(i, 0) : Complex(0, 0)));
            }
        }
    }
    SUBCASE("commutator defect sits entirely in the top corner") {
        const FockCutoff c(16);
        const Operator b = annihilation(c);
        const Operator comm = b * creation(c) - creation(c) * b;
        for (int i = 0; i < 16; ++i) {
            for (int j = 0; j < 16; ++j) {
                const Complex want = (i != j)            ? Complex(0, 0)
                                     : (i == 15)         ? Complex(-15, 0)
                                                         : Complex(1, 0);
                CHECK(std::abs(comm(i, j) - want) < 1e-12);
            }
        }
    }
    SUBCASE("hamiltonian is omega (n + 1/2)") {
        const Operator h2 = hamiltonian(FockCutoff(2), 1.0);
        CHECK(h2(0, 0) == Complex(0.5, 0));
        CHECK(h2(1, 1) == Complex(1.5, 0));
        const Operator h3 = hamiltonian(FockCutoff(3), 2.0);
        CHECK(h3(0, 0) == Complex(1, 0));
        CHECK(h3(1, 1) == Complex(3, 0));
        CHECK(h3(2, 2) == Complex(5, 0));
    }
    SUBCASE("cutoff below 2 is rejected") {
        CHECK_THROWS_AS(FockCutoff(1), std::invalid_argument);
        CHECK_THROWS_AS(FockCutoff(0), std::invalid_argument);
    }
}

TEST_CASE("basis states") {
    const FockCutoff c(4);
    const PureState v = vacuum_state(c);
    CHECK(v.amplitudes(0) == Complex(1, 0));
    CHECK(v.amplitudes.tail(3).norm() == 0.0);

    const PureState one = fock_state(c, 1);
    CHECK(one.amplitudes(1) == Complex(1, 0));
    CHECK(expectation(number_operator(c), one).real() == doctest::Approx(1.0));
    CHECK_THROWS_AS(fock_state(c, 4), std::invalid_argument);
    CHECK_THROWS_AS(fock_state(c, -1), std::invalid_argument);
}

TEST_CASE("coherent states") {
    const FockCutoff c(20);

    SUBCASE("beta = 0 is the vacuum") {
        const PureState s = coherent_state(c, Complex(0, 0));
        CHECK((s.amplitudes - vacuum_state(c).amplitudes).norm() == 0.0);
    }
    SUBCASE("photon number and amplitude match |beta|^2 and beta") {
        const PureState s = coherent_state(c, Complex(1, 0));
        CHECK(s.amplitudes.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(expectation(number_operator(c), s).real() ==
              doctest::Approx(1.0).epsilon(1e-9));

        const Complex beta(0.5, 0.5);
        const PureState t = coherent_state(c, beta);
        const Complex got = expectation(annihilation(c), t);
        CHECK(std::abs(got - beta) < 1e-9);
    }
    SUBCASE("near-eigenstate of the annihilation operator") {
        const Complex beta(1, 0);
        const PureState s = coherent_state(c, beta);
        const Eigen::VectorXcd residual =
            annihilation(c) * s.amplitudes - beta * s.amplitudes;
        CHECK(residual.norm() < 1e-7);
    }
    SUBCASE("construction is rejected when the truncation tail is heavy") {
        // Poisson(|beta|^2 = 4) keeps ~0.57 of its weight at n >= 4.
        CHECK_THROWS_AS(coherent_state(FockCutoff(4), Complex(2, 0)),
                        std::invalid_argument);
        CHECK(coherent_tail_weight(FockCutoff(4), Complex(2, 0)) ==
              doctest::Approx(0.56652988).epsilon(1e-6));
        // Loosening the leakage budget admits the same construction.
        CHECK_NOTHROW(coherent_state(FockCutoff(4), Complex(2, 0), 0.6));
    }
}

TEST_CASE("thermal state") {
    const FockCutoff c(30);
    const DensityMatrix rho = thermal_state(c, 0.5);
    CHECK(trace_defect(rho) < 1e-12);
    CHECK(hermiticity_defect(rho) < 1e-14);
    CHECK(expectation(number_operator(c), rho).real() ==
          doctest::Approx(0.5).epsilon(1e-6));
    CHECK(purity(rho) < 1.0);
    // nbar = 0 collapses to the vacuum projector.
    const DensityMatrix cold = thermal_state(c, 0.0);
    CHECK(cold(0, 0).real() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("expectations are linear and real for Hermitian operators") {
    const FockCutoff c(8);
    const PureState s = testutil::random_low_state(c, 31, 0);
    CounterRng rng(77, 0);
    Operator a(8, 8);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
            a(i, j) = Complex(rng.next_gaussian(), rng.next_gaussian());
        }
    }
    const Operator herm = a + a.adjoint().eval();
    CHECK(std::abs(expectation(herm, s).imag()) < 1e-12);
    CHECK(std::abs(expectation(herm, projector(s)).imag()) < 1e-12);
    // Pure-state and projector expectations agree.
    CHECK(std::abs(expectation(herm, s) - expectation(herm, projector(s))) < 1e-12);
}

TEST_CASE("distances, fidelities, purity") {
    const FockCutoff c(2);
    const PureState zero = vacuum_state(c);
    const PureState one = fock_state(c, 1);

    CHECK(fidelity(zero, one) == doctest::Approx(0.0));
    CHECK(fidelity(zero, zero) == doctest::Approx(1.0));
    CHECK(trace_distance(projector(zero), projector(one)) == doctest::Approx(1.0));
    CHECK(trace_distance(projector(zero), projector(zero)) ==
          doctest::Approx(0.0).epsilon(1e-14));

    DensityMatrix mixed = 0.5 * projector(zero) + 0.5 * projector(one);
    CHECK(purity(mixed) == doctest::Approx(0.5));
    CHECK(purity(projector(one)) == doctest::Approx(1.0));
    CHECK(fidelity(zero, mixed) == doctest::Approx(std::sqrt(0.5)));
    CHECK(min_eigenvalue(mixed) == doctest::Approx(0.5));
    CHECK(min_eigenvalue(projector(zero)) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("renormalize reports the norm defect it repaired") {
    PureState s;
    s.amplitudes = Eigen::VectorXcd::Zero(3);
    s.amplitudes(0) = Complex(2, 0);
    CHECK(s.renormalize() == doctest::Approx(1.0));
    CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("top-level population monitors the last two levels") {
    const FockCutoff c(6);
    PureState s;
    s.amplitudes = Eigen::VectorXcd::Zero(6);
    s.amplitudes(4) = Complex(0.6, 0);
    s.amplitudes(5) = Complex(0, 0.8);
    CHECK(top_level_population(s) == doctest::Approx(1.0));
    CHECK(top_level_population(projector(s)) == doctest::Approx(1.0));
    CHECK(top_level_population(vacuum_state(c)) == doctest::Approx(0.0));

    // A modest coherent state keeps essentially nothing up there.
    const PureState coh = coherent_state(FockCutoff(20), Complex(1, 0));
    CHECK(top_level_population(coh) < 1e-10);
}
