#pragma once

// Truncated single-mode Fock space: states, ladder operators, expectations.
//
// Everything lives on span{|0>,...,|dim-1>}.  The annihilation operator b has
// <n-1|b|n> = sqrt(n); its matrix is a single superdiagonal, and b^dag b is
// exactly diag(0,...,dim-1) on the truncated space.  The commutator defect of
// [b,b^dag] sits entirely in the top-level corner, which is why propagators
// watch the top two level populations for truncation leakage.

#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

namespace qfilt {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;       // dense operator on the truncated space
using DensityMatrix = Eigen::MatrixXcd;  // trace-one, Hermitian, rho >= 0

// Dimension of the truncated space (number of retained Fock levels).
struct FockCutoff {
    FockCutoff() = default;
    explicit FockCutoff(int dim_) : dim(dim_) {
        if (dim < 2) throw std::invalid_argument("FockCutoff: dim must be >= 2");
    }
    int dim = 2;
};

// State vector in the Fock basis.  `normalized` records whether the vector is
// meant to be unit length (the linear filter deliberately propagates
// unnormalized vectors whose squared norm is the record likelihood).
struct PureState {
    Eigen::VectorXcd amplitudes;
    bool normalized = true;

    int dim() const { return int(amplitudes.size()); }
    double norm() const { return amplitudes.norm(); }
    double norm_squared() const { return amplitudes.squaredNorm(); }

    // Scales to unit norm; returns |previous norm - 1| (the defect logged by
    // the nonlinear propagators).
    double renormalize();
};

// Thrown when population leaks into the top Fock levels beyond repair, or a
// propagator detects an unphysical state; the CLI maps this to exit code 4.
struct NumericalAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- operator factories ----------------------------------------------------

Operator annihilation(FockCutoff cutoff);             // b
Operator creation(FockCutoff cutoff);                 // b^dag
Operator number_operator(FockCutoff cutoff);          // b^dag b = diag(0..dim-1)
Operator hamiltonian(FockCutoff cutoff, double omega);  // omega (b^dag b + 1/2)

// --- states -----------------------------------------------------------------

PureState vacuum_state(FockCutoff cutoff);
PureState fock_state(FockCutoff cutoff, int n);

// Coherent state |beta>, renormalized on the truncated space.  Rejects the
// construction when the untruncated state keeps more than `max_leakage`
// weight above the cutoff (Poisson tail with mean |beta|^2).
PureState coherent_state(FockCutoff cutoff, Complex beta,
                         double max_leakage = 1e-6);

// Weight of the untruncated coherent state above the cutoff.
double coherent_tail_weight(FockCutoff cutoff, Complex beta);

// Thermal state diag weights ~ nbar^n/(1+nbar)^(n+1), renormalized.
DensityMatrix thermal_state(FockCutoff cutoff, double nbar);

DensityMatrix projector(const PureState& state);  // |phi><phi|

// --- expectations and diagnostics -------------------------------------------

// <phi|Z|phi>; requires a normalized state.
Complex expectation(const Operator& z, const PureState& state);
// tr(Z rho).
Complex expectation(const Operator& z, const DensityMatrix& rho);

double purity(const DensityMatrix& rho);             // tr(rho^2), real part
double trace_defect(const DensityMatrix& rho);       // |tr(rho) - 1|
double hermiticity_defect(const Eigen::MatrixXcd& m);  // max |m - m^dag|
double min_eigenvalue(const DensityMatrix& rho);     // of (rho+rho^dag)/2

// (1/2) ||rho1 - rho2||_1 via the eigenvalues of the Hermitian difference.
double trace_distance(const DensityMatrix& rho1, const DensityMatrix& rho2);

double fidelity(const PureState& a, const PureState& b);         // |<a|b>|
double fidelity(const PureState& state, const DensityMatrix& rho);  // sqrt(<phi|rho|phi>)

// Population of the top two Fock levels (the leakage monitor input).
double top_level_population(const PureState& state);
double top_level_population(const DensityMatrix& rho);

}  // namespace qfilt
