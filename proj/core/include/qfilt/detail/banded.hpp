#pragma once

// Banded products with the ladder operators for density matrices.  In the
// Fock basis b has a single superdiagonal, so every product below is O(dim^2)
// instead of a dense O(dim^3) matmul; the unit tests pin these against the
// dense matrices from fock.hpp.

#include "qfilt/model.hpp"

namespace qfilt::detail {

// out = b X
inline void dm_b_left(const CavityOps& ops, const Eigen::MatrixXcd& x,
                      Eigen::MatrixXcd& out) {
    const int d = ops.dim;
    for (int i = 0; i + 1 < d; ++i) out.row(i) = ops.sqrt_np1(i) * x.row(i + 1);
    out.row(d - 1).setZero();
}

// out = X b
inline void dm_b_right(const CavityOps& ops, const Eigen::MatrixXcd& x,
                       Eigen::MatrixXcd& out) {
    const int d = ops.dim;
    out.col(0).setZero();
    for (int j = 1; j < d; ++j) out.col(j) = ops.sqrt_np1(j - 1) * x.col(j - 1);
}

// out = b^dag X
inline void dm_bdag_left(const CavityOps& ops, const Eigen::MatrixXcd& x,
                         Eigen::MatrixXcd& out) {
    const int d = ops.dim;
    out.row(0).setZero();
    for (int i = 1; i < d; ++i) out.row(i) = ops.sqrt_np1(i - 1) * x.row(i - 1);
}

// out = X b^dag
inline void dm_bdag_right(const CavityOps& ops, const Eigen::MatrixXcd& x,
                          Eigen::MatrixXcd& out) {
    const int d = ops.dim;
    for (int j = 0; j + 1 < d; ++j) out.col(j) = ops.sqrt_np1(j) * x.col(j + 1);
    out.col(d - 1).setZero();
}

// out = b X b^dag
inline void dm_sandwich(const CavityOps& ops, const Eigen::MatrixXcd& x,
                        Eigen::MatrixXcd& out) {
    const int d = ops.dim;
    for (int i = 0; i + 1 < d; ++i) {
        for (int j = 0; j + 1 < d; ++j) {
            out(i, j) = ops.sqrt_np1(i) * ops.sqrt_np1(j) * x(i + 1, j + 1);
        }
        out(i, d - 1) = Complex(0.0, 0.0);
    }
    out.row(d - 1).setZero();
}

// tr(b X)
inline Complex dm_mean_lowering(const CavityOps& ops, const Eigen::MatrixXcd& x) {
    Complex acc(0.0, 0.0);
    for (int i = 0; i + 1 < ops.dim; ++i) acc += ops.sqrt_np1(i) * x(i + 1, i);
    return acc;
}

// tr(b^dag b X)
inline double dm_mean_number(const CavityOps& ops, const Eigen::MatrixXcd& x) {
    double acc = 0.0;
    for (int i = 1; i < ops.dim; ++i) acc += double(i) * x(i, i).real();
    return acc;
}

}  // namespace qfilt::detail
