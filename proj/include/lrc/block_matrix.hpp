#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <string>
#include <vector>

#include "lrc/errors.hpp"
#include "lrc/problem.hpp"
#include "lrc/types.hpp"

namespace lrc {

// Dense matrix carved into an (T+1)x(T+1) grid of m-by-n blocks.  Block (t,
// tau) holds the action of the measurement at time tau on the output at time
// t, so causality means the strictly-upper blocks vanish.  The wrapper does
// not force the zero pattern; use is_blt / zero_strictly_upper for that.
struct BlockLowerTriangular {
    Matrix data;
    Index m = 0;  // rows per block
    Index n = 0;  // cols per block
    int T = 0;    // grid has T+1 block rows and columns

    BlockLowerTriangular() = default;

    BlockLowerTriangular(Matrix d, Index block_rows, Index block_cols) : data(std::move(d)), m(block_rows), n(block_cols) {
        if (m <= 0 || n <= 0 || data.rows() % m != 0 || data.cols() % n != 0) {
            throw DimensionError("block grid does not divide matrix dimensions");
        }
        const Index grid_rows = data.rows() / m;
        if (grid_rows != data.cols() / n || grid_rows < 1) {
            throw DimensionError("block grid is not square");
        }
        T = static_cast<int>(grid_rows) - 1;
    }

    static BlockLowerTriangular zero(Index block_rows, Index block_cols, int horizon) {
        return {Matrix::Zero(block_rows * (horizon + 1), block_cols * (horizon + 1)), block_rows, block_cols};
    }

    Index rows() const { return data.rows(); }
    Index cols() const { return data.cols(); }

    auto block(int t, int tau) { return data.block(t * m, tau * n, m, n); }
    auto block(int t, int tau) const { return data.block(t * m, tau * n, m, n); }
};

// True iff every strictly-upper block entry has magnitude <= tol.
inline bool is_blt(const Matrix& M, Index m, Index n, int T, double tol) {
    if (M.rows() != m * (T + 1) || M.cols() != n * (T + 1)) {
        throw DimensionError("is_blt: matrix does not match block grid");
    }
    for (int t = 0; t <= T; ++t) {
        for (int tau = t + 1; tau <= T; ++tau) {
            if (M.block(t * m, tau * n, m, n).cwiseAbs().maxCoeff() > tol) return false;
        }
    }
    return true;
}

inline bool is_blt(const BlockLowerTriangular& K, double tol) { return is_blt(K.data, K.m, K.n, K.T, tol); }

// Overwrites the strictly-upper blocks with exact zeros.
inline void zero_strictly_upper(BlockLowerTriangular& K) {
    for (int t = 0; t <= K.T; ++t) {
        for (int tau = t + 1; tau <= K.T; ++tau) K.block(t, tau).setZero();
    }
}

// Number of singular values strictly above epsilon * sigma_max.  The relative
// threshold makes the count invariant to rescaling the matrix.
inline int tolerant_rank(const Matrix& M, double epsilon) {
    if (epsilon < 0) throw Error("tolerant_rank: epsilon must be nonnegative");
    if (M.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(M);
    const Vector& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    if (smax == 0.0) return 0;
    int r = 0;
    for (Index i = 0; i < s.size(); ++i) {
        if (s(i) > epsilon * smax) ++r;
    }
    return r;
}

inline Vector singular_values(const Matrix& M) {
    Eigen::JacobiSVD<Matrix> svd(M);
    return svd.singularValues();
}

// Lifted horizon-stacked operators.  calA and calB carry a trailing zero
// block (no dynamics out of the final state); calC covers all T+1 steps.
// Z is the downshift on the stacked state: block (t+1, t) is the identity.
struct LiftedOperators {
    Matrix Z;     // (T+1)n_x square
    Matrix calA;  // (T+1)n_x square
    Matrix calB;  // (T+1)n_x x (T+1)n_u
    Matrix calC;  // (T+1)n_y x (T+1)n_x
    int T = 0;
    Index n_x = 0, n_u = 0, n_y = 0;

    Index N_x() const { return (T + 1) * n_x; }
    Index N_u() const { return (T + 1) * n_u; }
    Index N_y() const { return (T + 1) * n_y; }
};

inline Matrix block_downshift(Index block, int T) {
    Matrix Z = Matrix::Zero(block * (T + 1), block * (T + 1));
    for (int t = 0; t < T; ++t) {
        Z.block((t + 1) * block, t * block, block, block).setIdentity();
    }
    return Z;
}

inline LiftedOperators lift(const TimeVaryingLinearSystem& sys) {
    LiftedOperators ops;
    ops.T = sys.T;
    ops.n_x = sys.n_x;
    ops.n_u = sys.n_u;
    ops.n_y = sys.n_y;
    ops.Z = block_downshift(sys.n_x, sys.T);
    ops.calA = Matrix::Zero(ops.N_x(), ops.N_x());
    ops.calB = Matrix::Zero(ops.N_x(), ops.N_u());
    ops.calC = Matrix::Zero(ops.N_y(), ops.N_x());
    for (int t = 0; t < sys.T; ++t) {
        ops.calA.block(t * sys.n_x, t * sys.n_x, sys.n_x, sys.n_x) = sys.A[t];
        ops.calB.block(t * sys.n_x, t * sys.n_u, sys.n_x, sys.n_u) = sys.B[t];
    }
    for (int t = 0; t <= sys.T; ++t) {
        ops.calC.block(t * sys.n_y, t * sys.n_x, sys.n_y, sys.n_x) = sys.C[t];
    }
    return ops;
}

}  // namespace lrc
