#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>

#include "lrc/affine_constraints.hpp"
#include "lrc/block_matrix.hpp"
#include "lrc/errors.hpp"
#include "lrc/types.hpp"

namespace lrc {

// Closed-loop maps from stacked noise [x0-impulse; w] and [v] to stacked
// state and input:  x = Phi_xx w + Phi_xy v,  u = Phi_ux w + Phi_uy v.
struct SystemResponse {
    BlockLowerTriangular phi_xx;
    BlockLowerTriangular phi_xy;
    BlockLowerTriangular phi_ux;
    BlockLowerTriangular phi_uy;

    int T() const { return phi_xx.T; }
};

namespace sls_detail {

// X = (I - S)^{-1} B for strictly block-lower S, by forward block
// substitution over block rows.  Keeps the structural zeros of the inverse
// exact: diagonal blocks of (I - S)^{-1} are exactly I.
inline Matrix unit_lower_solve(const Matrix& S, const Matrix& B, Index blk) {
    const int steps = static_cast<int>(S.rows() / blk);
    Matrix X = B;
    for (int t = 1; t < steps; ++t) {
        auto row = X.middleRows(t * blk, blk);
        for (int s = 0; s < t; ++s) {
            row.noalias() += S.block(t * blk, s * blk, blk, blk) * X.middleRows(s * blk, blk);
        }
    }
    return X;
}

}  // namespace sls_detail

// Closed-loop maps realized by the output-feedback law u = K y.  The inverse
// exists unconditionally: Z calA and Z calB K calC are strictly block-lower,
// so I minus their sum is unit lower-triangular; forward substitution keeps
// the identity diagonal blocks and the upper zero blocks exact.
inline SystemResponse response_from_controller(const BlockLowerTriangular& K, const LiftedOperators& ops) {
    if (K.m != ops.n_u || K.n != ops.n_y || K.T != ops.T) {
        throw DimensionError("response_from_controller: controller does not match system dimensions");
    }
    const Matrix ZA = ops.Z * ops.calA;
    const Matrix ZB = ops.Z * ops.calB;
    const Matrix S = ZA + ZB * K.data * ops.calC;
    SystemResponse r;
    Matrix phi_xx = sls_detail::unit_lower_solve(S, Matrix::Identity(ops.N_x(), ops.N_x()), ops.n_x);
    r.phi_xy = BlockLowerTriangular(phi_xx * ZB * K.data, ops.n_x, ops.n_y);
    r.phi_ux = BlockLowerTriangular(K.data * ops.calC * phi_xx, ops.n_u, ops.n_x);
    r.phi_uy = BlockLowerTriangular(K.data + K.data * ops.calC * r.phi_xy.data, ops.n_u, ops.n_y);
    r.phi_xx = BlockLowerTriangular(std::move(phi_xx), ops.n_x, ops.n_x);
    return r;
}

// Recovers K = Phi_uy - Phi_ux Phi_xx^{-1} Phi_xy.  blt_tol guards against
// garbage responses from a failed upstream solve.
inline BlockLowerTriangular controller_from_response(const SystemResponse& r, double blt_tol = 1e-7) {
    const Matrix K = r.phi_uy.data - r.phi_ux.data * r.phi_xx.data.partialPivLu().solve(r.phi_xy.data);
    BlockLowerTriangular out(K, r.phi_uy.m, r.phi_uy.n);
    if (!is_blt(out, blt_tol)) {
        throw Error("controller_from_response: recovered gain is not causal within tolerance");
    }
    zero_strictly_upper(out);
    return out;
}

// Rows of [Phi_xx Phi_xy; Phi_ux Phi_uy] that the safety constraints touch:
// states x_1..x_T stacked over inputs u_0..u_{T-1}.  The trailing v_T columns
// are dropped; causality forces them to zero in every kept row.
inline Matrix extract_phi_tilde(const SystemResponse& r) {
    const Index n_x = r.phi_xx.m, n_u = r.phi_ux.m, n_y = r.phi_xy.n;
    const int T = r.T();
    const Index cols = (T + 1) * n_x + T * n_y;
    Matrix out(T * n_x + T * n_u, cols);
    out.topLeftCorner(T * n_x, (T + 1) * n_x) = r.phi_xx.data.bottomRows(T * n_x);
    out.topRightCorner(T * n_x, T * n_y) = r.phi_xy.data.bottomRows(T * n_x).leftCols(T * n_y);
    out.bottomLeftCorner(T * n_u, (T + 1) * n_x) = r.phi_ux.data.topRows(T * n_u);
    out.bottomRightCorner(T * n_u, T * n_y) = r.phi_uy.data.topRows(T * n_u).leftCols(T * n_y);
    // The dropped final measurement-noise block never reaches the kept rows:
    // those blocks sit strictly above the diagonal of causal maps.
    double drop = 0.0;
    if (T > 0) {
        drop = std::max(r.phi_xy.data.bottomRows(T * n_x).rightCols(n_y).cwiseAbs().maxCoeff(),
                        r.phi_uy.data.topRows(T * n_u).rightCols(n_y).cwiseAbs().maxCoeff());
    }
    const double scale = std::max({1.0, r.phi_xy.data.cwiseAbs().maxCoeff(), r.phi_uy.data.cwiseAbs().maxCoeff()});
    if (drop > 1e-4 * scale) throw Error("extract_phi_tilde: response is not causal in the last measurement block");
    return out;
}

// Scalar channel from sensor j to actuator i as a (T+1)x(T+1) lower-
// triangular matrix; entry (t, tau) is [Phi_uy] at row t*n_u+i, col tau*n_y+j.
inline Matrix extract_pair_response(const BlockLowerTriangular& phi_uy, Index i, Index j) {
    if (i < 0 || i >= phi_uy.m || j < 0 || j >= phi_uy.n) {
        throw DimensionError("extract_pair_response: channel index out of range");
    }
    const int T = phi_uy.T;
    Matrix out(T + 1, T + 1);
    for (int t = 0; t <= T; ++t) {
        for (int tau = 0; tau <= T; ++tau) out(t, tau) = phi_uy.data(t * phi_uy.m + i, tau * phi_uy.n + j);
    }
    return out;
}

// Linear identities every achievable response satisfies, over the stacked
// decision vector:
//   [I - Z calA, -Z calB] [Phi_xx Phi_xy; Phi_ux Phi_uy] = [I, 0]
//   [Phi_xx Phi_xy; Phi_ux Phi_uy] [I - Z calA; -calC]   = [I; 0]
// plus zero pins on every strictly-upper block of all four maps.
inline AffineConstraintSet assemble_sls_equalities(const LiftedOperators& ops, const VariableLayout& layout) {
    if (layout.n_x != ops.n_x || layout.n_u != ops.n_u || layout.n_y != ops.n_y || layout.T != ops.T) {
        throw DimensionError("assemble_sls_equalities: layout does not match operators");
    }
    const Index N_x = ops.N_x(), N_u = ops.N_u(), N_y = ops.N_y();
    const Matrix ZA = ops.Z * ops.calA;
    const Matrix ZB = ops.Z * ops.calB;

    AffineConstraintSet set;
    set.num_vars = layout.size();

    // Left identities.  Row i of [I - ZA, -ZB] touches block t(i)'s diagonal
    // and block t(i)-1's dynamics, so each constraint has few terms.
    for (Index j = 0; j < N_x + N_y; ++j) {
        const bool state_col = j < N_x;
        for (Index i = 0; i < N_x; ++i) {
            const Index row = set.begin_eq_row(state_col && i == j ? 1.0 : 0.0);
            auto x_var = [&](Index k) { return state_col ? layout.xx(k, j) : layout.xy(k, j - N_x); };
            auto u_var = [&](Index k) { return state_col ? layout.ux(k, j) : layout.uy(k, j - N_x); };
            set.eq_coeff(row, x_var(i), 1.0);
            const Index t = i / ops.n_x;
            if (t > 0) {
                const Index kx0 = (t - 1) * ops.n_x;
                for (Index k = 0; k < ops.n_x; ++k) set.eq_coeff(row, x_var(kx0 + k), -ZA(i, kx0 + k));
                const Index ku0 = (t - 1) * ops.n_u;
                for (Index k = 0; k < ops.n_u; ++k) set.eq_coeff(row, u_var(ku0 + k), -ZB(i, ku0 + k));
            }
            ++set.n_response_rows;
        }
    }

    // Right identities.  Column j of [I - ZA; -calC] touches the diagonal,
    // next-step dynamics rows and the same-step measurement rows.
    for (Index j = 0; j < N_x; ++j) {
        const Index t = j / ops.n_x;
        for (Index i = 0; i < N_x + N_u; ++i) {
            const bool state_row = i < N_x;
            const Index row = set.begin_eq_row(state_row && i == j ? 1.0 : 0.0);
            auto x_var = [&](Index k) { return state_row ? layout.xx(i, k) : layout.ux(i - N_x, k); };
            auto y_var = [&](Index k) { return state_row ? layout.xy(i, k) : layout.uy(i - N_x, k); };
            set.eq_coeff(row, x_var(j), 1.0);
            if (t < ops.T) {
                const Index kx0 = (t + 1) * ops.n_x;
                for (Index k = 0; k < ops.n_x; ++k) set.eq_coeff(row, x_var(kx0 + k), -ZA(kx0 + k, j));
            }
            const Index ky0 = t * ops.n_y;
            for (Index k = 0; k < ops.n_y; ++k) set.eq_coeff(row, y_var(ky0 + k), -ops.calC(ky0 + k, j));
            ++set.n_response_rows;
        }
    }

    // Causality pins.
    auto pin_upper = [&](Index m, Index n, auto var) {
        for (int t = 0; t <= ops.T; ++t) {
            for (int tau = t + 1; tau <= ops.T; ++tau) {
                for (Index bi = 0; bi < m; ++bi) {
                    for (Index bj = 0; bj < n; ++bj) {
                        const Index row = set.begin_eq_row(0.0);
                        set.eq_coeff(row, var(t * m + bi, tau * n + bj), 1.0);
                        ++set.n_structure_rows;
                    }
                }
            }
        }
    };
    pin_upper(ops.n_x, ops.n_x, [&](Index i, Index j) { return layout.xx(i, j); });
    pin_upper(ops.n_x, ops.n_y, [&](Index i, Index j) { return layout.xy(i, j); });
    pin_upper(ops.n_u, ops.n_x, [&](Index i, Index j) { return layout.ux(i, j); });
    pin_upper(ops.n_u, ops.n_y, [&](Index i, Index j) { return layout.uy(i, j); });
    return set;
}

// Stacks a response (and optional certificate) into the layout's vector form;
// used by tests and by the solution extraction path.
inline Vector stack_variables(const VariableLayout& layout, const SystemResponse& r, const Matrix& lambda = Matrix()) {
    Vector x = Vector::Zero(layout.size());
    auto put = [&](const Matrix& M, auto var) {
        for (Index j = 0; j < M.cols(); ++j)
            for (Index i = 0; i < M.rows(); ++i) x(var(i, j)) = M(i, j);
    };
    put(r.phi_xx.data, [&](Index i, Index j) { return layout.xx(i, j); });
    put(r.phi_xy.data, [&](Index i, Index j) { return layout.xy(i, j); });
    put(r.phi_ux.data, [&](Index i, Index j) { return layout.ux(i, j); });
    put(r.phi_uy.data, [&](Index i, Index j) { return layout.uy(i, j); });
    if (lambda.size() > 0) {
        if (lambda.rows() != layout.lambda_rows || lambda.cols() != layout.lambda_cols) {
            throw DimensionError("stack_variables: certificate shape mismatch");
        }
        put(lambda, [&](Index i, Index j) { return layout.lambda(i, j); });
    }
    return x;
}

inline SystemResponse unstack_response(const VariableLayout& layout, const Vector& x) {
    if (x.size() < layout.phi_size()) throw DimensionError("unstack_response: vector too short");
    SystemResponse r;
    auto take = [&](Index rows, Index cols, auto var) {
        Matrix M(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) M(i, j) = x(var(i, j));
        return M;
    };
    r.phi_xx = BlockLowerTriangular(take(layout.N_x(), layout.N_x(), [&](Index i, Index j) { return layout.xx(i, j); }), layout.n_x, layout.n_x);
    r.phi_xy = BlockLowerTriangular(take(layout.N_x(), layout.N_y(), [&](Index i, Index j) { return layout.xy(i, j); }), layout.n_x, layout.n_y);
    r.phi_ux = BlockLowerTriangular(take(layout.N_u(), layout.N_x(), [&](Index i, Index j) { return layout.ux(i, j); }), layout.n_u, layout.n_x);
    r.phi_uy = BlockLowerTriangular(take(layout.N_u(), layout.N_y(), [&](Index i, Index j) { return layout.uy(i, j); }), layout.n_u, layout.n_y);
    return r;
}

inline Matrix unstack_lambda(const VariableLayout& layout, const Vector& x) {
    if (x.size() < layout.size()) throw DimensionError("unstack_lambda: vector too short");
    Matrix L(layout.lambda_rows, layout.lambda_cols);
    for (Index j = 0; j < layout.lambda_cols; ++j)
        for (Index i = 0; i < layout.lambda_rows; ++i) L(i, j) = x(layout.lambda(i, j));
    return L;
}

}  // namespace lrc
