#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <utility>
#include <vector>

#include "lrc/errors.hpp"
#include "lrc/types.hpp"

namespace lrc {

// Index map for the stacked decision vector used by the whole pipeline:
//
//   [ vec(Phi_xx) | vec(Phi_xy) | vec(Phi_ux) | vec(Phi_uy) | vec(Lambda) ]
//
// every block column-major.  Lambda is optional (size 0 when a layout is
// built for response algebra only).  All assemblers and the conic bridge
// share this map; changing the order here changes it everywhere.
struct VariableLayout {
    Index n_x = 0, n_u = 0, n_y = 0;
    int T = 0;
    Index lambda_rows = 0, lambda_cols = 0;

    VariableLayout() = default;
    VariableLayout(Index nx, Index nu, Index ny, int horizon, Index lam_rows = 0, Index lam_cols = 0)
        : n_x(nx), n_u(nu), n_y(ny), T(horizon), lambda_rows(lam_rows), lambda_cols(lam_cols) {}

    Index N_x() const { return (T + 1) * n_x; }
    Index N_u() const { return (T + 1) * n_u; }
    Index N_y() const { return (T + 1) * n_y; }

    Index off_xx() const { return 0; }
    Index off_xy() const { return off_xx() + N_x() * N_x(); }
    Index off_ux() const { return off_xy() + N_x() * N_y(); }
    Index off_uy() const { return off_ux() + N_u() * N_x(); }
    Index off_lambda() const { return off_uy() + N_u() * N_y(); }
    Index phi_size() const { return off_lambda(); }
    Index size() const { return off_lambda() + lambda_rows * lambda_cols; }

    Index xx(Index i, Index j) const { return off_xx() + j * N_x() + i; }
    Index xy(Index i, Index j) const { return off_xy() + j * N_x() + i; }
    Index ux(Index i, Index j) const { return off_ux() + j * N_u() + i; }
    Index uy(Index i, Index j) const { return off_uy() + j * N_u() + i; }
    Index lambda(Index i, Index j) const { return off_lambda() + j * lambda_rows + i; }

    // Entry (r, c) of the constrained response map: rows are states x_1..x_T
    // then inputs u_0..u_{T-1}; columns are the initial state, process noise,
    // and measurement noise directions (v_T column block excluded upstream).
    Index phi_tilde(Index r, Index c) const {
        const Index state_rows = T * n_x;
        if (c < N_x()) {
            return r < state_rows ? xx(n_x + r, c) : ux(r - state_rows, c);
        }
        const Index cy = c - N_x();
        return r < state_rows ? xy(n_x + r, cy) : uy(r - state_rows, cy);
    }
};

// Sparse linear constraints over the stacked vector: equality rows A x = b
// and inequality rows G x <= g, stored as triplets until the conic bridge
// assembles them.  Category counters keep assembly auditable.
struct AffineConstraintSet {
    Index num_vars = 0;
    std::vector<Eigen::Triplet<double>> eq;
    std::vector<double> eq_rhs;
    std::vector<Eigen::Triplet<double>> ineq;
    std::vector<double> ineq_rhs;

    Index n_response_rows = 0;   // closed-loop map identities
    Index n_structure_rows = 0;  // causality zero pins
    Index n_coupling_rows = 0;   // certificate-vs-response coupling
    Index n_sparsity_rows = 0;   // cross-sensor channel pins

    Index eq_rows() const { return static_cast<Index>(eq_rhs.size()); }
    Index ineq_rows() const { return static_cast<Index>(ineq_rhs.size()); }

    Index begin_eq_row(double rhs) {
        eq_rhs.push_back(rhs);
        return eq_rows() - 1;
    }
    void eq_coeff(Index row, Index var, double a) {
        if (var < 0 || var >= num_vars) throw DimensionError("constraint references unknown variable");
        if (a != 0.0) eq.emplace_back(static_cast<int>(row), static_cast<int>(var), a);
    }
    Index begin_ineq_row(double rhs) {
        ineq_rhs.push_back(rhs);
        return ineq_rows() - 1;
    }
    void ineq_coeff(Index row, Index var, double a) {
        if (var < 0 || var >= num_vars) throw DimensionError("constraint references unknown variable");
        if (a != 0.0) ineq.emplace_back(static_cast<int>(row), static_cast<int>(var), a);
    }

    // Appends another set over the same layout (other.num_vars may be a
    // prefix of this one's).
    void append(const AffineConstraintSet& other) {
        if (other.num_vars > num_vars) throw DimensionError("append: variable spaces incompatible");
        const auto eq_base = eq_rows();
        const auto ineq_base = ineq_rows();
        for (const auto& t : other.eq) eq.emplace_back(static_cast<int>(t.row() + eq_base), t.col(), t.value());
        eq_rhs.insert(eq_rhs.end(), other.eq_rhs.begin(), other.eq_rhs.end());
        for (const auto& t : other.ineq) ineq.emplace_back(static_cast<int>(t.row() + ineq_base), t.col(), t.value());
        ineq_rhs.insert(ineq_rhs.end(), other.ineq_rhs.begin(), other.ineq_rhs.end());
        n_response_rows += other.n_response_rows;
        n_structure_rows += other.n_structure_rows;
        n_coupling_rows += other.n_coupling_rows;
        n_sparsity_rows += other.n_sparsity_rows;
    }

    Eigen::SparseMatrix<double> eq_matrix() const {
        Eigen::SparseMatrix<double> A(eq_rows(), num_vars);
        A.setFromTriplets(eq.begin(), eq.end());
        return A;
    }
    Eigen::SparseMatrix<double> ineq_matrix() const {
        Eigen::SparseMatrix<double> G(ineq_rows(), num_vars);
        G.setFromTriplets(ineq.begin(), ineq.end());
        return G;
    }

    double eq_residual(const Vector& x) const {
        if (x.size() != num_vars) throw DimensionError("eq_residual: wrong vector length");
        if (eq_rows() == 0) return 0.0;
        Vector r = eq_matrix() * x - Eigen::Map<const Vector>(eq_rhs.data(), eq_rows());
        return r.cwiseAbs().maxCoeff();
    }
    double ineq_violation(const Vector& x) const {
        if (x.size() != num_vars) throw DimensionError("ineq_violation: wrong vector length");
        if (ineq_rows() == 0) return 0.0;
        Vector r = ineq_matrix() * x - Eigen::Map<const Vector>(ineq_rhs.data(), ineq_rows());
        return std::max(0.0, r.maxCoeff());
    }
};

}  // namespace lrc
