#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "lrc/block_matrix.hpp"
#include "lrc/errors.hpp"
#include "lrc/types.hpp"

namespace lrc {

// K = D E with band r = number of E rows.  Row k of E is the encoder of
// message k (a linear functional of measurements up to time times[k]); column
// k of D is the decoder (messages feed only inputs at or after times[k]).
// pivot_rows are the 0-based K rows that seeded each message.
struct CausalFactorization {
    Matrix D;
    Matrix E;
    int band = 0;
    std::vector<int> times;
    std::vector<Index> pivot_rows;
    Index n_u = 0, n_y = 0;
    int T = 0;
    double residual = 0.0;  // max-norm of D*E - K over the factored matrix
};

namespace detail {

// Incremental row-space tracker: Gram-Schmidt with one reorthogonalization
// pass.  Keeps the orthonormal basis B and the triangular coefficients L with
// pivot_rows = L * B, so expansion coefficients of any row in the pivot-row
// basis come from one triangular solve.
class RowRankTracker {
  public:
    RowRankTracker(Index cols, double epsilon) : cols_(cols), epsilon_(std::max(epsilon, 1e-14)) {}

    // Returns true when the row enlarged the basis (rank went up by one).
    bool push(const Eigen::RowVectorXd& row) {
        scale_ = std::max(scale_, row.norm());
        Eigen::RowVectorXd w = row;
        Vector coeff = Vector::Zero(rank());
        for (int pass = 0; pass < 2; ++pass) {
            for (int j = 0; j < rank(); ++j) {
                const double c = w.dot(basis_[j]);
                coeff(j) += c;
                w -= c * basis_[j];
            }
        }
        const double res = w.norm();
        if (scale_ == 0.0 || res <= epsilon_ * scale_) return false;
        basis_.push_back(w / res);
        L_.push_back(std::move(coeff));
        diag_.push_back(res);
        return true;
    }

    int rank() const { return static_cast<int>(basis_.size()); }
    double scale() const { return scale_; }

    // d with d * pivot_rows = projection of row onto the current row space.
    Vector coefficients(const Eigen::RowVectorXd& row) const {
        const int r = rank();
        Vector beta(r);
        for (int j = 0; j < r; ++j) beta(j) = row.dot(basis_[j]);
        // Solve d L = beta with L lower-triangular (diag_ on the diagonal).
        Vector d(r);
        for (int k = r - 1; k >= 0; --k) {
            double acc = beta(k);
            for (int j = r - 1; j > k; --j) acc -= d(j) * L_[j](k);
            d(k) = acc / diag_[k];
        }
        return d;
    }

  private:
    Index cols_;
    double epsilon_;
    double scale_ = 0.0;
    std::vector<Eigen::RowVectorXd> basis_;
    std::vector<Vector> L_;  // L_[k] holds the k-th row's coefficients on basis 0..k-1
    std::vector<double> diag_;
};

inline double blt_check_tol(const Matrix& M, double epsilon) {
    const double mx = M.size() > 0 ? M.cwiseAbs().maxCoeff() : 0.0;
    return std::max(epsilon, 1e-12) * std::max(mx, 1.0);
}

}  // namespace detail

// Prefix row ranks r_l of K's leading l rows, computed incrementally with the
// same relative threshold the factorization uses.
inline std::vector<int> rank_profile(const BlockLowerTriangular& K, double epsilon) {
    if (!is_blt(K, detail::blt_check_tol(K.data, epsilon))) throw NotBltError("rank_profile: matrix is not block-lower-triangular");
    detail::RowRankTracker tracker(K.cols(), epsilon);
    std::vector<int> profile;
    profile.reserve(K.rows());
    for (Index l = 0; l < K.rows(); ++l) {
        tracker.push(K.data.row(l));
        profile.push_back(tracker.rank());
    }
    return profile;
}

// Factor K into encoder/decoder.  Pivot rows are copied verbatim into E, so a
// message is literally a reusable controller row; every other row of K is
// expanded in that basis to fill D.  Strictly-upper blocks are zeroed exactly
// before factoring (they must already be below the structural tolerance).
inline CausalFactorization causal_factorize(const BlockLowerTriangular& K, double epsilon) {
    if (!is_blt(K, detail::blt_check_tol(K.data, epsilon))) {
        throw NotBltError("causal_factorize: matrix is not block-lower-triangular");
    }
    BlockLowerTriangular Kc = K;
    zero_strictly_upper(Kc);

    CausalFactorization f;
    f.n_u = K.m;
    f.n_y = K.n;
    f.T = K.T;

    detail::RowRankTracker tracker(Kc.cols(), epsilon);
    std::vector<Vector> d_rows(Kc.rows());
    std::vector<Eigen::RowVectorXd> e_rows;
    for (Index l = 0; l < Kc.rows(); ++l) {
        const Eigen::RowVectorXd row = Kc.data.row(l);
        if (tracker.push(row)) {
            f.pivot_rows.push_back(l);
            f.times.push_back(static_cast<int>(l / K.m));
            e_rows.push_back(row);
            Vector unit = Vector::Zero(tracker.rank());
            unit(tracker.rank() - 1) = 1.0;
            d_rows[l] = std::move(unit);
        } else {
            d_rows[l] = tracker.coefficients(row);
        }
    }

    f.band = tracker.rank();
    f.E = Matrix::Zero(f.band, Kc.cols());
    for (int k = 0; k < f.band; ++k) f.E.row(k) = e_rows[k];
    f.D = Matrix::Zero(Kc.rows(), f.band);
    for (Index l = 0; l < Kc.rows(); ++l) {
        f.D.row(l).head(d_rows[l].size()) = d_rows[l];
    }

    if (f.band > 0) {
        f.residual = (f.D * f.E - Kc.data).cwiseAbs().maxCoeff();
        const double eps_eff = std::max(epsilon, 1e-14) * std::max(tracker.scale(), 1.0);
        const double bound = std::max(10.0 * std::sqrt(static_cast<double>(Kc.cols())) * eps_eff, 1e-9 * std::max(tracker.scale(), 1.0));
        if (f.residual > bound) {
            throw Error("causal_factorize: row expansion residual exceeds the rank tolerance (inconsistent epsilon)");
        }
    } else {
        f.residual = Kc.data.size() > 0 ? Kc.data.cwiseAbs().maxCoeff() : 0.0;
    }
    return f;
}

// Structural causality test: encoder row k touches no measurement after
// times[k]; decoder column k feeds no input before times[k].  Exact zeros are
// required; the factorization writes them exactly.
inline bool verify_causality(const CausalFactorization& f) {
    for (int k = 0; k < f.band; ++k) {
        const int tk = f.times[k];
        for (Index col = (tk + 1) * f.n_y; col < f.E.cols(); ++col) {
            if (f.E(k, col) != 0.0) return false;
        }
        for (Index row = 0; row < tk * f.n_u; ++row) {
            if (f.D(row, k) != 0.0) return false;
        }
    }
    return true;
}

}  // namespace lrc
