#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <utility>
#include <vector>

#include "lrc/affine_constraints.hpp"
#include "lrc/errors.hpp"
#include "lrc/problem.hpp"
#include "lrc/types.hpp"

namespace lrc {

// Cartesian product of H-polytopes with the stacked representation cached:
// H is block-diagonal over the factors, h is the concatenation.
struct ProductPolytope {
    std::vector<HPolytope> factors;
    Matrix H;
    Vector h;

    ProductPolytope() = default;

    explicit ProductPolytope(std::vector<HPolytope> fs) : factors(std::move(fs)) {
        if (factors.empty()) throw EmptySetError("product polytope: no factors");
        Index rows = 0, cols = 0;
        for (const auto& f : factors) {
            rows += f.rows();
            cols += f.dim();
        }
        H = Matrix::Zero(rows, cols);
        h = Vector(rows);
        Index r0 = 0, c0 = 0;
        for (const auto& f : factors) {
            H.block(r0, c0, f.rows(), f.dim()) = f.H;
            h.segment(r0, f.rows()) = f.h;
            r0 += f.rows();
            c0 += f.dim();
        }
    }

    Index dim() const { return H.cols(); }
    Index rows() const { return H.rows(); }

    HPolytope stacked() const { return HPolytope(H, h); }

    bool all_boxes() const {
        return std::all_of(factors.begin(), factors.end(), [](const HPolytope& f) { return f.is_box(); });
    }

    // Concatenated interval bounds; only valid when every factor is a box.
    std::pair<Vector, Vector> box_bounds() const {
        Vector lo(dim()), hi(dim());
        Index c0 = 0;
        for (const auto& f : factors) {
            const Box& b = f.box();  // throws UnsupportedSetError otherwise
            lo.segment(c0, b.dim()) = b.lower;
            hi.segment(c0, b.dim()) = b.upper;
            c0 += b.dim();
        }
        return {lo, hi};
    }
};

// Nonnegative multiplier matrix witnessing M N <= S row by row.
struct FarkasCertificate {
    Matrix Lambda;

    double min_entry() const { return Lambda.size() > 0 ? Lambda.minCoeff() : 0.0; }
    double equality_residual(const ProductPolytope& N, const ProductPolytope& S, const Matrix& phi_tilde) const {
        return (Lambda * N.H - S.H * phi_tilde).cwiseAbs().maxCoeff();
    }
    double budget_violation(const ProductPolytope& N, const ProductPolytope& S) const {
        return std::max(0.0, (Lambda * N.h - S.h).maxCoeff());
    }
};

// Noise product (initial set, process noise, measurement noise) and safe
// product (states after step 0, inputs before the final step), ordered to
// match the constrained response map's columns and rows.
inline std::pair<ProductPolytope, ProductPolytope> build_noise_and_safe_sets(const SafetySpec& safety) {
    std::vector<HPolytope> noise;
    noise.reserve(1 + safety.W.size() + safety.V.size());
    noise.push_back(safety.X0);
    noise.insert(noise.end(), safety.W.begin(), safety.W.end());
    noise.insert(noise.end(), safety.V.begin(), safety.V.end());
    std::vector<HPolytope> safe;
    safe.reserve(safety.X.size() + safety.U.size());
    safe.insert(safe.end(), safety.X.begin(), safety.X.end());
    safe.insert(safe.end(), safety.U.begin(), safety.U.end());
    return {ProductPolytope(std::move(noise)), ProductPolytope(std::move(safe))};
}

// Linear conditions making Lambda certify containment of the noise image:
//   Lambda >= 0,  Lambda H_N = H_S PhiTilde,  Lambda h_N <= h_S.
// Rows are grouped: coupling equalities first, then the budget rows, then the
// entrywise sign rows.  Both H factors are block-diagonal, which keeps each
// equality short.
inline AffineConstraintSet assemble_farkas_constraints(const ProductPolytope& N, const ProductPolytope& S, const VariableLayout& layout) {
    if (layout.lambda_rows != S.rows() || layout.lambda_cols != N.rows()) {
        throw DimensionError("assemble_farkas_constraints: layout certificate shape mismatch");
    }
    const Index state_rows = layout.T * layout.n_x;
    const Index input_rows = layout.T * layout.n_u;
    if (S.dim() != state_rows + input_rows) throw DimensionError("assemble_farkas_constraints: safe set dimension mismatch");
    if (N.dim() != layout.N_x() + layout.T * layout.n_y) throw DimensionError("assemble_farkas_constraints: noise set dimension mismatch");

    AffineConstraintSet set;
    set.num_vars = layout.size();

    // Nonzero structure of the block-diagonal factors, by column / by row.
    std::vector<Index> n_row_begin(N.rows()), n_col_begin(N.dim()), n_col_count(N.dim());
    {
        Index r0 = 0, c0 = 0;
        for (const auto& f : N.factors) {
            for (Index c = 0; c < f.dim(); ++c) {
                n_col_begin[c0 + c] = r0;
                n_col_count[c0 + c] = f.rows();
            }
            for (Index r = 0; r < f.rows(); ++r) n_row_begin[r0 + r] = c0;
            r0 += f.rows();
            c0 += f.dim();
        }
    }
    std::vector<Index> s_row_begin(S.rows()), s_row_count(S.rows());
    {
        Index r0 = 0, c0 = 0;
        for (const auto& f : S.factors) {
            for (Index r = 0; r < f.rows(); ++r) {
                s_row_begin[r0 + r] = c0;
                s_row_count[r0 + r] = f.dim();
            }
            r0 += f.rows();
            c0 += f.dim();
        }
    }

    // Coupling: for every certificate row j and noise coordinate c,
    //   sum_i Lambda(j,i) H_N(i,c) - sum_r H_S(j,r) PhiTilde(r,c) = 0.
    for (Index j = 0; j < S.rows(); ++j) {
        for (Index c = 0; c < N.dim(); ++c) {
            const Index row = set.begin_eq_row(0.0);
            for (Index i = n_col_begin[c]; i < n_col_begin[c] + n_col_count[c]; ++i) {
                set.eq_coeff(row, layout.lambda(j, i), N.H(i, c));
            }
            for (Index r = s_row_begin[j]; r < s_row_begin[j] + s_row_count[j]; ++r) {
                set.eq_coeff(row, layout.phi_tilde(r, c), -S.H(j, r));
            }
            ++set.n_coupling_rows;
        }
    }

    // Budget rows: Lambda h_N <= h_S.
    for (Index j = 0; j < S.rows(); ++j) {
        const Index row = set.begin_ineq_row(S.h(j));
        for (Index i = 0; i < N.rows(); ++i) set.ineq_coeff(row, layout.lambda(j, i), N.h(i));
    }

    // Sign rows: -Lambda(j,i) <= 0.
    for (Index i = 0; i < N.rows(); ++i) {
        for (Index j = 0; j < S.rows(); ++j) {
            const Index row = set.begin_ineq_row(0.0);
            set.ineq_coeff(row, layout.lambda(j, i), -1.0);
        }
    }
    return set;
}

// Box fast path for the containment rows.  When every factor on both sides
// is a box, row j of H_S is +-e_r and the worst case of the mapped noise
// splits into a center term plus radius-weighted absolute values of row r of
// the response map.  Auxiliary bounds on those absolute values replace the
// multiplier matrix entirely: the variable count drops by the multiplier
// block and the wide budget rows collapse into chunked partial sums, which
// keeps the sparse factorization lean.  box_certificate recovers the
// multiplier the dropped rows would have produced.
//
// Emitted over [layout phi block | aux], budget inequalities first (one per
// safe row, in safe row order), then the absolute-value rows.
inline AffineConstraintSet assemble_margin_constraints(const ProductPolytope& N, const ProductPolytope& S,
                                                       const VariableLayout& layout) {
    if (!N.all_boxes() || !S.all_boxes()) throw UnsupportedSetError("margin assembly requires box factors");
    if (layout.lambda_rows != 0 || layout.lambda_cols != 0) {
        throw DimensionError("margin assembly: layout must not carry a certificate block");
    }
    const Index state_rows = layout.T * layout.n_x;
    const Index input_rows = layout.T * layout.n_u;
    if (S.dim() != state_rows + input_rows) throw DimensionError("margin assembly: safe set dimension mismatch");
    if (N.dim() != layout.N_x() + layout.T * layout.n_y) throw DimensionError("margin assembly: noise set dimension mismatch");

    const auto [lo, hi] = N.box_bounds();
    const Vector mu = 0.5 * (lo + hi);
    const Vector rho = 0.5 * (hi - lo);
    const Index D = N.dim(), R = S.dim();
    constexpr Index kChunk = 8;
    const Index n_chunks = (D + kChunk - 1) / kChunk;

    AffineConstraintSet set;
    Index next = layout.size();
    // Per response row r: |phi| bounds t(r,c), one center partial sum and one
    // radius partial sum per chunk of noise coordinates.
    std::vector<Index> t_var(static_cast<size_t>(R * D), -1);
    std::vector<Index> mu_var(static_cast<size_t>(R * n_chunks), -1);
    std::vector<Index> rho_var(static_cast<size_t>(R * n_chunks), -1);
    for (Index r = 0; r < R; ++r) {
        for (Index k = 0; k < n_chunks; ++k) {
            const Index c_end = std::min(D, (k + 1) * kChunk);
            bool any_mu = false, any_rho = false;
            for (Index c = k * kChunk; c < c_end; ++c) {
                if (mu(c) != 0.0) any_mu = true;
                if (rho(c) > 0.0) {
                    any_rho = true;
                    t_var[static_cast<size_t>(r * D + c)] = next++;
                }
            }
            if (any_mu) mu_var[static_cast<size_t>(r * n_chunks + k)] = next++;
            if (any_rho) rho_var[static_cast<size_t>(r * n_chunks + k)] = next++;
        }
    }
    set.num_vars = next;

    for (Index r = 0; r < R; ++r) {
        for (Index k = 0; k < n_chunks; ++k) {
            const Index c_end = std::min(D, (k + 1) * kChunk);
            const Index mv = mu_var[static_cast<size_t>(r * n_chunks + k)];
            if (mv >= 0) {
                const Index row = set.begin_eq_row(0.0);
                set.eq_coeff(row, mv, 1.0);
                for (Index c = k * kChunk; c < c_end; ++c) set.eq_coeff(row, layout.phi_tilde(r, c), -mu(c));
                ++set.n_coupling_rows;
            }
            const Index rv = rho_var[static_cast<size_t>(r * n_chunks + k)];
            if (rv >= 0) {
                const Index row = set.begin_eq_row(0.0);
                set.eq_coeff(row, rv, 1.0);
                for (Index c = k * kChunk; c < c_end; ++c) {
                    const Index tv = t_var[static_cast<size_t>(r * D + c)];
                    if (tv >= 0) set.eq_coeff(row, tv, -rho(c));
                }
                ++set.n_coupling_rows;
            }
        }
    }

    // Budget rows in safe row order: s * center + radius sum <= h_S(j).
    Index r0 = 0, c0 = 0;
    for (const auto& f : S.factors) {
        const Index d = f.dim();
        for (Index half = 0; half < 2; ++half) {
            const double s = half == 0 ? 1.0 : -1.0;
            for (Index kk = 0; kk < d; ++kk) {
                const Index j = r0 + half * d + kk;
                const Index r = c0 + kk;
                const Index row = set.begin_ineq_row(S.h(j));
                for (Index k = 0; k < n_chunks; ++k) {
                    const Index mv = mu_var[static_cast<size_t>(r * n_chunks + k)];
                    if (mv >= 0) set.ineq_coeff(row, mv, s);
                    const Index rv = rho_var[static_cast<size_t>(r * n_chunks + k)];
                    if (rv >= 0) set.ineq_coeff(row, rv, 1.0);
                }
            }
        }
        r0 += f.rows();
        c0 += d;
    }

    // Absolute-value rows: +-phi(r,c) - t(r,c) <= 0.
    for (Index r = 0; r < R; ++r) {
        for (Index c = 0; c < D; ++c) {
            const Index tv = t_var[static_cast<size_t>(r * D + c)];
            if (tv < 0) continue;
            const Index pv = layout.phi_tilde(r, c);
            Index row = set.begin_ineq_row(0.0);
            set.ineq_coeff(row, pv, 1.0);
            set.ineq_coeff(row, tv, -1.0);
            row = set.begin_ineq_row(0.0);
            set.ineq_coeff(row, pv, -1.0);
            set.ineq_coeff(row, tv, -1.0);
        }
    }
    return set;
}

// Closed-form multiplier for box-against-box containment: row j of H_S is
// s e_r, so the positive and negative parts of s PhiTilde(r, .) placed on the
// matching upper/lower noise rows satisfy Lambda H_N = H_S PhiTilde with
// Lambda >= 0, and Lambda h_N equals the margin form's left-hand side.
inline Matrix box_certificate(const ProductPolytope& N, const ProductPolytope& S, const Matrix& phi_tilde) {
    if (!N.all_boxes() || !S.all_boxes()) throw UnsupportedSetError("box certificate requires box factors");
    if (phi_tilde.rows() != S.dim() || phi_tilde.cols() != N.dim()) {
        throw DimensionError("box certificate: map dimensions mismatch");
    }
    std::vector<Index> pos(static_cast<size_t>(N.dim())), neg(static_cast<size_t>(N.dim()));
    {
        Index r0 = 0, c0 = 0;
        for (const auto& f : N.factors) {
            const Index d = f.dim();
            for (Index k = 0; k < d; ++k) {
                pos[static_cast<size_t>(c0 + k)] = r0 + k;
                neg[static_cast<size_t>(c0 + k)] = r0 + d + k;
            }
            r0 += f.rows();
            c0 += d;
        }
    }
    Matrix L = Matrix::Zero(S.rows(), N.rows());
    Index r0 = 0, c0 = 0;
    for (const auto& f : S.factors) {
        const Index d = f.dim();
        for (Index k = 0; k < d; ++k) {
            const Index r = c0 + k;
            for (Index c = 0; c < N.dim(); ++c) {
                const double g = phi_tilde(r, c);
                if (g > 0) {
                    L(r0 + k, pos[static_cast<size_t>(c)]) = g;
                    L(r0 + d + k, neg[static_cast<size_t>(c)]) = g;
                } else if (g < 0) {
                    L(r0 + k, neg[static_cast<size_t>(c)]) = -g;
                    L(r0 + d + k, pos[static_cast<size_t>(c)]) = -g;
                }
            }
        }
        r0 += f.rows();
        c0 += d;
    }
    return L;
}

// Worst-case slack of each safe-set row over the noise box: entry j is
// h_S(j) - max_{p in N} (H_S M p)_j, via the sign-split closed form.
inline Vector containment_margins(const ProductPolytope& N, const HPolytope& S, const Matrix& M) {
    if (M.rows() != S.dim() || M.cols() != N.dim()) throw DimensionError("containment: map dimensions mismatch");
    const auto [lo, hi] = N.box_bounds();
    Vector margins(S.rows());
    for (Index j = 0; j < S.rows(); ++j) {
        const Vector g = (S.H.row(j) * M).transpose();
        double worst = 0.0;
        for (Index c = 0; c < g.size(); ++c) worst += g(c) > 0 ? g(c) * hi(c) : g(c) * lo(c);
        margins(j) = S.h(j) - worst;
    }
    return margins;
}

// Exact containment of M N inside S for box products N.
inline bool containment_oracle(const ProductPolytope& N, const HPolytope& S, const Matrix& M) {
    return containment_margins(N, S, M).minCoeff() >= 0.0;
}

}  // namespace lrc
