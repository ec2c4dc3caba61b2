#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lrc/affine_constraints.hpp"
#include "lrc/block_matrix.hpp"
#include "lrc/conic_solver.hpp"
#include "lrc/containment.hpp"
#include "lrc/errors.hpp"
#include "lrc/problem.hpp"
#include "lrc/sls.hpp"
#include "lrc/solver_options.hpp"
#include "lrc/types.hpp"

namespace lrc {

// Outcome of re-validating a rounded controller against the original sets.
struct FeasibilityReport {
    bool feasible = false;
    double worst_margin = 0.0;
    Vector margins;  // one slack per safe-set row
};

struct SynthesisResult {
    Objective objective = Objective::MessageRank;
    SystemResponse response;
    BlockLowerTriangular K;
    Vector singular_values;              // of the measurement-to-input map
    std::vector<double> objective_trace;  // value of each reweighted pass
    FarkasCertificate certificate;

    ConicStatus solver_status = ConicStatus::NumericalFailure;
    double eq_residual = 0.0;
    double ineq_violation = 0.0;
    int reweight_iterations = 0;
    long conic_iterations = 0;
    double solve_seconds = 0.0;

    int message_count = 0;
    std::vector<double> group_norms;  // per column/row for the norm objectives
    std::vector<int> pair_ranks;      // per channel for the multi-pair objective
};

namespace synth_detail {

struct BaseAssembly {
    LiftedOperators ops;
    ProductPolytope N, S;
    VariableLayout layout;
    AffineConstraintSet constraints;
    bool box_margin = false;  // margin rows instead of an explicit multiplier
};

// Channel sparsity for node-per-sensor plants: the measurement prediction fed
// back to sensor j1 may not depend on another sensor's noise, so every entry
// of [calC Phi_xy] pairing j1 with j2 != j2's own row is pinned to zero.
inline void append_cross_sensor_rows(const TimeVaryingLinearSystem& sys, const VariableLayout& layout, AffineConstraintSet& set) {
    for (int t = 0; t <= sys.T; ++t) {
        for (Index j1 = 0; j1 < sys.n_y; ++j1) {
            for (int tau = 0; tau <= t; ++tau) {
                for (Index j2 = 0; j2 < sys.n_y; ++j2) {
                    if (j1 == j2) continue;
                    const Index row = set.begin_eq_row(0.0);
                    for (Index k = 0; k < sys.n_x; ++k) {
                        set.eq_coeff(row, layout.xy(t * sys.n_x + k, tau * sys.n_y + j2), sys.C[static_cast<size_t>(t)](j1, k));
                    }
                    ++set.n_sparsity_rows;
                }
            }
        }
    }
}

inline BaseAssembly assemble_base(const SynthesisProblem& problem, bool cross_sensor) {
    problem.options.validate();
    problem.system.validate();
    problem.safety.validate(problem.system);

    BaseAssembly out;
    out.ops = lift(problem.system);
    auto ns = build_noise_and_safe_sets(problem.safety);
    out.N = std::move(ns.first);
    out.S = std::move(ns.second);
    out.box_margin = out.N.all_boxes() && out.S.all_boxes();
    if (out.box_margin) {
        out.layout = VariableLayout(problem.system.n_x, problem.system.n_u, problem.system.n_y, problem.system.T);
        out.constraints = assemble_sls_equalities(out.ops, out.layout);
        AffineConstraintSet margin = assemble_margin_constraints(out.N, out.S, out.layout);
        out.constraints.num_vars = margin.num_vars;
        out.constraints.append(margin);
    } else {
        out.layout = VariableLayout(problem.system.n_x, problem.system.n_u, problem.system.n_y, problem.system.T,
                                    out.S.rows(), out.N.rows());
        out.constraints = assemble_sls_equalities(out.ops, out.layout);
        out.constraints.append(assemble_farkas_constraints(out.N, out.S, out.layout));
    }
    // Budget rows sit first among the inequalities; pulling them in by the
    // safety margin absorbs solver and truncation noise in later rechecks.
    for (Index j = 0; j < out.S.rows(); ++j) out.constraints.ineq_rhs[static_cast<size_t>(j)] -= problem.options.safety_margin;
    if (cross_sensor) append_cross_sensor_rows(problem.system, out.layout, out.constraints);
    return out;
}

// Cone-form skeleton shared by every objective: equalities in the zero cone,
// the certificate inequalities in the nonnegative cone.  Objective-specific
// epigraph rows are appended behind these.
inline ConicProblem base_conic(const AffineConstraintSet& set) {
    ConicProblem P;
    P.num_vars = set.num_vars;
    P.cones.zero = set.eq_rows();
    P.cones.nonneg = set.ineq_rows();
    P.A = set.eq;
    P.A.reserve(set.eq.size() + set.ineq.size());
    for (const auto& t : set.ineq) {
        P.A.emplace_back(static_cast<int>(t.row() + set.eq_rows()), t.col(), t.value());
    }
    P.b = Vector(set.eq_rows() + set.ineq_rows());
    for (Index i = 0; i < set.eq_rows(); ++i) P.b(i) = set.eq_rhs[static_cast<size_t>(i)];
    for (Index i = 0; i < set.ineq_rows(); ++i) P.b(set.eq_rows() + i) = set.ineq_rhs[static_cast<size_t>(i)];
    return P;
}

inline Index packed_lower(Index d, Index i, Index j) { return j * d - j * (j - 1) / 2 + (i - j); }

// One weighted-trace epigraph.  The semidefinite block
//   [[P, Y], [Y', Q]] >= 0   with objective (tr(P W1^2) + tr(Q W2^2)) / 2
// bounds the weighted nuclear norm ||W1 Y W2||_*: a congruence by
// blkdiag(W1, W2) maps it to the standard epigraph of that norm.  The
// weights live only in the objective, so the constraint matrix, and with it
// the solver factorization, survives every reweighting pass.
struct Epigraph {
    Index m = 0, n = 0;          // Y dimensions
    Index pt = 0, qt = 0;        // offsets of the packed P and Q triangles
    std::vector<Index> y_vars;   // column-major variable ids of Y
};

inline Epigraph add_nuclear_epigraph(ConicProblem& P, Index m, Index n, std::vector<Index> y_vars) {
    Epigraph e;
    e.m = m;
    e.n = n;
    e.y_vars = std::move(y_vars);
    e.pt = P.num_vars;
    P.num_vars += svec_len(m);
    e.qt = P.num_vars;
    P.num_vars += svec_len(n);

    const Index d = m + n;
    const Index row0 = P.b.size();
    P.b.conservativeResize(row0 + svec_len(d));
    P.b.tail(svec_len(d)).setZero();
    P.cones.psd.push_back(d);

    const double rt2 = std::sqrt(2.0);
    Index row = row0;
    for (Index j = 0; j < d; ++j) {
        for (Index i = j; i < d; ++i, ++row) {
            const double sc = (i == j) ? 1.0 : rt2;
            if (i < m) {
                P.A.emplace_back(static_cast<int>(row), static_cast<int>(e.pt + packed_lower(m, i, j)), -sc);
            } else if (j >= m) {
                P.A.emplace_back(static_cast<int>(row), static_cast<int>(e.qt + packed_lower(n, i - m, j - m)), -sc);
            } else {
                P.A.emplace_back(static_cast<int>(row), static_cast<int>(e.y_vars[static_cast<size_t>((i - m) * m + j)]), -sc);
            }
        }
    }
    return e;
}

inline void epigraph_cost(Vector& c, const Epigraph& e, const Matrix& W1sq, const Matrix& W2sq) {
    for (Index j = 0; j < e.m; ++j) {
        for (Index i = j; i < e.m; ++i) c(e.pt + packed_lower(e.m, i, j)) = (i == j) ? 0.5 * W1sq(i, i) : W1sq(i, j);
    }
    for (Index j = 0; j < e.n; ++j) {
        for (Index i = j; i < e.n; ++i) c(e.qt + packed_lower(e.n, i, j)) = (i == j) ? 0.5 * W2sq(i, i) : W2sq(i, j);
    }
}

// Epigraph of a single euclidean group norm: t >= ||members||.
inline Index add_group_epigraph(ConicProblem& P, const std::vector<Index>& members) {
    const Index t_var = P.num_vars++;
    const Index row0 = P.b.size();
    const Index len = 1 + static_cast<Index>(members.size());
    P.cones.soc.push_back(len);
    P.b.conservativeResize(row0 + len);
    P.b.tail(len).setZero();
    P.A.emplace_back(static_cast<int>(row0), static_cast<int>(t_var), -1.0);
    for (size_t k = 0; k < members.size(); ++k) {
        P.A.emplace_back(static_cast<int>(row0 + 1 + static_cast<Index>(k)), static_cast<int>(members[k]), -1.0);
    }
    return t_var;
}

inline Matrix gather(const Vector& x, const std::vector<Index>& vars, Index m, Index n) {
    Matrix Y(m, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < m; ++i) Y(i, j) = x(vars[static_cast<size_t>(j * m + i)]);
    }
    return Y;
}

// Relative rank counting breaks down when the whole map is solver noise; a
// map indistinguishable from zero at the feasibility tolerance carries no
// messages.  Same guard for the group-norm counts.
inline int message_rank(const Matrix& Y, const SolverOptions& opt) {
    if (Y.size() == 0 || Y.cwiseAbs().maxCoeff() == 0.0) return 0;
    Eigen::JacobiSVD<Matrix> svd(Y);
    if (svd.singularValues()(0) <= opt.feasibility_tol) return 0;
    return tolerant_rank(Y, opt.epsilon);
}

inline int group_count(const Vector& norms, const SolverOptions& opt) {
    const double top = norms.size() > 0 ? norms.maxCoeff() : 0.0;
    if (top <= opt.feasibility_tol) return 0;
    int count = 0;
    for (Index l = 0; l < norms.size(); ++l) count += norms(l) > opt.epsilon * top ? 1 : 0;
    return count;
}

inline double nuclear_norm(const Matrix& M) { return Eigen::JacobiSVD<Matrix>(M).singularValues().sum(); }

// Value of an iterate under the weights it induces: each singular value
// enters as sigma / sqrt(sigma^2 + delta), each group norm as g / (g + delta).
// These are the quantities the reweighted scheme drives downhill, so they are
// what the objective trace records; the raw subproblem optima are computed
// against stale weights and may drift upward while the iterate wanders inside
// the optimal manifold.
inline double smoothed_rank(const Matrix& Y, double delta) {
    const Vector s = Eigen::JacobiSVD<Matrix>(Y).singularValues();
    double v = 0.0;
    for (Index i = 0; i < s.size(); ++i) v += s(i) / std::sqrt(s(i) * s(i) + delta);
    return v;
}

inline double smoothed_count(const Vector& norms, double delta) {
    double v = 0.0;
    for (Index l = 0; l < norms.size(); ++l) v += norms(l) / (norms(l) + delta);
    return v;
}

// An unchanged integer count alone is a weak convergence signal: the readout
// can plateau while singular values are still collapsing underneath it.
// Early exit therefore also requires the objective trace to have stalled.
inline bool trace_stalled(const std::vector<double>& trace) {
    if (trace.size() < 2) return false;
    const double prev = trace[trace.size() - 2];
    return std::abs(trace.back() - prev) <= 1e-3 * std::max(1.0, std::abs(prev));
}

// Each side carries a quarter inverse power of the Gram matrix, so the pair
// multiplies to the inverse square root and a singular value sigma enters the
// weighted objective as sigma / sqrt(sigma^2 + delta): flat for live
// directions, vanishing for dead ones.  A half power per side would square
// that penalty and break the monotone descent of the reweighted scheme.
inline void quarter_inverse(const Matrix& G, Matrix& W, Matrix& Wsq) {
    Eigen::SelfAdjointEigenSolver<Matrix> e(G);
    const Eigen::ArrayXd lam = e.eigenvalues().array().max(0.0);
    W = e.eigenvectors() * lam.pow(-0.25).matrix().asDiagonal() * e.eigenvectors().transpose();
    Wsq = e.eigenvectors() * lam.pow(-0.5).matrix().asDiagonal() * e.eigenvectors().transpose();
}

inline void update_weights(const Matrix& Y, double delta, Matrix& W1, Matrix& W1sq, Matrix& W2, Matrix& W2sq) {
    quarter_inverse(Y * Y.transpose() + delta * Matrix::Identity(Y.rows(), Y.rows()), W1, W1sq);
    quarter_inverse(Y.transpose() * Y + delta * Matrix::Identity(Y.cols(), Y.cols()), W2, W2sq);
}

inline ConicSettings conic_settings(const SolverOptions& opt) {
    ConicSettings cs;
    cs.eps = opt.conic_eps;
    cs.max_iters = opt.conic_max_iters;
    cs.verbose = opt.verbose;
    cs.warm_start = opt.warm_start;
    return cs;
}

inline void require_solved(const ConicSolution& sol, int pass) {
    if (sol.status == ConicStatus::Optimal) return;
    const std::string where = " (reweighting pass " + std::to_string(pass + 1) +
                              (sol.message.empty() ? std::string() : ": " + sol.message) + ")";
    if (sol.status == ConicStatus::PrimalInfeasible) {
        throw InfeasibleError("safety constraints admit no causal controller" + where);
    }
    throw SolverError(std::string("conic solve ended with status ") + to_string(sol.status) + where);
}

// Turns the final iterate into the returned controller package.  The solver
// leaves rounding noise on the structural zeros; those are exact by
// definition, so they are snapped before the controller is recovered.
inline void finalize(SynthesisResult& res, const SynthesisProblem& problem, const BaseAssembly& base,
                     const Vector& x, const ConicSolution& sol) {
    SystemResponse resp = unstack_response(base.layout, x);
    zero_strictly_upper(resp.phi_xx);
    zero_strictly_upper(resp.phi_xy);
    zero_strictly_upper(resp.phi_ux);
    zero_strictly_upper(resp.phi_uy);
    const Matrix lambda = base.box_margin ? box_certificate(base.N, base.S, extract_phi_tilde(resp))
                                          : unstack_lambda(base.layout, x);

    res.response = resp;
    res.K = controller_from_response(resp, std::max(1e-7, problem.options.feasibility_tol));
    res.certificate = FarkasCertificate{lambda};
    res.singular_values = singular_values(resp.phi_uy.data);
    res.solver_status = sol.status;
    // Below the noise floor the recovered gain is pure rounding; the zero
    // controller is the honest artifact and keeps factorization consistent
    // with the zero message count.
    if (res.singular_values.size() == 0 || res.singular_values(0) <= problem.options.feasibility_tol) {
        res.K.data.setZero();
    }

    Vector xc;
    if (base.box_margin) {
        // Auxiliary bound variables stay at their solver values; only the
        // response block is snapped.
        xc = x.head(base.constraints.num_vars);
        xc.head(base.layout.size()) = stack_variables(base.layout, resp);
    } else {
        xc = stack_variables(base.layout, resp, lambda);
    }
    res.eq_residual = base.constraints.eq_residual(xc);
    res.ineq_violation = base.constraints.ineq_violation(xc);
    if (res.eq_residual > problem.options.feasibility_tol || res.ineq_violation > problem.options.feasibility_tol) {
        throw SolverError("synthesized response violates the constraint set beyond tolerance (residual " +
                          std::to_string(std::max(res.eq_residual, res.ineq_violation)) + ")");
    }
}

}  // namespace synth_detail

// Minimum-message synthesis: reweighted nuclear-norm passes over the full
// measurement-to-input map, sharing one conic factorization.
inline SynthesisResult solve_min_rank(const SynthesisProblem& problem) {
    using namespace synth_detail;
    const auto t0 = std::chrono::steady_clock::now();
    const SolverOptions& opt = problem.options;
    BaseAssembly base = assemble_base(problem, false);

    ConicProblem P = base_conic(base.constraints);
    const Index m = base.layout.N_u(), n = base.layout.N_y();
    std::vector<Index> yv(static_cast<size_t>(m * n));
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < m; ++i) yv[static_cast<size_t>(j * m + i)] = base.layout.uy(i, j);
    }
    const Epigraph epi = add_nuclear_epigraph(P, m, n, std::move(yv));
    ConicSolver solver(P, conic_settings(opt));

    Matrix W1 = Matrix::Identity(m, m), W1sq = W1;
    Matrix W2 = Matrix::Identity(n, n), W2sq = W2;

    SynthesisResult res;
    res.objective = Objective::MessageRank;
    Vector x;
    ConicSolution sol;
    int prev_rank = -1, unchanged = 0;
    double best_obj = std::numeric_limits<double>::infinity();
    for (int k = 0; k < opt.max_reweight_iters; ++k) {
        Vector c = Vector::Zero(P.num_vars);
        epigraph_cost(c, epi, W1sq, W2sq);
        ConicSolution cand = solver.solve(c);
        require_solved(cand, k);
        res.conic_iterations += cand.iterations;
        const Matrix Y = gather(cand.x, epi.y_vars, m, n);
        const double obj = smoothed_rank(Y, opt.delta);
        // Inexact solves can wobble upward once converged; keeping the
        // incumbent preserves the descent property of the reweighted scheme.
        if (obj > best_obj) break;
        best_obj = obj;
        sol = std::move(cand);
        x = sol.x;
        res.objective_trace.push_back(obj);
        res.reweight_iterations = k + 1;

        const int rank = message_rank(Y, opt);
        unchanged = rank == prev_rank ? unchanged + 1 : 0;
        prev_rank = rank;
        if (unchanged >= 2 && trace_stalled(res.objective_trace)) break;
        if (k + 1 < opt.max_reweight_iters) update_weights(Y, opt.delta, W1, W1sq, W2, W2sq);
    }

    finalize(res, problem, base, x, sol);
    res.message_count = message_rank(res.response.phi_uy.data, opt);
    res.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

namespace synth_detail {

// Shared engine for the column (sensor) and row (actuator) sparsity
// baselines: reweighted sums of group norms with one second-order cone per
// group.
inline SynthesisResult solve_group_norm(const SynthesisProblem& problem, bool columns) {
    const auto t0 = std::chrono::steady_clock::now();
    const SolverOptions& opt = problem.options;
    BaseAssembly base = assemble_base(problem, false);

    ConicProblem P = base_conic(base.constraints);
    const Index m = base.layout.N_u(), n = base.layout.N_y();
    std::vector<Index> yv(static_cast<size_t>(m * n));
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < m; ++i) yv[static_cast<size_t>(j * m + i)] = base.layout.uy(i, j);
    }
    const Index n_groups = columns ? n : m;
    std::vector<Index> t_vars;
    t_vars.reserve(static_cast<size_t>(n_groups));
    for (Index l = 0; l < n_groups; ++l) {
        std::vector<Index> members;
        if (columns) {
            for (Index i = 0; i < m; ++i) members.push_back(base.layout.uy(i, l));
        } else {
            for (Index j = 0; j < n; ++j) members.push_back(base.layout.uy(l, j));
        }
        t_vars.push_back(add_group_epigraph(P, members));
    }
    ConicSolver solver(P, conic_settings(opt));

    Vector w = Vector::Ones(n_groups);
    SynthesisResult res;
    res.objective = columns ? Objective::SensorNorm : Objective::ActuatorNorm;
    Vector x, norms = Vector::Zero(n_groups);
    ConicSolution sol;
    int prev_count = -1, unchanged = 0;
    double best_obj = std::numeric_limits<double>::infinity();
    for (int k = 0; k < opt.max_reweight_iters; ++k) {
        Vector c = Vector::Zero(P.num_vars);
        for (Index l = 0; l < n_groups; ++l) c(t_vars[static_cast<size_t>(l)]) = w(l);
        ConicSolution cand = solver.solve(c);
        require_solved(cand, k);
        res.conic_iterations += cand.iterations;
        const Matrix Y = gather(cand.x, yv, m, n);
        Vector cand_norms(n_groups);
        for (Index l = 0; l < n_groups; ++l) cand_norms(l) = columns ? Y.col(l).norm() : Y.row(l).norm();
        const double obj = smoothed_count(cand_norms, opt.delta);
        if (obj > best_obj) break;
        best_obj = obj;
        sol = std::move(cand);
        x = sol.x;
        norms = cand_norms;
        res.objective_trace.push_back(obj);
        res.reweight_iterations = k + 1;

        const int count = group_count(norms, opt);
        unchanged = count == prev_count ? unchanged + 1 : 0;
        prev_count = count;
        if (unchanged >= 2 && trace_stalled(res.objective_trace)) break;
        if (k + 1 < opt.max_reweight_iters) {
            for (Index l = 0; l < n_groups; ++l) w(l) = 1.0 / (norms(l) + opt.delta);
        }
    }

    finalize(res, problem, base, x, sol);
    const Matrix& Yf = res.response.phi_uy.data;
    for (Index l = 0; l < n_groups; ++l) norms(l) = columns ? Yf.col(l).norm() : Yf.row(l).norm();
    res.group_norms.assign(norms.data(), norms.data() + norms.size());
    res.message_count = group_count(norms, opt);
    res.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace synth_detail

inline SynthesisResult solve_sensor_norm(const SynthesisProblem& problem) {
    return synth_detail::solve_group_norm(problem, true);
}

inline SynthesisResult solve_actuator_norm(const SynthesisProblem& problem) {
    return synth_detail::solve_group_norm(problem, false);
}

// Per-channel rank sum for node-per-sensor/actuator plants, with the
// cross-sensor sparsity pins active.  Each scalar channel gets its own
// weighted epigraph and its own reweighting state.
inline SynthesisResult solve_multi_pair_rank(const SynthesisProblem& problem) {
    using namespace synth_detail;
    const auto t0 = std::chrono::steady_clock::now();
    const SolverOptions& opt = problem.options;
    BaseAssembly base = assemble_base(problem, true);

    ConicProblem P = base_conic(base.constraints);
    const Index n_u = base.layout.n_u, n_y = base.layout.n_y;
    const Index side = base.layout.T + 1;
    std::vector<Epigraph> epis;
    epis.reserve(static_cast<size_t>(n_u * n_y));
    for (Index i = 0; i < n_u; ++i) {
        for (Index j = 0; j < n_y; ++j) {
            std::vector<Index> yv(static_cast<size_t>(side * side));
            for (Index tau = 0; tau < side; ++tau) {
                for (Index t = 0; t < side; ++t) yv[static_cast<size_t>(tau * side + t)] = base.layout.uy(t * n_u + i, tau * n_y + j);
            }
            epis.push_back(add_nuclear_epigraph(P, side, side, std::move(yv)));
        }
    }
    ConicSolver solver(P, conic_settings(opt));

    const size_t n_pairs = epis.size();
    std::vector<Matrix> W1(n_pairs, Matrix::Identity(side, side)), W1sq = W1, W2 = W1, W2sq = W1;

    SynthesisResult res;
    res.objective = Objective::MultiPairRank;
    Vector x;
    ConicSolution sol;
    std::vector<int> ranks(n_pairs, 0);
    int prev_total = -1, unchanged = 0;
    double best_obj = std::numeric_limits<double>::infinity();
    for (int k = 0; k < opt.max_reweight_iters; ++k) {
        Vector c = Vector::Zero(P.num_vars);
        for (size_t p = 0; p < n_pairs; ++p) epigraph_cost(c, epis[p], W1sq[p], W2sq[p]);
        ConicSolution cand = solver.solve(c);
        require_solved(cand, k);
        res.conic_iterations += cand.iterations;

        double trace = 0.0;
        int total = 0;
        for (size_t p = 0; p < n_pairs; ++p) {
            const Matrix Yp = gather(cand.x, epis[p].y_vars, side, side);
            trace += smoothed_rank(Yp, opt.delta);
            ranks[p] = message_rank(Yp, opt);
            total += ranks[p];
        }
        if (trace > best_obj) break;
        best_obj = trace;
        sol = std::move(cand);
        x = sol.x;
        res.objective_trace.push_back(trace);
        res.reweight_iterations = k + 1;
        unchanged = total == prev_total ? unchanged + 1 : 0;
        prev_total = total;
        if (unchanged >= 2 && trace_stalled(res.objective_trace)) break;
        if (k + 1 < opt.max_reweight_iters) {
            for (size_t p = 0; p < n_pairs; ++p) {
                const Matrix Yp = gather(x, epis[p].y_vars, side, side);
                update_weights(Yp, opt.delta, W1[p], W1sq[p], W2[p], W2sq[p]);
            }
        }
    }

    finalize(res, problem, base, x, sol);
    res.pair_ranks.clear();
    res.message_count = 0;
    for (Index i = 0; i < n_u; ++i) {
        for (Index j = 0; j < n_y; ++j) {
            const int r = message_rank(extract_pair_response(res.response.phi_uy, i, j), opt);
            res.pair_ranks.push_back(r);
            res.message_count += r;
        }
    }
    res.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

// Dispatch on the problem's requested objective.
inline SynthesisResult synthesize(const SynthesisProblem& problem) {
    switch (problem.objective) {
        case Objective::MessageRank: return solve_min_rank(problem);
        case Objective::SensorNorm: return solve_sensor_norm(problem);
        case Objective::ActuatorNorm: return solve_actuator_norm(problem);
        case Objective::MultiPairRank: return solve_multi_pair_rank(problem);
    }
    throw Error("unknown objective");
}

// Worst-case slack of each safe row for a fixed map, by linear programming
// over the noise product.  Used when a noise factor is not a box.
inline Vector containment_margins_lp(const ProductPolytope& N, const HPolytope& S, const Matrix& M,
                                     const ConicSettings& settings = {}) {
    if (M.rows() != S.dim() || M.cols() != N.dim()) throw DimensionError("containment lp: map dimensions mismatch");
    ConicProblem P;
    P.num_vars = N.dim();
    P.cones.nonneg = N.rows();
    P.b = N.h;
    P.c = Vector::Zero(P.num_vars);
    for (Index i = 0; i < N.rows(); ++i) {
        for (Index c = 0; c < N.dim(); ++c) {
            if (N.H(i, c) != 0.0) P.A.emplace_back(static_cast<int>(i), static_cast<int>(c), N.H(i, c));
        }
    }
    ConicSolver solver(P, settings);
    Vector margins(S.rows());
    for (Index j = 0; j < S.rows(); ++j) {
        const Vector g = (S.H.row(j) * M).transpose();
        const auto sol = solver.solve(-g);
        if (sol.status == ConicStatus::Optimal) {
            margins(j) = S.h(j) + sol.primal_obj;  // primal_obj = -max_j
        } else if (sol.status == ConicStatus::DualInfeasible) {
            margins(j) = -std::numeric_limits<double>::infinity();
        } else {
            throw SolverError(std::string("containment lp row failed: ") + to_string(sol.status));
        }
    }
    return margins;
}

// Validates a rounded controller against the original (untightened) sets by
// rebuilding its closed-loop map and measuring every safe-row slack.
inline FeasibilityReport recheck_feasibility(const BlockLowerTriangular& K_eps, const SynthesisProblem& problem) {
    problem.system.validate();
    problem.safety.validate(problem.system);
    const auto ops = lift(problem.system);
    const SystemResponse resp = response_from_controller(K_eps, ops);
    const Matrix pt = extract_phi_tilde(resp);
    const auto [N, S] = build_noise_and_safe_sets(problem.safety);

    FeasibilityReport rep;
    if (N.all_boxes()) {
        rep.margins = containment_margins(N, S.stacked(), pt);
    } else {
        rep.margins = containment_margins_lp(N, S.stacked(), pt, synth_detail::conic_settings(problem.options));
    }
    rep.worst_margin = rep.margins.minCoeff();
    rep.feasible = rep.worst_margin >= -1e-9;
    return rep;
}

}  // namespace lrc
