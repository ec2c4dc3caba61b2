#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lrc/errors.hpp"
#include "lrc/types.hpp"

namespace lrc {

// Cone of the slack vector s in A x + s = b, ordered: equality rows first
// (s = 0), then entrywise-nonnegative rows, then second-order blocks, then
// semidefinite blocks in packed symmetric (svec) form.
struct ConeSpec {
    Index zero = 0;
    Index nonneg = 0;
    std::vector<Index> soc;
    std::vector<Index> psd;  // matrix side lengths

    Index total() const {
        Index t = zero + nonneg;
        for (Index q : soc) t += q;
        for (Index d : psd) t += d * (d + 1) / 2;
        return t;
    }
};

inline Index svec_len(Index d) { return d * (d + 1) / 2; }

// Packed symmetric convention: lower triangle column-major with off-diagonal
// entries scaled by sqrt(2), so Euclidean inner products match trace inner
// products and the semidefinite cone is self-dual in packed coordinates.
inline void svec_to_matrix(const double* v, Matrix& S) {
    const Index d = S.rows();
    const double inv_rt2 = 1.0 / std::sqrt(2.0);
    Index k = 0;
    for (Index j = 0; j < d; ++j) {
        S(j, j) = v[k++];
        for (Index i = j + 1; i < d; ++i) {
            const double x = v[k++] * inv_rt2;
            S(i, j) = x;
            S(j, i) = x;
        }
    }
}

inline void matrix_to_svec(const Matrix& S, double* v) {
    const Index d = S.rows();
    const double rt2 = std::sqrt(2.0);
    Index k = 0;
    for (Index j = 0; j < d; ++j) {
        v[k++] = S(j, j);
        for (Index i = j + 1; i < d; ++i) v[k++] = S(i, j) * rt2;
    }
}

// min c'x  s.t.  A x + s = b,  s in K.
struct ConicProblem {
    Index num_vars = 0;
    std::vector<Eigen::Triplet<double>> A;
    Vector b;
    Vector c;
    ConeSpec cones;
};

enum class ConicStatus { Optimal, PrimalInfeasible, DualInfeasible, IterationLimit, NumericalFailure };

inline const char* to_string(ConicStatus s) {
    switch (s) {
        case ConicStatus::Optimal: return "optimal";
        case ConicStatus::PrimalInfeasible: return "primal_infeasible";
        case ConicStatus::DualInfeasible: return "dual_infeasible";
        case ConicStatus::IterationLimit: return "iteration_limit";
        case ConicStatus::NumericalFailure: return "numerical_failure";
    }
    return "?";
}

struct ConicSettings {
    double eps = 1e-7;
    double eps_infeasible = 1e-7;
    int max_iters = 200000;
    double alpha = 1.5;  // over-relaxation
    int check_interval = 25;
    int ruiz_iters = 10;
    bool verbose = false;
    bool warm_start = false;  // start from this instance's previous solution
    int anderson_memory = 8;  // 0 disables acceleration
    int anderson_start = 50;  // plain iterations before acceleration kicks in
    // Degenerate objectives can pin the duality gap at a conditioning floor
    // while the residuals sit far below it.  Once progress stalls, accept the
    // iterate under these relaxed bounds instead of spinning to the limit.
    double stall_feas = 2e-6;
    double stall_gap = 3e-5;
    int stall_checks = 25;       // residual checks without improvement
    long stall_min_evals = 2500; // never relax before this much work
};

struct ConicSolution {
    ConicStatus status = ConicStatus::NumericalFailure;
    Vector x, y, s;
    double primal_obj = 0.0, dual_obj = 0.0;
    double primal_res = 0.0, dual_res = 0.0, gap = 0.0;
    int iterations = 0;
    double solve_seconds = 0.0;
    std::string message;

    bool ok() const { return status == ConicStatus::Optimal; }
};

namespace conic_detail {

enum RowKind : char { kZero = 0, kNonneg = 1, kSoc = 2, kPsd = 3 };

inline std::vector<char> row_kinds(const ConeSpec& cones) {
    std::vector<char> kind;
    kind.reserve(cones.total());
    kind.insert(kind.end(), cones.zero, kZero);
    kind.insert(kind.end(), cones.nonneg, kNonneg);
    for (Index q : cones.soc) kind.insert(kind.end(), q, kSoc);
    for (Index d : cones.psd) kind.insert(kind.end(), svec_len(d), kPsd);
    return kind;
}

// Cone segment descriptors for the projection loop.
struct Segment {
    char kind;
    Index begin;
    Index size;  // rows for soc, matrix side for psd
};

inline std::vector<Segment> segments(const ConeSpec& cones) {
    std::vector<Segment> segs;
    Index at = cones.zero;
    if (cones.nonneg > 0) segs.push_back({kNonneg, at, cones.nonneg});
    at += cones.nonneg;
    for (Index q : cones.soc) {
        segs.push_back({kSoc, at, q});
        at += q;
    }
    for (Index d : cones.psd) {
        segs.push_back({kPsd, at, d});
        at += svec_len(d);
    }
    return segs;
}

// Projects the dual-cone part of the splitting iterate in place: equality
// rows are free, the rest are self-dual.
struct ConeProjector {
    std::vector<Segment> segs;
    std::vector<Matrix> work;
    std::vector<Eigen::SelfAdjointEigenSolver<Matrix>> eigs;

    explicit ConeProjector(const ConeSpec& cones) : segs(segments(cones)) {
        for (const auto& s : segs) {
            if (s.kind == kPsd) {
                work.emplace_back(s.size, s.size);
                eigs.emplace_back();
            }
        }
    }

    void project(Eigen::Ref<Vector> y) {
        Index psd_i = 0;
        for (const auto& s : segs) {
            if (s.kind == kNonneg) {
                y.segment(s.begin, s.size) = y.segment(s.begin, s.size).cwiseMax(0.0);
            } else if (s.kind == kSoc) {
                auto seg = y.segment(s.begin, s.size);
                const double t = seg(0);
                const double nz = s.size > 1 ? seg.tail(s.size - 1).norm() : 0.0;
                if (nz <= t) continue;
                if (nz <= -t) {
                    seg.setZero();
                } else {
                    const double a = 0.5 * (t + nz);
                    seg(0) = a;
                    seg.tail(s.size - 1) *= a / nz;
                }
            } else {  // kPsd
                Matrix& S = work[psd_i];
                svec_to_matrix(y.data() + s.begin, S);
                auto& eig = eigs[psd_i];
                eig.compute(S);
                const Vector lam = eig.eigenvalues().cwiseMax(0.0);
                S.noalias() = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
                matrix_to_svec(S, y.data() + s.begin);
                ++psd_i;
            }
        }
    }
};

}  // namespace conic_detail

// Homogeneous self-dual first-order solver.  Construction does everything
// that only depends on (A, b, K): singleton-pin presolve, Ruiz equilibration
// and the sparse LDLT of the quasidefinite system; solve(c) then runs
// Douglas-Rachford splitting.  Reweighted schemes call solve repeatedly with
// fresh objectives against the one factorization.
class ConicSolver {
  public:
    ConicSolver(const ConicProblem& P, const ConicSettings& settings = {}) : orig_(P), settings_(settings) {
        n0_ = P.num_vars;
        m0_ = P.b.size();
        if (P.cones.total() != m0_) throw DimensionError("conic: cone sizes do not match rows");
        A0_.resize(m0_, n0_);
        A0_.setFromTriplets(P.A.begin(), P.A.end());
        presolve();
        if (degenerate_infeasible_) return;
        n_ = red_.num_vars;
        m_ = red_.b.size();
        if (n_ == 0 || m_ == 0) return;
        equilibrate();
        factorize();
    }

    ConicSolution solve(const Vector& c_full) { return solve(c_full, settings_); }

    ConicSolution solve(const Vector& c_full, const ConicSettings& settings) {
        using namespace conic_detail;
        const auto t_start = std::chrono::steady_clock::now();
        if (c_full.size() != n0_) throw DimensionError("conic: objective length mismatch");
        ConicSolution out;
        out.x = Vector::Zero(n0_);
        out.y = Vector::Zero(m0_);
        out.s = Vector::Zero(m0_);
        auto finish = [&](ConicStatus st) {
            out.status = st;
            out.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
            return out;
        };
        if (degenerate_infeasible_) {
            out.message = presolve_message_;
            return finish(ConicStatus::PrimalInfeasible);
        }

        Vector cr = Vector::Zero(n_);
        for (Index j = 0; j < n0_; ++j) {
            if (var_map_[j] >= 0) cr(var_map_[j]) = c_full(j);
        }

        if (n_ == 0) {
            // Everything pinned; check the remaining cone rows directly.
            Vector s = red_.b;
            Vector sp = s;
            if (red_.cones.zero > 0) sp.head(red_.cones.zero).setZero();
            ConeProjector proj(red_.cones);
            if (m_ > red_.cones.zero) proj.project(sp);
            const double err = m_ > 0 ? (sp - s).cwiseAbs().maxCoeff() : 0.0;
            expand(out, c_full, Vector(), Vector::Zero(m_), s);
            if (err > 1e-9 * std::max(1.0, red_.b.size() > 0 ? red_.b.cwiseAbs().maxCoeff() : 0.0)) {
                out.message = "presolve pinned all variables outside the cone";
                return finish(ConicStatus::PrimalInfeasible);
            }
            return finish(ConicStatus::Optimal);
        }
        if (m_ == 0) {
            expand(out, c_full, Vector::Zero(n_), Vector(), Vector());
            if (cr.cwiseAbs().maxCoeff() > 0) {
                out.message = "unconstrained direction with nonzero objective";
                return finish(ConicStatus::DualInfeasible);
            }
            return finish(ConicStatus::Optimal);
        }

        const double cn = cr.cwiseQuotient(e_col_).norm();
        const double gamma = cn > 1e-12 ? 1.0 / cn : 1.0;
        const Vector c_bar = gamma * cr.cwiseQuotient(e_col_);

        Vector gh(n_ + m_);
        gh.head(n_) = c_bar;
        gh.tail(m_) = -b_bar_;
        const Vector g = ldlt_.solve(gh);
        const double denom = 1.0 + c_bar.dot(g.head(n_)) + b_bar_.dot(g.tail(m_));
        if (!(denom > 0) || !std::isfinite(denom)) {
            out.message = "degenerate embedding";
            return finish(ConicStatus::NumericalFailure);
        }

        const double cnorm = cr.norm();
        ConeProjector proj(red_.cones);
        const Index N = n_ + m_ + 1;
        Vector w(N), rhs(n_ + m_), p(n_ + m_), t_vec(N);

        // One splitting step on the embedding: affine projection through the
        // cached factorization, over-relaxation, cone projection, dual update.
        // Output buffers must not alias the inputs.
        auto dr_step = [&](const Eigen::Ref<const Vector>& uin, const Eigen::Ref<const Vector>& vin,
                           Eigen::Ref<Vector> uout, Eigen::Ref<Vector> vout) {
            w = uin + vin;
            rhs.head(n_) = w.head(n_);
            rhs.tail(m_) = -w.segment(n_, m_);
            p = ldlt_.solve(rhs);
            const double ztau = (w(N - 1) + c_bar.dot(p.head(n_)) + b_bar_.dot(p.tail(m_))) / denom;
            t_vec.head(n_ + m_) = p - ztau * g;
            t_vec(N - 1) = ztau;
            t_vec = settings.alpha * t_vec + (1.0 - settings.alpha) * uin;
            uout = t_vec - vin;
            proj.project(uout.segment(n_, m_));
            if (uout(N - 1) < 0.0) uout(N - 1) = 0.0;
            vout = vin + uout - t_vec;
        };

        // The loop state is the stacked pair z = (u, v) together with its
        // image under one step; acceleration extrapolates over this map.
        const Index ZN = 2 * N;
        auto apply_map = [&](const Vector& zin, Vector& zout) {
            dr_step(zin.head(N), zin.tail(N), zout.head(N), zout.tail(N));
        };

        Vector z = Vector::Zero(ZN);
        z(N - 1) = 1.0;
        z(ZN - 1) = 1.0;
        if (settings.warm_start && have_warm_) {
            z.head(n_) = sigma_ * warm_x_.cwiseProduct(e_col_);
            z.segment(n_, m_) = gamma * warm_y_.cwiseProduct(d_row_);
            z.segment(N + n_, m_) = sigma_ * warm_s_.cwiseQuotient(d_row_);
            z(ZN - 1) = 0.0;
        }
        const double z_norm0 = std::max(z.norm(), 1.0);

        const int mem = std::max(0, std::min(settings.anderson_memory, 64));
        Matrix aa_dz, aa_df, aa_gram;
        Vector aa_rhs, aa_gamma;
        if (mem > 0) {
            aa_dz.setZero(ZN, mem);
            aa_df.setZero(ZN, mem);
            aa_gram.setZero(mem, mem);
            aa_rhs.setZero(mem);
            aa_gamma.setZero(mem);
        }
        int aa_count = 0, aa_next = 0;
        auto aa_reset = [&]() {
            aa_count = 0;
            aa_next = 0;
            if (mem > 0) aa_gram.setZero();
        };

        Vector gz(ZN), fz(ZN), zc(ZN), gzc(ZN), fc(ZN), prev_z(ZN), prev_f(ZN);
        apply_map(z, gz);
        fz = gz - z;
        long evals = 1;
        long aa_accepts = 0;

        ConicStatus status = ConicStatus::IterationLimit;
        Vector xr = Vector::Zero(n_), yr = Vector::Zero(m_), sr = Vector::Zero(m_);
        double pres = -1, dres = -1, gap = -1;
        double best_score = std::numeric_limits<double>::infinity();
        int stale_checks = 0;
        long iter = 0;
        while (true) {
            const bool last = evals >= settings.max_iters;
            if (iter % settings.check_interval == 0 || last) {
                const double tau = gz(N - 1);
                const double kappa = gz(ZN - 1);
                bool done = false;
                if (tau > 1e-10) {
                    xr = gz.head(n_).cwiseQuotient(e_col_) / (sigma_ * tau);
                    yr = gz.segment(n_, m_).cwiseQuotient(d_row_) / (gamma * tau);
                    sr = gz.segment(N + n_, m_).cwiseProduct(d_row_) / (sigma_ * tau);
                    pres = (Ar_ * xr + sr - red_.b).norm() / (1.0 + bnorm_);
                    dres = (Ar_.transpose() * yr + cr).norm() / (1.0 + cnorm);
                    const double cx = cr.dot(xr), by = red_.b.dot(yr);
                    gap = std::abs(cx + by) / (1.0 + std::abs(cx) + std::abs(by));
                    if (settings.verbose && (iter % (settings.check_interval * 40) == 0 || last)) {
                        std::fprintf(stderr,
                                     "conic eval %6ld  pres %.2e  dres %.2e  gap %.2e  tau %.2e  accel %ld\n",
                                     evals, pres, dres, gap, tau, aa_accepts);
                    }
                    if (pres < settings.eps && dres < settings.eps && gap < settings.eps) {
                        status = ConicStatus::Optimal;
                        done = true;
                    }
                    const double score = std::max(pres, std::max(dres, gap));
                    if (score < 0.98 * best_score) {
                        best_score = score;
                        stale_checks = 0;
                    } else {
                        ++stale_checks;
                    }
                    if (!done && (stale_checks >= settings.stall_checks || last) &&
                        evals >= settings.stall_min_evals && pres < settings.stall_feas &&
                        dres < settings.stall_feas && gap < settings.stall_gap) {
                        status = ConicStatus::Optimal;
                        out.message = "residual progress stalled within relaxed tolerance";
                        done = true;
                    }
                }
                if (!done) {
                    Vector yc = gz.segment(n_, m_).cwiseQuotient(d_row_) / gamma;
                    const double by = red_.b.dot(yc);
                    if (by < -1e-12) {
                        const double r = (Ar_.transpose() * yc).norm() * std::max(bnorm_, 1.0) / (-by);
                        if (r < settings.eps_infeasible) {
                            yr = yc / (-by);
                            xr.setZero();
                            sr.setZero();
                            status = ConicStatus::PrimalInfeasible;
                            out.message = "primal infeasibility certificate found";
                            done = true;
                        }
                    }
                    if (!done) {
                        Vector xc = gz.head(n_).cwiseQuotient(e_col_) / sigma_;
                        Vector sc = gz.segment(N + n_, m_).cwiseProduct(d_row_) / sigma_;
                        const double cx = cr.dot(xc);
                        if (cx < -1e-12) {
                            const double r = (Ar_ * xc + sc).norm() * std::max(cnorm, 1.0) / (-cx);
                            if (r < settings.eps_infeasible) {
                                xr = xc / (-cx);
                                sr = sc / (-cx);
                                yr.setZero();
                                status = ConicStatus::DualInfeasible;
                                out.message = "unboundedness certificate found";
                                done = true;
                            }
                        }
                    }
                    if (!done && last && tau <= 1e-10 && kappa <= 1e-10) {
                        status = ConicStatus::NumericalFailure;
                        out.message = "embedding collapsed";
                        done = true;
                    }
                }
                if (done || last) break;
            }

            prev_z = z;
            prev_f = fz;
            bool advanced = false;
            if (aa_count > 0 && evals >= settings.anderson_start) {
                for (int j = 0; j < mem; ++j) aa_rhs(j) = j < aa_count ? aa_df.col(j).dot(fz) : 0.0;
                const double reg = 1e-10 * aa_gram.trace() + 1e-30;
                Matrix M = aa_gram;
                M.diagonal().array() += reg;
                aa_gamma = M.ldlt().solve(aa_rhs);
                if (aa_gamma.allFinite() && aa_gamma.norm() < 1e6) {
                    zc = gz;
                    zc.noalias() -= aa_dz * aa_gamma;
                    zc.noalias() -= aa_df * aa_gamma;
                    const double zcn = zc.norm();
                    // The embedding map is positively homogeneous, so zero is
                    // a spurious fixed point; judge candidates by residual
                    // relative to iterate size and refuse collapsed ones.
                    if (zcn > 1e-8 * z_norm0) {
                        apply_map(zc, gzc);
                        ++evals;
                        fc = gzc - zc;
                        if (fc.norm() * z.norm() <= fz.norm() * zcn) {
                            z.swap(zc);
                            gz.swap(gzc);
                            fz.swap(fc);
                            advanced = true;
                            ++aa_accepts;
                        } else {
                            aa_reset();
                        }
                    } else {
                        aa_reset();
                    }
                }
            }
            if (!advanced) {
                z.swap(gz);
                apply_map(z, gz);
                ++evals;
                fz = gz - z;
            }
            if (mem > 0) {
                aa_dz.col(aa_next) = z - prev_z;
                aa_df.col(aa_next) = fz - prev_f;
                aa_count = std::min(aa_count + 1, mem);
                for (int j = 0; j < aa_count; ++j) {
                    const double d = aa_df.col(aa_next).dot(aa_df.col(j));
                    aa_gram(aa_next, j) = d;
                    aa_gram(j, aa_next) = d;
                }
                aa_next = (aa_next + 1) % mem;
            }
            const double zn = z.norm();
            if (zn < 0.1 * z_norm0 || zn > 10.0 * z_norm0) {
                const double s = z_norm0 / zn;
                z *= s;
                gz *= s;
                fz *= s;
                aa_reset();
            }
            ++iter;
        }

        if (status == ConicStatus::Optimal || status == ConicStatus::IterationLimit) {
            warm_x_ = xr;
            warm_y_ = yr;
            warm_s_ = sr;
            have_warm_ = xr.allFinite() && yr.allFinite() && sr.allFinite();
        }
        expand(out, c_full, xr, yr, sr);
        out.primal_res = pres;
        out.dual_res = dres;
        out.gap = gap;
        out.iterations = static_cast<int>(std::min<long>(evals, settings.max_iters));
        return finish(status);
    }

    const ConicProblem& reduced() const { return red_; }

  private:
    void presolve() {
        using namespace conic_detail;
        const Index n = n0_, m = m0_;
        fixed_.assign(n, 0);
        fixed_value_.assign(n, 0.0);
        var_map_.assign(n, -1);
        row_map_.assign(m, -1);

        const std::vector<char> kind = row_kinds(orig_.cones);
        std::vector<std::vector<std::pair<Index, double>>> rows(m);
        for (const auto& t : orig_.A) {
            if (t.row() < 0 || t.row() >= m || t.col() < 0 || t.col() >= n) throw DimensionError("conic presolve: triplet out of range");
            rows[t.row()].emplace_back(t.col(), t.value());
        }
        std::vector<std::vector<Index>> col_rows(n);
        for (Index i = 0; i < m; ++i) {
            auto& r = rows[i];
            std::sort(r.begin(), r.end(), [](auto& a, auto& b) { return a.first < b.first; });
            std::vector<std::pair<Index, double>> merged;
            for (const auto& e : r) {
                if (!merged.empty() && merged.back().first == e.first) {
                    merged.back().second += e.second;
                } else {
                    merged.push_back(e);
                }
            }
            std::erase_if(merged, [](const auto& e) { return e.second == 0.0; });
            r = std::move(merged);
            for (const auto& e : r) col_rows[e.first].push_back(i);
        }

        Vector b = orig_.b;
        std::vector<Index> active_nnz(m);
        for (Index i = 0; i < m; ++i) active_nnz[i] = static_cast<Index>(rows[i].size());

        const double b_scale = m > 0 && orig_.b.size() > 0 ? std::max(1.0, orig_.b.cwiseAbs().maxCoeff()) : 1.0;
        const double drop_tol = 1e-9 * b_scale;
        constexpr double kMinPivot = 1e-11;

        auto live_entry = [&](Index i) -> std::pair<Index, double> {
            for (const auto& e : rows[i]) {
                if (!fixed_[e.first]) return e;
            }
            return {-1, 0.0};
        };

        std::vector<Index> stack;
        for (Index i = 0; i < m; ++i) {
            if (kind[i] == kZero && active_nnz[i] == 1) stack.push_back(i);
        }
        std::vector<char> row_done(m, 0);
        while (!stack.empty()) {
            const Index i = stack.back();
            stack.pop_back();
            if (row_done[i] || active_nnz[i] != 1) continue;
            const auto [j, a] = live_entry(i);
            if (j < 0 || std::abs(a) < kMinPivot) continue;
            row_done[i] = 1;
            fixed_[j] = 1;
            const double val = b(i) / a;
            fixed_value_[j] = val;
            for (Index r : col_rows[j]) {
                if (r == i || row_done[r]) continue;
                for (const auto& e : rows[r]) {
                    if (e.first == j) {
                        b(r) -= e.second * val;
                        break;
                    }
                }
                if (--active_nnz[r] == 1 && kind[r] == kZero) stack.push_back(r);
            }
            active_nnz[i] = 0;
        }

        std::vector<char> keep(m, 1);
        for (Index i = 0; i < m; ++i) {
            if (row_done[i]) {
                keep[i] = 0;
                continue;
            }
            Index live = 0;
            for (const auto& e : rows[i])
                if (!fixed_[e.first]) ++live;
            if (live > 0) continue;
            if (kind[i] == kZero) {
                if (std::abs(b(i)) > drop_tol) {
                    degenerate_infeasible_ = true;
                    presolve_message_ = "presolve: contradictory equality row " + std::to_string(i);
                    return;
                }
                keep[i] = 0;
            } else if (kind[i] == kNonneg) {
                if (b(i) < -drop_tol) {
                    degenerate_infeasible_ = true;
                    presolve_message_ = "presolve: contradictory sign row " + std::to_string(i);
                    return;
                }
                keep[i] = 0;
            }
        }

        Index nv = 0;
        for (Index j = 0; j < n; ++j) {
            if (!fixed_[j]) var_map_[j] = nv++;
        }
        Index nr = 0;
        for (Index i = 0; i < m; ++i) {
            if (keep[i]) row_map_[i] = nr++;
        }

        red_.num_vars = nv;
        red_.b = Vector(nr);
        red_.c = Vector::Zero(nv);
        for (Index i = 0; i < m; ++i) {
            if (row_map_[i] < 0) continue;
            red_.b(row_map_[i]) = b(i);
            for (const auto& e : rows[i]) {
                if (!fixed_[e.first]) {
                    red_.A.emplace_back(static_cast<int>(row_map_[i]), static_cast<int>(var_map_[e.first]), e.second);
                }
            }
        }
        red_.cones.zero = 0;
        red_.cones.nonneg = 0;
        for (Index i = 0; i < orig_.cones.zero; ++i) red_.cones.zero += keep[i];
        for (Index i = orig_.cones.zero; i < orig_.cones.zero + orig_.cones.nonneg; ++i) red_.cones.nonneg += keep[i];
        red_.cones.soc = orig_.cones.soc;
        red_.cones.psd = orig_.cones.psd;
    }

    void equilibrate() {
        using namespace conic_detail;
        At_ = red_.A;
        d_row_ = Vector::Ones(m_);
        e_col_ = Vector::Ones(n_);
        std::vector<Index> block_of(m_, -1);
        Index nblocks = 0;
        {
            const auto segs = segments(red_.cones);
            for (const auto& s : segs) {
                if (s.kind == kNonneg) continue;
                const Index len = s.kind == kSoc ? s.size : svec_len(s.size);
                for (Index i = 0; i < len; ++i) block_of[s.begin + i] = nblocks;
                ++nblocks;
            }
        }
        for (int pass = 0; pass < settings_.ruiz_iters; ++pass) {
            Vector rmax = Vector::Zero(m_), cmax = Vector::Zero(n_);
            for (const auto& t : At_) {
                const double a = std::abs(t.value());
                rmax(t.row()) = std::max(rmax(t.row()), a);
                cmax(t.col()) = std::max(cmax(t.col()), a);
            }
            std::vector<double> bmax(nblocks, 0.0);
            for (Index i = 0; i < m_; ++i) {
                if (block_of[i] >= 0) bmax[block_of[i]] = std::max(bmax[block_of[i]], rmax(i));
            }
            Vector rs(m_), cs(n_);
            for (Index i = 0; i < m_; ++i) {
                const double vmax = block_of[i] >= 0 ? bmax[block_of[i]] : rmax(i);
                rs(i) = vmax > 0 ? std::sqrt(vmax) : 1.0;
            }
            for (Index j = 0; j < n_; ++j) cs(j) = cmax(j) > 0 ? std::sqrt(cmax(j)) : 1.0;
            for (auto& t : At_) t = {t.row(), t.col(), t.value() / (rs(t.row()) * cs(t.col()))};
            d_row_.array() *= rs.array();
            e_col_.array() *= cs.array();
        }
        Vector b_hat = red_.b.cwiseQuotient(d_row_);
        const double bn = b_hat.norm();
        sigma_ = bn > 1e-12 ? 1.0 / bn : 1.0;
        b_bar_ = sigma_ * b_hat;
        Ar_.resize(m_, n_);
        Ar_.setFromTriplets(red_.A.begin(), red_.A.end());
        bnorm_ = red_.b.norm();
    }

    void factorize() {
        Eigen::SparseMatrix<double> M(n_ + m_, n_ + m_);
        std::vector<Eigen::Triplet<double>> mt;
        mt.reserve(At_.size() + n_ + m_);
        for (Index j = 0; j < n_; ++j) mt.emplace_back(static_cast<int>(j), static_cast<int>(j), 1.0);
        for (Index i = 0; i < m_; ++i) mt.emplace_back(static_cast<int>(n_ + i), static_cast<int>(n_ + i), -1.0);
        for (const auto& t : At_) mt.emplace_back(static_cast<int>(n_ + t.row()), t.col(), t.value());
        M.setFromTriplets(mt.begin(), mt.end());
        ldlt_.compute(M);
        if (ldlt_.info() != Eigen::Success) {
            throw SolverError("conic: LDLT factorization of the splitting system failed");
        }
    }

    void expand(ConicSolution& out, const Vector& c_full, const Vector& xr, const Vector& yr, const Vector& sr) const {
        for (Index j = 0; j < n0_; ++j) out.x(j) = fixed_[j] ? fixed_value_[j] : xr(var_map_[j]);
        const Vector Ax = A0_ * out.x;
        for (Index i = 0; i < m0_; ++i) {
            if (row_map_[i] >= 0) {
                out.y(i) = yr(row_map_[i]);
                out.s(i) = sr(row_map_[i]);
            } else {
                out.y(i) = 0.0;
                out.s(i) = orig_.b(i) - Ax(i);
            }
        }
        out.primal_obj = c_full.dot(out.x);
        out.dual_obj = -orig_.b.dot(out.y);
    }

    ConicProblem orig_;
    ConicSettings settings_;
    Eigen::SparseMatrix<double> A0_;
    Index n0_ = 0, m0_ = 0;

    // presolve output
    std::vector<char> fixed_;
    std::vector<double> fixed_value_;
    std::vector<Index> var_map_, row_map_;
    ConicProblem red_;
    bool degenerate_infeasible_ = false;
    std::string presolve_message_;

    // warm-start state from the previous solve of this instance
    bool have_warm_ = false;
    Vector warm_x_, warm_y_, warm_s_;

    // scaled iteration data
    Index n_ = 0, m_ = 0;
    std::vector<Eigen::Triplet<double>> At_;
    Vector d_row_, e_col_, b_bar_;
    double sigma_ = 1.0;
    Eigen::SparseMatrix<double> Ar_;
    double bnorm_ = 0.0;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
};

inline ConicSolution solve_conic(const ConicProblem& P, const ConicSettings& settings = {}) {
    ConicSolver solver(P, settings);
    return solver.solve(P.c, settings);
}

}  // namespace lrc
