#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lrc/errors.hpp"
#include "lrc/solver_options.hpp"
#include "lrc/types.hpp"

namespace lrc {

// Discrete-time plant x_{t+1} = A_t x_t + B_t u_t + w_t, y_t = C_t x_t + v_t
// over t = 0..T-1 (state updates) with measurements at t = 0..T.
struct TimeVaryingLinearSystem {
    int T = 0;
    Index n_x = 0, n_u = 0, n_y = 0;
    std::vector<Matrix> A;  // T entries, n_x x n_x
    std::vector<Matrix> B;  // T entries, n_x x n_u
    std::vector<Matrix> C;  // T+1 entries, n_y x n_x

    void validate() const {
        if (T < 1 || n_x < 1 || n_u < 1 || n_y < 1) {
            throw DimensionError("system: horizon and dimensions must be positive");
        }
        if (static_cast<int>(A.size()) != T || static_cast<int>(B.size()) != T || static_cast<int>(C.size()) != T + 1) {
            throw DimensionError("system: sequence lengths must be T, T, T+1");
        }
        for (const auto& M : A)
            if (M.rows() != n_x || M.cols() != n_x) throw DimensionError("system: A_t must be n_x x n_x");
        for (const auto& M : B)
            if (M.rows() != n_x || M.cols() != n_u) throw DimensionError("system: B_t must be n_x x n_u");
        for (const auto& M : C)
            if (M.rows() != n_y || M.cols() != n_x) throw DimensionError("system: C_t must be n_y x n_x");
    }
};

// Axis-aligned interval product.  Degenerate coordinates (lower == upper) are
// allowed; they pin the coordinate exactly.
struct Box {
    Vector lower;
    Vector upper;

    Box() = default;
    Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
        if (lower.size() != upper.size()) throw DimensionError("box: bound lengths differ");
        if (lower.size() == 0) throw EmptySetError("box: zero-dimensional");
        for (Index i = 0; i < lower.size(); ++i) {
            if (lower(i) > upper(i)) throw EmptySetError("box: lower exceeds upper");
        }
    }

    static Box centered(double half_width, Index dim) {
        return {Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width)};
    }

    Index dim() const { return lower.size(); }

    bool contains(const Vector& p, double tol = 0.0) const {
        return (p - lower).minCoeff() >= -tol && (upper - p).minCoeff() >= -tol;
    }
};

// H-representation {p | H p <= h}.  Boxes convert to stacked [I; -I] rows so
// that downstream code only ever sees one representation; the source box is
// kept alongside for samplers and the closed-form containment oracle.
struct HPolytope {
    Matrix H;
    Vector h;
    std::vector<Box> source_box;  // empty, or one element when built from a box

    HPolytope() = default;
    HPolytope(Matrix H_, Vector h_) : H(std::move(H_)), h(std::move(h_)) {
        if (H.rows() != h.size()) throw DimensionError("polytope: H rows and h length differ");
        if (H.rows() == 0 || H.cols() == 0) throw EmptySetError("polytope: no constraints or no dimensions");
    }

    static HPolytope from_box(const Box& b) {
        const Index d = b.dim();
        Matrix H(2 * d, d);
        H.topRows(d) = Matrix::Identity(d, d);
        H.bottomRows(d) = -Matrix::Identity(d, d);
        Vector h(2 * d);
        h.head(d) = b.upper;
        h.tail(d) = -b.lower;
        HPolytope p(std::move(H), std::move(h));
        p.source_box.push_back(b);
        return p;
    }

    Index dim() const { return H.cols(); }
    Index rows() const { return H.rows(); }
    bool is_box() const { return !source_box.empty(); }
    const Box& box() const {
        if (source_box.empty()) throw UnsupportedSetError("polytope: not backed by a box");
        return source_box.front();
    }

    bool contains(const Vector& p, double tol = 0.0) const {
        if (p.size() != dim()) throw DimensionError("polytope: point dimension mismatch");
        return ((H * p) - h).maxCoeff() <= tol;
    }
};

// Constraint sets for one synthesis instance.  X covers t = 1..T, U and W
// cover t = 0..T-1, V covers t = 0..T-1 (the final measurement noise never
// influences an applied input, so it carries no set).
struct SafetySpec {
    HPolytope X0;
    std::vector<HPolytope> X;
    std::vector<HPolytope> U;
    std::vector<HPolytope> W;
    std::vector<HPolytope> V;

    void validate(const TimeVaryingLinearSystem& sys) const {
        auto expect = [](const std::vector<HPolytope>& seq, std::size_t count, Index dim, const char* what) {
            if (seq.size() != count) throw DimensionError(std::string("safety: wrong sequence length for ") + what);
            for (const auto& p : seq) {
                if (p.dim() != dim) throw DimensionError(std::string("safety: wrong set dimension for ") + what);
            }
        };
        const auto Tz = static_cast<std::size_t>(sys.T);
        if (X0.dim() != sys.n_x) throw DimensionError("safety: X0 dimension mismatch");
        expect(X, Tz, sys.n_x, "X");
        expect(U, Tz, sys.n_u, "U");
        expect(W, Tz, sys.n_x, "W");
        expect(V, Tz, sys.n_y, "V");
    }
};

enum class Objective { MessageRank, SensorNorm, ActuatorNorm, MultiPairRank };

inline const char* objective_name(Objective o) {
    switch (o) {
        case Objective::MessageRank: return "rank";
        case Objective::SensorNorm: return "sensor";
        case Objective::ActuatorNorm: return "actuator";
        case Objective::MultiPairRank: return "multipair";
    }
    return "?";
}

struct SynthesisProblem {
    TimeVaryingLinearSystem system;
    SafetySpec safety;
    Objective objective = Objective::MessageRank;
    SolverOptions options;

    void validate() const {
        system.validate();
        safety.validate(system);
    }
};

// Waypoint-tracking double integrator on the plane, unit step, T = 20.  The
// exact discretization of planar p'' = u gives the half-step position coupling
// in B.  Positions are measured; the craft must pass [5,9]x[-9,-5] at t = 10
// and park in [5,9]^2 at t = 20 while inputs stay in [-2,2]^2.
inline SynthesisProblem drone_benchmark_problem(int horizon = 20) {
    if (horizon < 2) throw DimensionError("drone benchmark: horizon must be at least 2");
    SynthesisProblem p;
    auto& sys = p.system;
    sys.T = horizon;
    sys.n_x = 4;
    sys.n_u = 2;
    sys.n_y = 2;
    Matrix A(4, 4), B(4, 2), C(2, 4);
    A << 1, 0, 1, 0,
         0, 1, 0, 1,
         0, 0, 1, 0,
         0, 0, 0, 1;
    B << 0.5, 0,
         0, 0.5,
         1, 0,
         0, 1;
    C << 1, 0, 0, 0,
         0, 1, 0, 0;
    sys.A.assign(horizon, A);
    sys.B.assign(horizon, B);
    sys.C.assign(horizon + 1, C);

    // Waypoint centers scale with the horizon so shortened runs travel at the
    // same average speed; box widths, velocity, input and noise bounds stay
    // fixed so the noise headroom does not shrink with the horizon.
    const double f = static_cast<double>(horizon) / 20.0;
    const int t_way = horizon / 2;

    auto box4 = [](double px_lo, double px_hi, double py_lo, double py_hi, double v_lo, double v_hi) {
        Vector lo(4), hi(4);
        lo << px_lo, py_lo, v_lo, v_lo;
        hi << px_hi, py_hi, v_hi, v_hi;
        return HPolytope::from_box(Box(lo, hi));
    };

    p.safety.X0 = box4(-7 * f - 1, -7 * f + 1, -7 * f - 1, -7 * f + 1, 0, 0);
    for (int t = 1; t <= horizon; ++t) {
        if (t == t_way) {
            p.safety.X.push_back(box4(7 * f - 2, 7 * f + 2, -7 * f - 2, -7 * f + 2, -2, 2));
        } else if (t == horizon) {
            p.safety.X.push_back(box4(7 * f - 2, 7 * f + 2, 7 * f - 2, 7 * f + 2, -1, 1));
        } else {
            p.safety.X.push_back(box4(-10 * std::max(f, 1.0), 10 * std::max(f, 1.0), -10 * std::max(f, 1.0),
                                      10 * std::max(f, 1.0), -2, 2));
        }
    }
    for (int t = 0; t < horizon; ++t) {
        p.safety.U.push_back(HPolytope::from_box(Box::centered(2.0, 2)));
        p.safety.W.push_back(HPolytope::from_box(Box::centered(0.05, 4)));
        p.safety.V.push_back(HPolytope::from_box(Box::centered(0.05, 2)));
    }
    p.validate();
    return p;
}

}  // namespace lrc
