#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "lrc/block_matrix.hpp"
#include "lrc/causal_factorization.hpp"
#include "lrc/errors.hpp"
#include "lrc/problem.hpp"
#include "lrc/types.hpp"

namespace lrc {

// Absolute tolerance for empirical safety margins, independent of the
// synthesis feasibility tolerance.
inline constexpr double kSafetyTol = 1e-6;

struct Message {
    int k = 0;       // message index
    int t = 0;       // send time
    double value = 0.0;
};

struct MessageLog {
    std::vector<Message> entries;
};

// What each node actually touched, for causality assertions: the encoder's
// latest measurement time per message, the decoder's latest message send
// time per input (or -1 when an input uses no messages).
struct AccessLog {
    std::vector<int> encode_horizon;
    std::vector<int> decode_horizon;
};

struct Trajectory {
    Matrix x;  // n_x x (T+1)
    Matrix u;  // n_u x (T+1); the last column is computed but never applied
    Matrix y;  // n_y x (T+1)
    Matrix w;  // n_x x T
    Matrix v;  // n_y x (T+1)
    MessageLog message_log;
    AccessLog access;
};

struct NoiseDraw {
    Vector x0;
    Matrix w;  // n_x x T
    Matrix v;  // n_y x (T+1); final column zero (it never reaches an applied input)
};

struct SafetyReport {
    bool pass = false;
    double worst_margin = 0.0;
    std::vector<double> state_margins;  // x_1 .. x_T
    std::vector<double> input_margins;  // u_0 .. u_{T-1}
};

enum class NoiseMode { Uniform, Vertex };

namespace sim_detail {

inline void check_rollout_dims(const TimeVaryingLinearSystem& sys, const Vector& x0, const Matrix& w, const Matrix& v) {
    if (x0.size() != sys.n_x) throw DimensionError("simulate: initial state dimension mismatch");
    if (w.rows() != sys.n_x || w.cols() != sys.T) throw DimensionError("simulate: process noise must be n_x x T");
    if (v.rows() != sys.n_y || v.cols() != sys.T + 1) throw DimensionError("simulate: measurement noise must be n_y x (T+1)");
}

inline void warn_if_outside(const SynthesisProblem& problem, const Vector& x0, const Matrix& w, const Matrix& v) {
    const auto& s = problem.safety;
    if (!s.X0.contains(x0, kSafetyTol)) std::cerr << "simulate: initial state outside its set\n";
    for (int t = 0; t < problem.system.T; ++t) {
        if (!s.W[static_cast<size_t>(t)].contains(w.col(t), kSafetyTol)) {
            std::cerr << "simulate: process noise outside its set at t=" << t << "\n";
            break;
        }
    }
    for (int t = 0; t < problem.system.T; ++t) {
        if (!s.V[static_cast<size_t>(t)].contains(v.col(t), kSafetyTol)) {
            std::cerr << "simulate: measurement noise outside its set at t=" << t << "\n";
            break;
        }
    }
}

// Shared plant stepping; the controller is a callback u_t = ctrl(t) reading
// the measurements produced so far.
template <typename Controller>
Trajectory rollout(const SynthesisProblem& problem, const Vector& x0, const Matrix& w, const Matrix& v, Controller&& ctrl) {
    const auto& sys = problem.system;
    const int T = sys.T;
    Trajectory traj;
    traj.x = Matrix::Zero(sys.n_x, T + 1);
    traj.u = Matrix::Zero(sys.n_u, T + 1);
    traj.y = Matrix::Zero(sys.n_y, T + 1);
    traj.w = w;
    traj.v = v;
    traj.x.col(0) = x0;
    for (int t = 0; t <= T; ++t) {
        traj.y.col(t) = sys.C[static_cast<size_t>(t)] * traj.x.col(t) + v.col(t);
        traj.u.col(t) = ctrl(t, traj);
        if (t < T) {
            traj.x.col(t + 1) = sys.A[static_cast<size_t>(t)] * traj.x.col(t) +
                                sys.B[static_cast<size_t>(t)] * traj.u.col(t) + w.col(t);
        }
    }
    return traj;
}

}  // namespace sim_detail

// Centralized rollout: the actuator sees every measurement and applies the
// full gain rows, u_t = sum_{tau <= t} K_(t,tau) y_tau.
inline Trajectory simulate_monolithic(const SynthesisProblem& problem, const BlockLowerTriangular& K, const Vector& x0,
                                      const Matrix& w, const Matrix& v) {
    problem.system.validate();
    sim_detail::check_rollout_dims(problem.system, x0, w, v);
    const auto& sys = problem.system;
    if (K.m != sys.n_u || K.n != sys.n_y || K.T != sys.T) throw DimensionError("simulate: gain grid mismatch");
    sim_detail::warn_if_outside(problem, x0, w, v);

    return sim_detail::rollout(problem, x0, w, v, [&](int t, const Trajectory& traj) {
        Vector u = Vector::Zero(sys.n_u);
        for (int tau = 0; tau <= t; ++tau) u += K.block(t, tau) * traj.y.col(tau);
        return u;
    });
}

// Two-node rollout: the sensor emits message k at time t_k from measurements
// up to t_k; the actuator combines delivered messages only.  Both nodes log
// what they read.
inline Trajectory simulate_distributed(const SynthesisProblem& problem, const CausalFactorization& f, const Vector& x0,
                                       const Matrix& w, const Matrix& v) {
    problem.system.validate();
    sim_detail::check_rollout_dims(problem.system, x0, w, v);
    const auto& sys = problem.system;
    if (f.n_u != sys.n_u || f.n_y != sys.n_y) throw DimensionError("simulate: factor block sizes mismatch");
    if (f.E.cols() != (sys.T + 1) * sys.n_y || f.D.rows() != (sys.T + 1) * sys.n_u) {
        throw DimensionError("simulate: factor horizon mismatch");
    }
    if (!verify_causality(f)) throw Error("simulate: factorization is not causal");
    sim_detail::warn_if_outside(problem, x0, w, v);

    std::vector<double> delivered(static_cast<size_t>(f.band), 0.0);
    std::vector<bool> sent(static_cast<size_t>(f.band), false);
    MessageLog log;
    AccessLog access;
    access.encode_horizon.assign(static_cast<size_t>(f.band), -1);
    access.decode_horizon.assign(static_cast<size_t>(sys.T) + 1, -1);

    Trajectory traj = sim_detail::rollout(problem, x0, w, v, [&](int t, const Trajectory& tr) {
        // Sensor node: emit every message scheduled for this instant.
        for (int k = 0; k < f.band; ++k) {
            if (f.times[static_cast<size_t>(k)] != t) continue;
            double m = 0.0;
            for (int tau = 0; tau <= t; ++tau) {
                m += f.E.row(k).segment(tau * sys.n_y, sys.n_y).dot(tr.y.col(tau));
                access.encode_horizon[static_cast<size_t>(k)] = tau;
            }
            delivered[static_cast<size_t>(k)] = m;
            sent[static_cast<size_t>(k)] = true;
            log.entries.push_back(Message{k, t, m});
        }
        // Actuator node: combine messages that have arrived by now.
        Vector u = Vector::Zero(sys.n_u);
        for (int k = 0; k < f.band; ++k) {
            if (f.times[static_cast<size_t>(k)] > t || !sent[static_cast<size_t>(k)]) continue;
            u += f.D.block(t * sys.n_u, k, sys.n_u, 1) * delivered[static_cast<size_t>(k)];
            access.decode_horizon[static_cast<size_t>(t)] =
                std::max(access.decode_horizon[static_cast<size_t>(t)], f.times[static_cast<size_t>(k)]);
        }
        return u;
    });
    traj.message_log = std::move(log);
    traj.access = std::move(access);
    return traj;
}

// Deterministic admissible noise draws.  Uniform mode samples every
// coordinate uniformly in its interval; vertex mode flips each coordinate to
// one of its endpoints.  Both need box sets.
inline std::vector<NoiseDraw> sample_noise(const SynthesisProblem& problem, NoiseMode mode, int count,
                                           std::uint64_t seed) {
    problem.system.validate();
    problem.safety.validate(problem.system);
    if (count < 0) throw DimensionError("sample_noise: negative count");
    const auto& s = problem.safety;
    const auto& sys = problem.system;
    if (!s.X0.is_box()) throw UnsupportedSetError("sample_noise: initial set is not a box");
    for (const auto& p : s.W)
        if (!p.is_box()) throw UnsupportedSetError("sample_noise: process noise set is not a box");
    for (const auto& p : s.V)
        if (!p.is_box()) throw UnsupportedSetError("sample_noise: measurement noise set is not a box");

    std::mt19937_64 rng(seed);
    auto uniform01 = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    auto coord = [&](double lo, double hi) {
        if (mode == NoiseMode::Vertex) return uniform01() < 0.5 ? lo : hi;
        return lo + uniform01() * (hi - lo);
    };
    auto fill = [&](const Box& b, auto&& sink) {
        for (Index i = 0; i < b.dim(); ++i) sink(i, coord(b.lower(i), b.upper(i)));
    };

    std::vector<NoiseDraw> draws;
    draws.reserve(static_cast<size_t>(count));
    for (int d = 0; d < count; ++d) {
        NoiseDraw nd;
        nd.x0 = Vector::Zero(sys.n_x);
        nd.w = Matrix::Zero(sys.n_x, sys.T);
        nd.v = Matrix::Zero(sys.n_y, sys.T + 1);
        fill(s.X0.box(), [&](Index i, double val) { nd.x0(i) = val; });
        for (int t = 0; t < sys.T; ++t) fill(s.W[static_cast<size_t>(t)].box(), [&](Index i, double val) { nd.w(i, t) = val; });
        for (int t = 0; t < sys.T; ++t) fill(s.V[static_cast<size_t>(t)].box(), [&](Index i, double val) { nd.v(i, t) = val; });
        draws.push_back(std::move(nd));
    }
    return draws;
}

// Per-time membership margins for the applied inputs and the visited states;
// the final computed input is never applied, so it is not checked.
inline SafetyReport check_safety(const SynthesisProblem& problem, const Trajectory& traj) {
    const auto& sys = problem.system;
    const auto& s = problem.safety;
    if (traj.x.rows() != sys.n_x || traj.x.cols() != sys.T + 1 || traj.u.rows() != sys.n_u) {
        throw DimensionError("check_safety: trajectory shape mismatch");
    }
    auto margin = [](const HPolytope& p, const Vector& q) { return (p.h - p.H * q).minCoeff(); };

    SafetyReport rep;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= sys.T; ++t) {
        const double m = margin(s.X[static_cast<size_t>(t) - 1], traj.x.col(t));
        rep.state_margins.push_back(m);
        rep.worst_margin = std::min(rep.worst_margin, m);
    }
    for (int t = 0; t < sys.T; ++t) {
        const double m = margin(s.U[static_cast<size_t>(t)], traj.u.col(t));
        rep.input_margins.push_back(m);
        rep.worst_margin = std::min(rep.worst_margin, m);
    }
    rep.pass = rep.worst_margin >= -kSafetyTol;
    return rep;
}

}  // namespace lrc
