#pragma once

#include <cstdint>

#include "lrc/errors.hpp"

namespace lrc {

// Knobs shared by the synthesis pipeline.  Defaults are the values used by the
// command-line tool and the drone benchmark.
struct SolverOptions {
    // Smoothing constant in the reweighting updates.
    double delta = 0.01;

    // Relative truncation threshold for numerical rank decisions and group
    // counting: singular values (or group norms) above epsilon times the
    // largest one are counted.
    double epsilon = 1e-3;

    // Upper bound on reweighting passes.  Iteration stops early once the
    // truncated rank (or active-group count) is unchanged for two passes and
    // the objective trace has stalled.
    int max_reweight_iters = 8;

    // Slack allowed when re-checking polytope containment on the rounded
    // controller.  First-order conic accuracy sets the useful scale.
    double feasibility_tol = 1e-4;

    // Seed for all randomized steps (noise draws, sampling).
    std::uint64_t seed = 1;

    // Interior conic-solver controls.
    double conic_eps = 1e-7;
    int conic_max_iters = 200000;
    bool verbose = false;

    // Reuse each pass's solution as the next pass's starting iterate.  Only
    // the objective changes between passes, so the previous optimum is an
    // excellent seed; disable to force cold starts.
    bool warm_start = true;

    // Tightening subtracted from the safe-set budgets during synthesis, so
    // the returned controller keeps nonnegative margins against the original
    // sets even after solver and truncation noise.
    double safety_margin = 1e-5;

    void validate() const;
};

inline void SolverOptions::validate() const {
    if (!(delta > 0.0)) throw Error("options: delta must be positive");
    if (!(epsilon >= 0.0)) throw Error("options: epsilon must be nonnegative");
    if (max_reweight_iters < 1) throw Error("options: at least one reweighting pass required");
    if (!(feasibility_tol > 0.0)) throw Error("options: feasibility tolerance must be positive");
    if (!(conic_eps > 0.0) || conic_max_iters < 1) throw Error("options: conic controls out of range");
    if (!(safety_margin >= 0.0)) throw Error("options: safety margin must be nonnegative");
}

}  // namespace lrc
