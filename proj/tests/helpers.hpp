#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "lrc/block_matrix.hpp"
#include "lrc/causal_factorization.hpp"
#include "lrc/problem.hpp"
#include "lrc/types.hpp"

namespace testutil {

using Rng = std::mt19937_64;

inline double entry(Rng& rng) { return lrc::uniform_in(rng, -1.0, 1.0); }

inline lrc::Matrix random_matrix(Rng& rng, lrc::Index rows, lrc::Index cols) {
    lrc::Matrix M(rows, cols);
    for (lrc::Index j = 0; j < cols; ++j)
        for (lrc::Index i = 0; i < rows; ++i) M(i, j) = entry(rng);
    return M;
}

inline lrc::BlockLowerTriangular random_blt(Rng& rng, lrc::Index m, lrc::Index n, int T) {
    auto K = lrc::BlockLowerTriangular::zero(m, n, T);
    for (int t = 0; t <= T; ++t)
        for (int tau = 0; tau <= t; ++tau) K.block(t, tau) = random_matrix(rng, m, n);
    return K;
}

// Builds K = D0 E0 with prescribed band and sorted random send times, so the
// structural rank of the product is known by construction.
inline lrc::BlockLowerTriangular random_blt_with_rank(Rng& rng, lrc::Index m, lrc::Index n, int T, int r) {
    const lrc::Index rows = m * (T + 1), cols = n * (T + 1);
    std::vector<int> times(r);
    for (int k = 0; k < r; ++k) times[k] = static_cast<int>(rng() % (T + 1));
    std::sort(times.begin(), times.end());
    lrc::Matrix D = lrc::Matrix::Zero(rows, r), E = lrc::Matrix::Zero(r, cols);
    for (int k = 0; k < r; ++k) {
        for (lrc::Index c = 0; c < (times[k] + 1) * n; ++c) E(k, c) = entry(rng);
        for (lrc::Index i = times[k] * m; i < rows; ++i) D(i, k) = entry(rng);
    }
    return {D * E, m, n};
}

inline lrc::TimeVaryingLinearSystem random_system(Rng& rng, lrc::Index n_x, lrc::Index n_u, lrc::Index n_y, int T) {
    lrc::TimeVaryingLinearSystem sys;
    sys.T = T;
    sys.n_x = n_x;
    sys.n_u = n_u;
    sys.n_y = n_y;
    for (int t = 0; t < T; ++t) {
        sys.A.push_back(random_matrix(rng, n_x, n_x));
        sys.B.push_back(random_matrix(rng, n_x, n_u));
    }
    for (int t = 0; t <= T; ++t) sys.C.push_back(random_matrix(rng, n_y, n_x));
    sys.validate();
    return sys;
}

// The worked 4x4 controller: scalar channels, horizon 3, two messages.
inline lrc::BlockLowerTriangular worked_example_controller() {
    lrc::Matrix K(4, 4);
    K << 5, 0, 0, 0,
         10, 0, 0, 0,
         0, 3, 4, 0,
         15, 6, 8, 0;
    return {K, 1, 1};
}

inline lrc::Box random_box(Rng& rng, lrc::Index d, double span = 2.0) {
    lrc::Vector lo(d), hi(d);
    for (lrc::Index i = 0; i < d; ++i) {
        const double a = lrc::uniform_in(rng, -span, span);
        const double b = lrc::uniform_in(rng, -span, span);
        lo(i) = std::min(a, b);
        hi(i) = std::max(a, b);
    }
    return {lo, hi};
}

}  // namespace testutil
