#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace lrc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Portable uniform double in [0, 1) from the raw 64-bit stream.  Avoids the
// implementation-defined behaviour of std::uniform_real_distribution so that
// seeded draws reproduce bit-for-bit across standard libraries.
template <class Rng>
double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Rng>
double uniform_in(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

}  // namespace lrc
