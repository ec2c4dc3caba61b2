#include "lrc/block_matrix.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace lrc;
using testutil::Rng;

TEST_CASE("lift unrolls the definition on scalar systems") {
    TimeVaryingLinearSystem sys;
    sys.T = 1;
    sys.n_x = sys.n_u = sys.n_y = 1;
    sys.A = {Matrix::Constant(1, 1, 2.0)};
    sys.B = {Matrix::Constant(1, 1, 3.0)};
    sys.C = {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0)};
    sys.validate();
    const LiftedOperators ops = lift(sys);

    Matrix calA(2, 2), Z(2, 2);
    calA << 2, 0, 0, 0;
    Z << 0, 0, 1, 0;
    CHECK(ops.calA == calA);
    CHECK(ops.Z == Z);
    CHECK(ops.calB(0, 0) == 3.0);
    CHECK(ops.calB(1, 1) == 0.0);
}

TEST_CASE("lift on the drone plant produces the position selector") {
    const auto p = drone_benchmark_problem();
    const LiftedOperators ops = lift(p.system);
    REQUIRE(ops.calC.rows() == 42);
    REQUIRE(ops.calC.cols() == 84);
    // each block row selects the two position coordinates of its step
    for (int t = 0; t <= 20; ++t) {
        CHECK(ops.calC(2 * t, 4 * t) == 1.0);
        CHECK(ops.calC(2 * t + 1, 4 * t + 1) == 1.0);
        CHECK(ops.calC.row(2 * t).sum() == 1.0);
    }
}

TEST_CASE("tolerant_rank counts relative to the largest singular value") {
    CHECK(tolerant_rank(Matrix::Identity(3, 3), 0.5) == 3);
    CHECK(tolerant_rank(Matrix::Zero(4, 2), 1e-9) == 0);
    Matrix D = Matrix::Zero(2, 2);
    D(0, 0) = 1.0;
    D(1, 1) = 1e-12;
    CHECK(tolerant_rank(D, 1e-9) == 1);
    CHECK(tolerant_rank(D, 0.0) == 2);
}

TEST_CASE("tolerant_rank matches an independent SVD count") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const Index rows = 1 + rng() % 6, cols = 1 + rng() % 6;
        Matrix M = testutil::random_matrix(rng, rows, cols);
        if (trial % 3 == 0) M.col(cols - 1).setZero();
        Eigen::BDCSVD<Matrix> svd(M);
        const Vector s = svd.singularValues();
        for (double eps : {1e-12, 1e-9, 1e-6}) {
            int expected = 0;
            for (Index i = 0; i < s.size(); ++i)
                if (s(i) > eps * s(0)) ++expected;
            if (s(0) == 0.0) expected = 0;
            CHECK(tolerant_rank(M, eps) == expected);
        }
    }
}

TEST_CASE("is_blt distinguishes causal and anti-causal structure") {
    const auto K = testutil::worked_example_controller();
    CHECK(is_blt(K, 0.0));
    CHECK_FALSE(is_blt(Matrix(K.data.transpose()), 1, 1, 3, 0.0));

    auto noisy = K;
    noisy.data(0, 3) = 1e-12;
    CHECK(is_blt(noisy, 1e-9));
    CHECK_FALSE(is_blt(noisy, 1e-13));

    CHECK_THROWS_AS(is_blt(Matrix::Zero(3, 4), 1, 1, 2, 0.0), DimensionError);
}

TEST_CASE("products of conforming causal matrices stay causal with exact zeros") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const int T = 1 + rng() % 5;
        const Index m = 1 + rng() % 3, p = 1 + rng() % 3, n = 1 + rng() % 3;
        const auto A = testutil::random_blt(rng, m, p, T);
        const auto B = testutil::random_blt(rng, p, n, T);
        const BlockLowerTriangular P(A.data * B.data, m, n);
        CHECK(is_blt(P, 0.0));
    }
}

TEST_CASE("downshifted block diagonals are strictly lower and I plus them is invertible") {
    Rng rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        const int T = 1 + rng() % 6;
        const Index d = 1 + rng() % 3;
        Matrix blocks = Matrix::Zero(d * (T + 1), d * (T + 1));
        for (int t = 0; t <= T; ++t)
            blocks.block(t * d, t * d, d, d) = testutil::random_matrix(rng, d, d);
        const Matrix S = block_downshift(d, T) * blocks;
        // strictly block-lower: the block diagonal itself is zero
        for (int t = 0; t <= T; ++t) CHECK(S.block(t * d, t * d, d, d).cwiseAbs().maxCoeff() == 0.0);
        const Matrix I = Matrix::Identity(S.rows(), S.cols());
        const Matrix X = (I + S).partialPivLu().solve(I);
        CHECK(((I + S) * X - I).cwiseAbs().maxCoeff() < 1e-10);
    }
}
