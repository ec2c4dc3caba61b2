#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "lrc/causal_factorization.hpp"
#include "lrc/simulate.hpp"

using lrc::Index;
using lrc::Matrix;
using lrc::Vector;

namespace {

// Plant whose measurements are exactly the injected noise: x stays unused,
// so y can be scripted through v.
lrc::SynthesisProblem scripted_measurement_problem(int T, Index n_y = 1) {
    lrc::SynthesisProblem p;
    auto& sys = p.system;
    sys.T = T;
    sys.n_x = sys.n_u = sys.n_y = n_y;
    sys.A.assign(static_cast<size_t>(T), Matrix::Zero(n_y, n_y));
    sys.B.assign(static_cast<size_t>(T), Matrix::Zero(n_y, n_y));
    sys.C.assign(static_cast<size_t>(T) + 1, Matrix::Identity(n_y, n_y));
    p.safety.X0 = lrc::HPolytope::from_box(lrc::Box::centered(1.0, n_y));
    for (int t = 0; t < T; ++t) {
        p.safety.X.push_back(lrc::HPolytope::from_box(lrc::Box::centered(100.0, n_y)));
        p.safety.U.push_back(lrc::HPolytope::from_box(lrc::Box::centered(100.0, n_y)));
        p.safety.W.push_back(lrc::HPolytope::from_box(lrc::Box::centered(1.0, n_y)));
        p.safety.V.push_back(lrc::HPolytope::from_box(lrc::Box::centered(10.0, n_y)));
    }
    return p;
}

lrc::SynthesisProblem boxes_around(const lrc::TimeVaryingLinearSystem& sys, double span) {
    lrc::SynthesisProblem p;
    p.system = sys;
    p.safety.X0 = lrc::HPolytope::from_box(lrc::Box::centered(span, sys.n_x));
    for (int t = 0; t < sys.T; ++t) {
        p.safety.X.push_back(lrc::HPolytope::from_box(lrc::Box::centered(1e6, sys.n_x)));
        p.safety.U.push_back(lrc::HPolytope::from_box(lrc::Box::centered(1e6, sys.n_u)));
        p.safety.W.push_back(lrc::HPolytope::from_box(lrc::Box::centered(span, sys.n_x)));
        p.safety.V.push_back(lrc::HPolytope::from_box(lrc::Box::centered(span, sys.n_y)));
    }
    return p;
}

}  // namespace

TEST_CASE("worked factorization replays the published message schedule") {
    auto prob = scripted_measurement_problem(3);
    const auto K = testutil::worked_example_controller();
    const auto f = lrc::causal_factorize(K, 1e-9);
    REQUIRE(f.band == 2);

    Matrix v(1, 4);
    v << 1.0, 2.0, 3.0, 4.0;
    const Vector x0 = Vector::Zero(1);
    const Matrix w = Matrix::Zero(1, 3);

    const auto traj = lrc::simulate_distributed(prob, f, x0, w, v);

    REQUIRE(traj.message_log.entries.size() == 2);
    CHECK(traj.message_log.entries[0].k == 0);
    CHECK(traj.message_log.entries[0].t == 0);
    CHECK(traj.message_log.entries[0].value == 5.0);
    CHECK(traj.message_log.entries[1].k == 1);
    CHECK(traj.message_log.entries[1].t == 2);
    CHECK(traj.message_log.entries[1].value == 3.0 * 2.0 + 4.0 * 3.0);

    CHECK(traj.u(0, 0) == 5.0);
    CHECK(traj.u(0, 1) == 10.0);
    CHECK(traj.u(0, 2) == 18.0);
    CHECK(traj.u(0, 3) == 3.0 * 5.0 + 2.0 * 18.0);

    REQUIRE(traj.access.encode_horizon.size() == 2);
    CHECK(traj.access.encode_horizon[0] <= f.times[0]);
    CHECK(traj.access.encode_horizon[1] <= f.times[1]);
    for (int t = 0; t <= 3; ++t) CHECK(traj.access.decode_horizon[static_cast<size_t>(t)] <= t);
}

TEST_CASE("monolithic rollout matches a hand computation") {
    lrc::SynthesisProblem prob;
    auto& sys = prob.system;
    sys.T = 2;
    sys.n_x = sys.n_u = sys.n_y = 1;
    sys.A.assign(2, Matrix::Constant(1, 1, 2.0));
    sys.B.assign(2, Matrix::Identity(1, 1));
    sys.C.assign(3, Matrix::Identity(1, 1));
    prob.safety.X0 = lrc::HPolytope::from_box(lrc::Box::centered(2.0, 1));
    for (int t = 0; t < 2; ++t) {
        prob.safety.X.push_back(lrc::HPolytope::from_box(lrc::Box::centered(100.0, 1)));
        prob.safety.U.push_back(lrc::HPolytope::from_box(lrc::Box::centered(100.0, 1)));
        prob.safety.W.push_back(lrc::HPolytope::from_box(lrc::Box::centered(1.0, 1)));
        prob.safety.V.push_back(lrc::HPolytope::from_box(lrc::Box::centered(1.0, 1)));
    }

    Matrix Kd = Matrix::Zero(3, 3);
    Kd(0, 0) = 0.5;
    Kd(1, 0) = 0.25;
    Kd(1, 1) = -1.0;
    Kd(2, 2) = 0.125;
    const lrc::BlockLowerTriangular K(Kd, 1, 1);

    const Vector x0 = Vector::Constant(1, 1.0);
    Matrix w(1, 2);
    w << 0.1, -0.2;
    Matrix v(1, 3);
    v << 0.05, 0.0, -0.05;

    const auto traj = lrc::simulate_monolithic(prob, K, x0, w, v);

    const double y0 = 1.0 + 0.05;
    const double u0 = 0.5 * y0;
    const double x1 = 2.0 * 1.0 + u0 + 0.1;
    const double y1 = x1;
    const double u1 = 0.25 * y0 - 1.0 * y1;
    const double x2 = 2.0 * x1 + u1 - 0.2;
    const double y2 = x2 - 0.05;
    const double u2 = 0.125 * y2;

    CHECK(traj.y(0, 0) == Catch::Approx(y0).margin(1e-14));
    CHECK(traj.u(0, 0) == Catch::Approx(u0).margin(1e-14));
    CHECK(traj.x(0, 1) == Catch::Approx(x1).margin(1e-14));
    CHECK(traj.u(0, 1) == Catch::Approx(u1).margin(1e-14));
    CHECK(traj.x(0, 2) == Catch::Approx(x2).margin(1e-14));
    CHECK(traj.y(0, 2) == Catch::Approx(y2).margin(1e-14));
    CHECK(traj.u(0, 2) == Catch::Approx(u2).margin(1e-14));
    CHECK(traj.message_log.entries.empty());
}

TEST_CASE("distributed execution agrees with the monolithic gains") {
    testutil::Rng rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const int T = 2 + static_cast<int>(rng() % 4);
        const Index n_u = 1 + static_cast<Index>(rng() % 2);
        const Index n_y = 1 + static_cast<Index>(rng() % 2);
        const Index n_x = 2;
        const auto sys = testutil::random_system(rng, n_x, n_u, n_y, T);
        auto prob = boxes_around(sys, 0.5);
        const auto K = testutil::random_blt(rng, n_u, n_y, T);
        const auto f = lrc::causal_factorize(K, 1e-9);
        const double residual = (f.D * f.E - K.data).cwiseAbs().maxCoeff();

        const auto draws = lrc::sample_noise(prob, lrc::NoiseMode::Uniform, 3, 77 + static_cast<unsigned>(trial));
        for (const auto& d : draws) {
            const auto mono = lrc::simulate_monolithic(prob, K, d.x0, d.w, d.v);
            const auto dist = lrc::simulate_distributed(prob, f, d.x0, d.w, d.v);
            const double ynorm = mono.y.norm();
            const double bound = 10.0 * residual * ynorm + 1e-11 * (1.0 + ynorm);
            CHECK((mono.u - dist.u).cwiseAbs().maxCoeff() <= bound);
            CHECK(static_cast<int>(dist.message_log.entries.size()) == f.band);
            for (size_t i = 1; i < dist.message_log.entries.size(); ++i) {
                CHECK(dist.message_log.entries[i - 1].t <= dist.message_log.entries[i].t);
            }
            for (int k = 0; k < f.band; ++k) {
                CHECK(dist.access.encode_horizon[static_cast<size_t>(k)] <= f.times[static_cast<size_t>(k)]);
            }
            for (int t = 0; t <= T; ++t) CHECK(dist.access.decode_horizon[static_cast<size_t>(t)] <= t);
        }
    }
}

TEST_CASE("band-zero factorization sends nothing and applies nothing") {
    testutil::Rng rng(5);
    const auto sys = testutil::random_system(rng, 2, 1, 1, 3);
    auto prob = boxes_around(sys, 0.5);
    const auto K = lrc::BlockLowerTriangular::zero(1, 1, 3);
    const auto f = lrc::causal_factorize(K, 1e-9);
    REQUIRE(f.band == 0);

    const auto draws = lrc::sample_noise(prob, lrc::NoiseMode::Uniform, 1, 3);
    const auto traj = lrc::simulate_distributed(prob, f, draws[0].x0, draws[0].w, draws[0].v);
    CHECK(traj.message_log.entries.empty());
    CHECK(traj.u.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("noise sampling is admissible, deterministic, and mode-correct") {
    testutil::Rng rng(9);
    const auto sys = testutil::random_system(rng, 3, 2, 2, 4);
    auto prob = boxes_around(sys, 0.25);

    const auto uni = lrc::sample_noise(prob, lrc::NoiseMode::Uniform, 10, 42);
    REQUIRE(uni.size() == 10);
    for (const auto& d : uni) {
        CHECK(prob.safety.X0.contains(d.x0));
        for (int t = 0; t < sys.T; ++t) {
            CHECK(prob.safety.W[static_cast<size_t>(t)].contains(d.w.col(t)));
            CHECK(prob.safety.V[static_cast<size_t>(t)].contains(d.v.col(t)));
        }
        CHECK(d.v.col(sys.T).cwiseAbs().maxCoeff() == 0.0);
    }

    const auto rep = lrc::sample_noise(prob, lrc::NoiseMode::Uniform, 10, 42);
    for (size_t i = 0; i < uni.size(); ++i) {
        CHECK((uni[i].x0 - rep[i].x0).cwiseAbs().maxCoeff() == 0.0);
        CHECK((uni[i].w - rep[i].w).cwiseAbs().maxCoeff() == 0.0);
        CHECK((uni[i].v - rep[i].v).cwiseAbs().maxCoeff() == 0.0);
    }
    const auto other = lrc::sample_noise(prob, lrc::NoiseMode::Uniform, 10, 43);
    CHECK((uni[0].w - other[0].w).cwiseAbs().maxCoeff() > 0.0);

    const auto vert = lrc::sample_noise(prob, lrc::NoiseMode::Vertex, 5, 7);
    for (const auto& d : vert) {
        for (int t = 0; t < sys.T; ++t) {
            for (Index i = 0; i < sys.n_x; ++i) CHECK(std::abs(d.w(i, t)) == 0.25);
            for (Index i = 0; i < sys.n_y; ++i) CHECK(std::abs(d.v(i, t)) == 0.25);
        }
    }
}

TEST_CASE("degenerate intervals always sample zero") {
    auto prob = scripted_measurement_problem(2);
    prob.safety.X0 = lrc::HPolytope::from_box(lrc::Box::centered(0.0, 1));
    for (int t = 0; t < 2; ++t) {
        prob.safety.W[static_cast<size_t>(t)] = lrc::HPolytope::from_box(lrc::Box::centered(0.0, 1));
        prob.safety.V[static_cast<size_t>(t)] = lrc::HPolytope::from_box(lrc::Box::centered(0.0, 1));
    }
    for (auto mode : {lrc::NoiseMode::Uniform, lrc::NoiseMode::Vertex}) {
        const auto draws = lrc::sample_noise(prob, mode, 4, 1);
        for (const auto& d : draws) {
            CHECK(d.x0.cwiseAbs().maxCoeff() == 0.0);
            CHECK(d.w.cwiseAbs().maxCoeff() == 0.0);
            CHECK(d.v.cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("non-box sets are rejected by the sampler") {
    auto prob = scripted_measurement_problem(2);
    Matrix H(3, 1);
    H << 1.0, -1.0, 1.0;
    Vector h(3);
    h << 1.0, 1.0, 2.0;
    prob.safety.W[0] = lrc::HPolytope(H, h);
    CHECK_THROWS_AS(lrc::sample_noise(prob, lrc::NoiseMode::Uniform, 1, 0), lrc::UnsupportedSetError);
    CHECK_THROWS_AS(lrc::sample_noise(prob, lrc::NoiseMode::Vertex, 1, 0), lrc::UnsupportedSetError);
}

TEST_CASE("safety margins report box clearances") {
    auto prob = scripted_measurement_problem(2);
    // States are exactly the process noise; with silent noise both state and
    // input margins equal the full box half-widths.
    const auto K = lrc::BlockLowerTriangular::zero(1, 1, 2);
    const auto traj = lrc::simulate_monolithic(prob, K, Vector::Zero(1), Matrix::Zero(1, 2), Matrix::Zero(1, 3));
    const auto rep = lrc::check_safety(prob, traj);
    CHECK(rep.pass);
    REQUIRE(rep.state_margins.size() == 2);
    REQUIRE(rep.input_margins.size() == 2);
    for (double m : rep.state_margins) CHECK(m == 100.0);
    for (double m : rep.input_margins) CHECK(m == 100.0);
    CHECK(rep.worst_margin == 100.0);

    auto bad = traj;
    bad.x(0, 1) = 100.5;
    const auto rep2 = lrc::check_safety(prob, bad);
    CHECK_FALSE(rep2.pass);
    CHECK(rep2.worst_margin == Catch::Approx(-0.5));
}

TEST_CASE("shape and causality guards") {
    auto prob = scripted_measurement_problem(2);
    const auto K = lrc::BlockLowerTriangular::zero(1, 1, 2);
    CHECK_THROWS_AS(lrc::simulate_monolithic(prob, K, Vector::Zero(1), Matrix::Zero(1, 3), Matrix::Zero(1, 3)),
                    lrc::DimensionError);
    CHECK_THROWS_AS(lrc::simulate_monolithic(prob, K, Vector::Zero(2), Matrix::Zero(1, 2), Matrix::Zero(1, 3)),
                    lrc::DimensionError);
    const auto K_wrong = lrc::BlockLowerTriangular::zero(1, 1, 3);
    CHECK_THROWS_AS(lrc::simulate_monolithic(prob, K_wrong, Vector::Zero(1), Matrix::Zero(1, 2), Matrix::Zero(1, 3)),
                    lrc::DimensionError);

    // Hand-built factor whose encoder peeks one step past its send time.
    lrc::CausalFactorization f;
    f.n_u = f.n_y = 1;
    f.band = 1;
    f.times = {0};
    f.E = Matrix::Zero(1, 3);
    f.E(0, 1) = 1.0;
    f.D = Matrix::Zero(3, 1);
    f.D(2, 0) = 1.0;
    CHECK_THROWS_AS(lrc::simulate_distributed(prob, f, Vector::Zero(1), Matrix::Zero(1, 2), Matrix::Zero(1, 3)),
                    lrc::Error);
}
