#include <doctest.h>

#include <cmath>

#include "esn/errors.hpp"
#include "esn/reservoir.hpp"

using esn::Matrix;
using esn::ReservoirParams;
using esn::RngStream;
using esn::StructuredInitSpec;
using esn::Vector;

TEST_CASE("init_standard: spectral norm hits the target") {
    RngStream rng(1);
    const auto params = esn::init_standard(300, 2, 0.05, 1.0, rng);
    CHECK(std::abs(esn::spectral_norm(params.A) - 1.0) <= 1e-8);
}

TEST_CASE("init_standard: unscaled blocks stay in range") {
    RngStream rng(2);
    const auto params = esn::init_standard(5, 1, 0.05, 0.5, rng);
    CHECK(params.C.cwiseAbs().maxCoeff() <= 0.05);
    CHECK(params.zeta.cwiseAbs().maxCoeff() <= 0.05);
    CHECK(std::abs(esn::spectral_norm(params.A) - 0.5) <= 1e-8);
}

TEST_CASE("init_standard: determinism") {
    RngStream a(3), b(3);
    const auto pa = esn::init_standard(20, 2, 0.1, 0.9, a);
    const auto pb = esn::init_standard(20, 2, 0.1, 0.9, b);
    CHECK(pa.A == pb.A);
    CHECK(pa.C == pb.C);
    CHECK(pa.zeta == pb.zeta);
}

TEST_CASE("init_structured: dimensions and doubled-block identities") {
    RngStream rng(4);
    StructuredInitSpec spec;
    spec.input_dim = 1;
    spec.memory_horizon = 2;
    spec.feature_count = 3;
    spec.ball_radius = 1.0;
    spec.input_bound = 1.0;
    const auto params = esn::init_structured(spec, rng);
    const Eigen::Index half = 6;  // d(T0+1) + N = 3 + 3
    CHECK(params.n() == 12);
    CHECK(params.A.topLeftCorner(half, half) == -params.A.topRightCorner(half, half));
    CHECK(params.A.topLeftCorner(half, half) == params.A.bottomRightCorner(half, half));
    CHECK(params.C.topRows(half) == -params.C.bottomRows(half));
    CHECK(params.zeta.head(half) == -params.zeta.tail(half));
    // Feature rows of the top-left block come from the radius-R ball.
    const Eigen::Index m = 3;  // d(T0+1)
    for (Eigen::Index i = m; i < half; ++i) {
        // Row i is a_i S; S shifts coordinates, so the row norm equals ||a_i||
        // restricted to the shifted support.
        CHECK(params.A.row(i).head(half).norm() <= spec.ball_radius + 1e-12);
    }
}

TEST_CASE("init_structured: delay-line property is exact") {
    RngStream rng(5);
    StructuredInitSpec spec;
    spec.input_dim = 1;
    spec.memory_horizon = 2;
    spec.feature_count = 3;
    spec.ball_radius = 0.8;
    spec.input_bound = 1.2;
    const auto params = esn::init_structured(spec, rng);
    const Eigen::Index m = 3;  // d(T0+1)
    const Eigen::Index half = params.n() / 2;

    RngStream input_rng(17);
    const Eigen::Index steps = 12;
    Matrix inputs(steps, 1);
    for (Eigen::Index k = 0; k < steps; ++k) inputs(k, 0) = input_rng.uniform(-1.0, 1.0);

    const auto traj = esn::reservoir_run(params, Vector::Zero(params.n()), inputs);
    for (Eigen::Index k = spec.memory_horizon + 2; k <= steps; ++k) {
        const Vector delta = traj.row(k).head(half) - traj.row(k).tail(half);
        for (Eigen::Index j = 0; j < m; ++j) CHECK(delta(j) == inputs(k - 1 - j, 0));
    }
}

TEST_CASE("step: ReLU clamp and bias") {
    ReservoirParams p;
    p.A = Matrix::Zero(2, 2);
    p.C = Matrix::Identity(2, 2);
    p.zeta = Vector::Zero(2);
    Vector z(2);
    z << 1, -2;
    const Vector x1 = esn::reservoir_step(p, Vector::Zero(2), z);
    CHECK(x1(0) == 1.0);
    CHECK(x1(1) == 0.0);

    p.C = Matrix::Zero(2, 2);
    p.zeta << 0.3, -0.3;
    const Vector x2 = esn::reservoir_step(p, Vector::Ones(2), z);
    CHECK(x2(0) == 0.3);
    CHECK(x2(1) == 0.0);
}

TEST_CASE("step: element-wise oracle") {
    RngStream rng(6);
    const auto p = esn::init_standard(15, 3, 0.2, 0.8, rng);
    const Vector x = rng.gaussian_vec(0.0, 1.0, 15);
    const Vector z = rng.gaussian_vec(0.0, 1.0, 3);
    const Vector got = esn::reservoir_step(p, x, z);
    for (Eigen::Index i = 0; i < 15; ++i) {
        double pre = p.zeta(i);
        for (Eigen::Index j = 0; j < 15; ++j) pre += p.A(i, j) * x(j);
        for (Eigen::Index j = 0; j < 3; ++j) pre += p.C(i, j) * z(j);
        // Summation order differs from the library's matrix product, so allow
        // last-ulp slack.
        CHECK(got(i) == doctest::Approx(std::max(0.0, pre)).epsilon(1e-14));
    }
    CHECK(got.minCoeff() >= 0.0);
    Vector wrong(14);
    CHECK_THROWS_AS(esn::reservoir_step(p, wrong, z), esn::ParameterError);
}

TEST_CASE("run: lengths and step consistency") {
    RngStream rng(7);
    const auto p = esn::init_standard(8, 2, 0.2, 0.7, rng);
    const Vector x0 = rng.gaussian_vec(0.0, 1.0, 8).cwiseAbs();

    const auto empty = esn::reservoir_run(p, x0, Matrix::Zero(0, 2));
    CHECK(empty.rows() == 1);
    CHECK(Vector(empty.row(0)) == x0);

    Matrix inputs(3, 2);
    inputs << 1, 0, 0, 1, -1, 0.5;
    const auto traj = esn::reservoir_run(p, x0, inputs);
    CHECK(traj.rows() == 4);
    for (Eigen::Index k = 0; k < 3; ++k) {
        const Vector expect = esn::reservoir_step(p, traj.row(k), inputs.row(k));
        CHECK(Vector(traj.row(k + 1)) == expect);
    }
}

TEST_CASE("fading memory: contraction at rate spectral_target") {
    for (double rho : {0.5, 0.9}) {
        RngStream rng(static_cast<std::uint64_t>(rho * 100));
        const auto p = esn::init_standard(20, 2, 0.1, rho, rng);
        Matrix inputs(30, 2);
        for (Eigen::Index k = 0; k < 30; ++k)
            inputs.row(k) = rng.uniform_vec(-1.0, 1.0, 2).transpose();
        const Vector x0 = rng.gaussian_vec(0.0, 1.0, 20);
        const Vector x0p = rng.gaussian_vec(0.0, 1.0, 20);
        const auto ta = esn::reservoir_run(p, x0, inputs);
        const auto tb = esn::reservoir_run(p, x0p, inputs);
        const double d0 = (x0 - x0p).norm();
        for (Eigen::Index k = 0; k <= 30; ++k) {
            const double dk = (ta.row(k) - tb.row(k)).norm();
            CHECK(dk <= std::pow(rho, static_cast<double>(k)) * d0 + 1e-12);
        }
    }
}

TEST_CASE("structured linear-difference law") {
    RngStream rng(8);
    StructuredInitSpec spec;
    spec.input_dim = 2;
    spec.memory_horizon = 1;
    spec.feature_count = 4;
    spec.ball_radius = 1.0;
    spec.input_bound = 1.0;
    const auto p = esn::init_structured(spec, rng);
    const Eigen::Index half = p.n() / 2;
    const Matrix A_bar = p.A.topLeftCorner(half, half);
    const Matrix C_bar = p.C.topRows(half);
    const Vector zeta_bar = p.zeta.head(half);

    Matrix inputs(10, 2);
    for (Eigen::Index k = 0; k < 10; ++k)
        inputs.row(k) = rng.uniform_vec(-0.5, 0.5, 2).transpose();
    const auto traj = esn::reservoir_run(p, Vector::Zero(p.n()), inputs);
    for (Eigen::Index k = 0; k < 10; ++k) {
        const Vector delta_k = traj.row(k).head(half) - traj.row(k).tail(half);
        const Vector delta_next = traj.row(k + 1).head(half) - traj.row(k + 1).tail(half);
        const Vector expect = A_bar * delta_k + C_bar * inputs.row(k).transpose() + zeta_bar;
        CHECK((delta_next - expect).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("boundedness under contractive dynamics") {
    RngStream rng(9);
    const auto p = esn::init_standard(12, 2, 0.3, 0.8, rng);
    const double rho = esn::spectral_norm(p.A);
    const double cnorm = esn::spectral_norm(p.C);
    const double input_bound = 2.0;
    const double limit = (cnorm * input_bound + p.zeta.norm()) / (1.0 - rho);
    Matrix inputs(50, 2);
    for (Eigen::Index k = 0; k < 50; ++k) {
        Vector z = rng.uniform_vec(-1.0, 1.0, 2);
        inputs.row(k) = (input_bound * z / std::max(1.0, z.norm())).transpose();
    }
    const Vector x0 = rng.gaussian_vec(0.0, 2.0, 12);
    const auto traj = esn::reservoir_run(p, x0, inputs);
    for (Eigen::Index k = 0; k <= 50; ++k)
        CHECK(traj.row(k).norm() <=
              limit + std::pow(rho, static_cast<double>(k)) * x0.norm() + 1e-9);
}

TEST_CASE("params json round trip") {
    RngStream rng(10);
    const auto p = esn::init_standard(6, 2, 0.1, 0.6, rng);
    const auto q = ReservoirParams::from_json(p.to_json());
    CHECK(p.A == q.A);
    CHECK(p.C == q.C);
    CHECK(p.zeta == q.zeta);
}
