#include <doctest.h>

#include <cmath>

#include "esn/errors.hpp"
#include "esn/value_learning.hpp"

using esn::Experience;
using esn::Matrix;
using esn::RngStream;
using esn::ValueModel;
using esn::Vector;

namespace {

Experience random_experience(RngStream& rng, Eigen::Index steps, Eigen::Index obs_dim,
                             Eigen::Index act_dim) {
    Experience exp;
    exp.env_id = "synthetic";
    for (Eigen::Index k = 0; k < steps; ++k) {
        esn::ExperienceStep s;
        s.observation = rng.uniform_vec(-1.0, 1.0, obs_dim);
        s.action = rng.uniform_vec(-1.0, 1.0, act_dim);
        s.reward = rng.gaussian(0.0, 1.0);
        exp.steps.push_back(std::move(s));
    }
    return exp;
}

}  // namespace

TEST_CASE("build_bellman_design: gamma 0 and tiny example") {
    Matrix traj(2, 2);
    traj << 1, 0, 0, 1;
    Vector rewards(1);
    rewards << 0.7;
    auto [d0, t0] = esn::build_bellman_design(traj, rewards, 0.0);
    CHECK(d0.rows() == 1);
    CHECK(Vector(d0.row(0)) == Vector(traj.row(0)));
    auto [d, t] = esn::build_bellman_design(traj, rewards, 0.5);
    CHECK(d(0, 0) == 1.0);
    CHECK(d(0, 1) == -0.5);
    CHECK(t(0) == 0.7);
}

TEST_CASE("build_bellman_design: direct loop oracle and shift consistency") {
    RngStream rng(1);
    Matrix traj(21, 5);
    for (Eigen::Index k = 0; k < 21; ++k)
        traj.row(k) = rng.gaussian_vec(0.0, 1.0, 5).transpose();
    Vector rewards = rng.gaussian_vec(0.0, 1.0, 20);
    const double gamma = 0.5;
    auto [design, targets] = esn::build_bellman_design(traj, rewards, gamma);
    for (Eigen::Index k = 0; k < 20; ++k)
        for (Eigen::Index j = 0; j < 5; ++j)
            CHECK(design(k, j) == traj(k, j) - gamma * traj(k + 1, j));

    const Matrix suffix = traj.bottomRows(11);
    auto [design_s, targets_s] = esn::build_bellman_design(suffix, rewards.tail(10), gamma);
    CHECK(design_s == design.bottomRows(10));

    CHECK_THROWS_AS(esn::build_bellman_design(traj, rewards, 1.0), esn::ParameterError);
    CHECK_THROWS_AS(esn::build_bellman_design(traj.topRows(5), rewards, 0.5),
                    esn::ParameterError);
}

TEST_CASE("fit_offline: zero rewards give the zero readout") {
    RngStream rng(2);
    const auto params = esn::init_standard(10, 2, 0.1, 0.8, rng);
    Experience exp = random_experience(rng, 50, 1, 1);
    for (auto& s : exp.steps) s.reward = 0.0;
    const auto model = esn::fit_offline(params, exp, 0.5, 1e-6, 0);
    CHECK(model.W.norm() <= 1e-10);
}

TEST_CASE("fit_offline: planted readout recovered") {
    RngStream rng(3);
    auto params = esn::init_standard(30, 2, 0.1, 0.8, rng);
    // A positive bias keeps every unit active, so the design has full column
    // rank and the planted readout is identifiable.
    params.zeta = params.zeta.cwiseAbs().array() + 0.05;
    Experience exp = random_experience(rng, 200, 1, 1);
    const auto traj = esn::reservoir_run(params, Vector::Zero(30), exp.input_matrix());
    const Vector w_star = rng.gaussian_vec(0.0, 1.0, 30);
    const double gamma = 0.5;
    // The target paired with design row k is the reward stored on step k-1.
    for (Eigen::Index k = 1; k < 200; ++k)
        exp.steps[static_cast<std::size_t>(k - 1)].reward =
            w_star.dot(traj.row(k) - gamma * traj.row(k + 1));
    exp.steps.back().reward = 0.0;  // never used as a target
    const auto model = esn::fit_offline(params, exp, gamma, 1e-12, 0);
    CHECK((model.W - w_star).norm() / w_star.norm() <= 1e-6);

    CHECK(esn::bellman_residual(params, {w_star, gamma, 0.0}, exp, 0) <= 1e-10);
}

TEST_CASE("fit_offline: gamma 0 equals direct state regression") {
    RngStream rng(4);
    const auto params = esn::init_standard(20, 2, 0.1, 0.8, rng);
    const Experience exp = random_experience(rng, 120, 1, 1);
    const auto model = esn::fit_offline(params, exp, 0.0, 1e-8, 0);

    const auto traj = esn::reservoir_run(params, Vector::Zero(20), exp.input_matrix());
    Vector targets(119);
    for (Eigen::Index k = 1; k < 120; ++k)
        targets(k - 1) = exp.steps[static_cast<std::size_t>(k - 1)].reward;
    const Vector w_direct = esn::ridge_solve(traj.middleRows(1, 119), targets, 1e-8);
    CHECK((model.W - w_direct).norm() <= 1e-10);
}

TEST_CASE("value_of: projections and dot oracle") {
    ValueModel m;
    m.W = Vector::Zero(4);
    const Vector x = Vector::Ones(4);
    CHECK(esn::value_of(m, x) == 0.0);
    m.W = Vector::Unit(4, 2);
    Vector x2(4);
    x2 << 5, 6, 7, 8;
    CHECK(esn::value_of(m, x2) == 7.0);

    RngStream rng(5);
    m.W = rng.gaussian_vec(0.0, 1.0, 4);
    double dot = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i) dot += m.W(i) * x2(i);
    CHECK(esn::value_of(m, x2) == doctest::Approx(dot).epsilon(1e-15));
    CHECK_THROWS_AS(esn::value_of(m, Vector::Zero(3)), esn::ParameterError);
}

TEST_CASE("greedy_action: tie-break and brute force") {
    RngStream rng(6);
    const auto params = esn::init_standard(12, 2, 0.1, 0.8, rng);
    ValueModel model;
    model.W = Vector::Zero(12);
    model.gamma = 0.5;
    const Vector x = rng.gaussian_vec(0.0, 1.0, 12).cwiseAbs();
    const Vector obs = rng.uniform_vec(-1.0, 1.0, 1);
    std::vector<Vector> candidates;
    for (int i = 0; i < 5; ++i) candidates.push_back(rng.uniform_vec(-1.0, 1.0, 1));

    auto choice = esn::greedy_action(params, model, x, obs, candidates);
    CHECK(choice.index == 0);  // all values tie at zero

    model.W = rng.gaussian_vec(0.0, 1.0, 12);
    for (int i = 0; i < 95; ++i) candidates.push_back(rng.uniform_vec(-1.0, 1.0, 1));
    choice = esn::greedy_action(params, model, x, obs, candidates);
    double best = -1e300;
    Eigen::Index best_i = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        Vector z(2);
        z << obs, candidates[i];
        const double v = esn::value_of(model, esn::reservoir_step(params, x, z));
        if (v > best) {
            best = v;
            best_i = static_cast<Eigen::Index>(i);
        }
    }
    CHECK(choice.index == best_i);
    CHECK(choice.predicted_value == doctest::Approx(best).epsilon(1e-12));

    // Positive rescaling of W never changes the argmax.
    for (double c : {0.01, 3.0, 1000.0}) {
        ValueModel scaled = model;
        scaled.W *= c;
        const auto sc = esn::greedy_action(params, scaled, x, obs, candidates);
        CHECK(sc.index == choice.index);
        CHECK(sc.predicted_value == doctest::Approx(c * choice.predicted_value).epsilon(1e-9));
    }

    CHECK_THROWS_AS(esn::greedy_action(params, model, x, obs, {}), esn::ParameterError);
}

TEST_CASE("online_update: degenerate steps") {
    RngStream rng(7);
    const auto params = esn::init_standard(8, 2, 0.1, 0.8, rng);
    ValueModel model;
    model.W = rng.gaussian_vec(0.0, 1.0, 8);
    model.gamma = 0.5;
    const Vector obs = rng.uniform_vec(-1.0, 1.0, 1);
    const std::vector<Vector> candidates = {rng.uniform_vec(-1.0, 1.0, 1)};

    CHECK_THROWS_AS(
        esn::online_update(params, model, Vector::Ones(8), obs, candidates, 0.0, 0.0),
        esn::ParameterError);

    const auto frozen =
        esn::online_update(params, model, Vector::Zero(8), obs, candidates, 1.0, 0.1);
    CHECK(frozen.W == model.W);

    // The update is linear in alpha.
    const Vector x = rng.gaussian_vec(0.0, 1.0, 8).cwiseAbs();
    const Vector d1 = esn::online_update(params, model, x, obs, candidates, 0.3, 1.0).W - model.W;
    const Vector d2 = esn::online_update(params, model, x, obs, candidates, 0.3, 0.25).W - model.W;
    CHECK((d2 - 0.25 * d1).norm() <= 1e-12 * d1.norm());
}

TEST_CASE("online_update: scalar Robbins-Monro averaging") {
    // n=1 reservoir pinned at x=1 by the bias, single candidate, gamma_eff=0:
    // the recursion averages the constant reward.
    esn::ReservoirParams params;
    params.A = Matrix::Zero(1, 1);
    params.C = Matrix::Zero(1, 2);
    params.zeta = Vector::Ones(1);
    ValueModel model;
    model.W = Vector::Zero(1);
    model.gamma = 0.0;
    const Vector x = Vector::Ones(1);
    const Vector obs = Vector::Zero(1);
    const std::vector<Vector> candidates = {Vector::Zero(1)};
    const double r = 0.7;
    for (Eigen::Index k = 0; k < 10000; ++k)
        model = esn::online_update(params, model, x, obs, candidates, r,
                                   1.0 / static_cast<double>(k + 1), 0.0);
    CHECK(std::abs(model.W(0) - r) <= 1e-2);
}

TEST_CASE("bellman_residual: definitions and optimality") {
    RngStream rng(8);
    const auto params = esn::init_standard(15, 2, 0.1, 0.8, rng);
    const Experience exp = random_experience(rng, 100, 1, 1);

    ValueModel zero;
    zero.W = Vector::Zero(15);
    zero.gamma = 0.5;
    double mean_r2 = 0.0;
    for (Eigen::Index k = 1; k < 100; ++k) {
        const double r = exp.steps[static_cast<std::size_t>(k - 1)].reward;
        mean_r2 += r * r;
    }
    mean_r2 /= 99.0;
    CHECK(esn::bellman_residual(params, zero, exp, 0) ==
          doctest::Approx(mean_r2).epsilon(1e-12));

    const auto fitted = esn::fit_offline(params, exp, 0.5, 1e-10, 0);
    const double best = esn::bellman_residual(params, fitted, exp, 0);
    const double wnorm = fitted.W.norm();
    for (int trial = 0; trial < 50; ++trial) {
        ValueModel other = fitted;
        other.W = rng.gaussian_vec(0.0, 1.0, 15);
        other.W *= wnorm / other.W.norm();
        CHECK(best <= esn::bellman_residual(params, other, exp, 0) + 1e-12);
    }
}

TEST_CASE("autocorr_diagnostics: singular, isotropic, and loop oracle") {
    Matrix repeated(5, 3);
    for (Eigen::Index k = 0; k < 5; ++k) repeated.row(k) = Vector::Unit(3, 0).transpose();
    const auto singular = esn::autocorr_diagnostics(repeated, 0, 0.5);
    CHECK(std::isinf(singular.kappa));
    CHECK_FALSE(singular.tau_below_inverse_kappa);

    const Matrix basis = Matrix::Identity(4, 4);
    const auto iso = esn::autocorr_diagnostics(basis, 0, 0.1);
    CHECK(iso.kappa == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(iso.sigma.isApprox(Matrix::Identity(4, 4) / 4.0, 1e-12));
    CHECK(iso.tau_below_inverse_kappa);  // 0.1 < 1

    RngStream rng(9);
    Matrix traj(40, 6);
    for (Eigen::Index k = 0; k < 40; ++k)
        traj.row(k) = rng.gaussian_vec(0.0, 1.0, 6).transpose();
    const auto diag = esn::autocorr_diagnostics(traj, 5, 0.5);
    Matrix direct = Matrix::Zero(6, 6);
    for (Eigen::Index k = 5; k < 40; ++k)
        direct += traj.row(k).transpose() * traj.row(k);
    direct /= 35.0;
    CHECK((diag.sigma - direct).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("value model json round trip") {
    ValueModel m;
    m.W = Vector::LinSpaced(5, -1.0, 1.0);
    m.gamma = 0.25;
    m.lambda = 1e-9;
    const auto q = ValueModel::from_json(m.to_json());
    CHECK(q.W == m.W);
    CHECK(q.gamma == m.gamma);
    CHECK(q.lambda == m.lambda);
}
