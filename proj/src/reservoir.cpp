#include "esn/reservoir.hpp"

#include <json.hpp>

#include "esn/errors.hpp"

namespace esn {

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    return m;
}

}  // namespace

nlohmann::json ReservoirParams::to_json() const {
    return {{"n", n()},
            {"d", d()},
            {"activation", "relu"},
            {"A", matrix_to_json(A)},
            {"C", matrix_to_json(C)},
            {"zeta", std::vector<double>(zeta.data(), zeta.data() + zeta.size())}};
}

ReservoirParams ReservoirParams::from_json(const nlohmann::json& j) {
    const auto n = j.at("n").get<Eigen::Index>();
    const auto d = j.at("d").get<Eigen::Index>();
    ReservoirParams p;
    p.A = matrix_from_json(j.at("A"), n, n);
    p.C = matrix_from_json(j.at("C"), n, d);
    const auto z = j.at("zeta").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(z.size()) != n)
        throw ParameterError("ReservoirParams: zeta length != n");
    p.zeta = Eigen::Map<const Vector>(z.data(), n);
    if (!p.A.allFinite() || !p.C.allFinite() || !p.zeta.allFinite())
        throw ParameterError("ReservoirParams: non-finite weights");
    return p;
}

ReservoirParams init_standard(Eigen::Index n, Eigen::Index d, double weight_range,
                              double spectral_target, RngStream& rng) {
    if (n < 1 || d < 1) throw ParameterError("init_standard: n and d must be >= 1");
    if (weight_range <= 0.0) throw ParameterError("init_standard: weight_range <= 0");
    if (spectral_target <= 0.0) throw ParameterError("init_standard: spectral_target <= 0");

    ReservoirParams p;
    p.A.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) p.A(i, j) = rng.uniform(-weight_range, weight_range);
    p.C.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) p.C(i, j) = rng.uniform(-weight_range, weight_range);
    p.zeta = rng.uniform_vec(-weight_range, weight_range, n);

    const double norm = spectral_norm(p.A);
    if (norm == 0.0) throw ParameterError("init_standard: degenerate all-zero reservoir draw");
    p.A *= spectral_target / norm;
    return p;
}

ReservoirParams init_structured(const StructuredInitSpec& spec, RngStream& rng) {
    if (spec.feature_count < 1) throw ParameterError("init_structured: N < 1");
    if (spec.memory_horizon < 0) throw ParameterError("init_structured: T0 < 0");
    if (spec.ball_radius <= 0.0) throw ParameterError("init_structured: R <= 0");
    if (spec.input_bound <= 0.0) throw ParameterError("init_structured: M_T0 <= 0");
    if (spec.input_dim < 1) throw ParameterError("init_structured: d < 1");

    const Eigen::Index d = spec.input_dim;
    const Eigen::Index t0 = spec.memory_horizon;
    const Eigen::Index big_n = spec.feature_count;
    const Eigen::Index m = d * (t0 + 1);  // delay window dimension

    // Shift matrix S pushes the window down by d; c injects the fresh input.
    Matrix shift = Matrix::Zero(m, m);
    shift.block(d, 0, d * t0, d * t0) = Matrix::Identity(d * t0, d * t0);
    Matrix inject = Matrix::Zero(m, d);
    inject.topLeftCorner(d, d) = Matrix::Identity(d, d);

    Matrix features(big_n, m);  // row i is the i-th ball sample transposed
    for (Eigen::Index i = 0; i < big_n; ++i)
        features.row(i) = rng.uniform_ball(m, spec.ball_radius).transpose();

    const double bias_range = std::max(spec.input_bound * spec.ball_radius, 1.0);
    const Vector feature_bias = rng.uniform_vec(-bias_range, bias_range, big_n);

    const Eigen::Index half = m + big_n;
    Matrix a_bar = Matrix::Zero(half, half);
    a_bar.topLeftCorner(m, m) = shift;
    a_bar.block(m, 0, big_n, m) = features * shift;
    Matrix c_bar(half, d);
    c_bar.topRows(m) = inject;
    c_bar.bottomRows(big_n) = features * inject;
    Vector zeta_bar = Vector::Zero(half);
    zeta_bar.tail(big_n) = feature_bias;

    ReservoirParams p;
    p.A.resize(2 * half, 2 * half);
    p.A.topLeftCorner(half, half) = a_bar;
    p.A.topRightCorner(half, half) = -a_bar;
    p.A.bottomLeftCorner(half, half) = -a_bar;
    p.A.bottomRightCorner(half, half) = a_bar;
    p.C.resize(2 * half, d);
    p.C.topRows(half) = c_bar;
    p.C.bottomRows(half) = -c_bar;
    p.zeta.resize(2 * half);
    p.zeta.head(half) = zeta_bar;
    p.zeta.tail(half) = -zeta_bar;
    return p;
}

Vector reservoir_step(const ReservoirParams& params, const Vector& x, const Vector& z) {
    if (x.size() != params.n()) throw ParameterError("reservoir_step: state dimension mismatch");
    if (z.size() != params.d()) throw ParameterError("reservoir_step: input dimension mismatch");
    return (params.A * x + params.C * z + params.zeta).cwiseMax(0.0);
}

ReservoirTrajectory reservoir_run(const ReservoirParams& params, const Vector& x0,
                                  const Matrix& inputs) {
    if (inputs.rows() > 0 && inputs.cols() != params.d())
        throw ParameterError("reservoir_run: input dimension mismatch");
    ReservoirTrajectory traj(inputs.rows() + 1, params.n());
    traj.row(0) = x0.transpose();
    Vector x = x0;
    for (Eigen::Index k = 0; k < inputs.rows(); ++k) {
        x = reservoir_step(params, x, inputs.row(k).transpose());
        traj.row(k + 1) = x.transpose();
    }
    return traj;
}

}  // namespace esn
