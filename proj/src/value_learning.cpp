#include "esn/value_learning.hpp"

#include <Eigen/Eigenvalues>
#include <limits>
#include <json.hpp>

#include "esn/errors.hpp"
#include "esn/linalg.hpp"

namespace esn {

nlohmann::json ValueModel::to_json() const {
    return {{"W", std::vector<double>(W.data(), W.data() + W.size())},
            {"gamma", gamma},
            {"lambda", lambda}};
}

ValueModel ValueModel::from_json(const nlohmann::json& j) {
    ValueModel m;
    const auto w = j.at("W").get<std::vector<double>>();
    m.W = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.gamma = j.at("gamma").get<double>();
    m.lambda = j.at("lambda").get<double>();
    if (m.gamma < 0.0 || m.gamma >= 1.0) throw ParameterError("ValueModel: gamma outside [0,1)");
    if (!m.W.allFinite()) throw ParameterError("ValueModel: non-finite readout");
    return m;
}

Matrix Experience::input_matrix() const {
    if (steps.empty()) throw ParameterError("Experience: empty");
    const Eigen::Index obs_dim = steps.front().observation.size();
    const Eigen::Index act_dim = steps.front().action.size();
    Matrix inputs(size(), obs_dim + act_dim);
    for (Eigen::Index k = 0; k < size(); ++k) {
        const auto& s = steps[static_cast<std::size_t>(k)];
        if (s.observation.size() != obs_dim || s.action.size() != act_dim)
            throw ParameterError("Experience: inconsistent step dimensions");
        if (!std::isfinite(s.reward)) throw ParameterError("Experience: non-finite reward");
        inputs.row(k) << s.observation.transpose(), s.action.transpose();
    }
    return inputs;
}

std::pair<Matrix, Vector> build_bellman_design(const ReservoirTrajectory& traj,
                                               const Vector& rewards, double gamma) {
    if (gamma < 0.0 || gamma >= 1.0) throw ParameterError("build_bellman_design: gamma outside [0,1)");
    const Eigen::Index l = rewards.size();
    if (traj.rows() < l + 1)
        throw ParameterError("build_bellman_design: trajectory shorter than rewards + 1");
    Matrix design = traj.topRows(l) - gamma * traj.middleRows(1, l);
    return {std::move(design), rewards};
}

namespace {

// Target aligned so that row k of the design regresses onto the reward
// observed at time k (the arrival reward of transition k-1).
Vector arrival_rewards(const Experience& exp) {
    Vector r(exp.size());
    r(0) = 0.0;  // unobserved; the first row is always dropped
    for (Eigen::Index k = 1; k < exp.size(); ++k)
        r(k) = exp.steps[static_cast<std::size_t>(k - 1)].reward;
    return r;
}

}  // namespace

ValueModel fit_offline(const ReservoirParams& params, const Experience& exp, double gamma,
                       double lambda, Eigen::Index washout) {
    if (exp.size() < 1) throw ParameterError("fit_offline: empty experience");
    const Eigen::Index skip = std::max<Eigen::Index>(washout, 1);
    if (skip >= exp.size()) throw ParameterError("fit_offline: washout leaves no samples");

    const ReservoirTrajectory traj =
        reservoir_run(params, Vector::Zero(params.n()), exp.input_matrix());
    auto [design, targets] = build_bellman_design(traj, arrival_rewards(exp), gamma);
    const Eigen::Index m = design.rows() - skip;
    ValueModel model;
    model.W = ridge_solve(design.bottomRows(m), targets.tail(m), lambda);
    model.gamma = gamma;
    model.lambda = lambda;
    return model;
}

double value_of(const ValueModel& model, const Vector& x) {
    if (model.W.size() != x.size()) throw ParameterError("value_of: dimension mismatch");
    return model.W.dot(x);
}

GreedyChoice greedy_action(const ReservoirParams& params, const ValueModel& model,
                           const Vector& x, const Vector& current_obs,
                           const std::vector<Vector>& candidates) {
    if (candidates.empty()) throw ParameterError("greedy_action: empty candidate list");
    // A x + zeta is shared across candidates; only C z changes.
    const Vector base = params.A * x + params.zeta;
    GreedyChoice best;
    best.predicted_value = -std::numeric_limits<double>::infinity();
    Vector z(params.d());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        z << current_obs, candidates[i];
        const double v = model.W.dot((base + params.C * z).cwiseMax(0.0));
        if (v > best.predicted_value) {
            best.predicted_value = v;
            best.index = static_cast<Eigen::Index>(i);
            best.action = candidates[i];
        }
    }
    return best;
}

OnlineStepResult online_step(const ReservoirParams& params, const ValueModel& model,
                             const Vector& x_k, const Vector& current_obs,
                             const std::vector<Vector>& candidates, double r_k, double alpha_k,
                             double gamma_eff) {
    if (alpha_k <= 0.0) throw ParameterError("online_update: alpha_k must be > 0");
    OnlineStepResult out;
    out.choice = greedy_action(params, model, x_k, current_obs, candidates);
    out.td = model.W.dot(x_k) - r_k - gamma_eff * out.choice.predicted_value;
    out.model = model;
    out.model.W -= alpha_k * out.td * x_k;
    return out;
}

ValueModel online_update(const ReservoirParams& params, const ValueModel& model, const Vector& x_k,
                         const Vector& current_obs, const std::vector<Vector>& candidates,
                         double r_k, double alpha_k, double gamma_eff) {
    return online_step(params, model, x_k, current_obs, candidates, r_k, alpha_k, gamma_eff).model;
}

ValueModel online_update(const ReservoirParams& params, const ValueModel& model, const Vector& x_k,
                         const Vector& current_obs, const std::vector<Vector>& candidates,
                         double r_k, double alpha_k) {
    return online_update(params, model, x_k, current_obs, candidates, r_k, alpha_k, model.gamma);
}

double bellman_residual(const ReservoirParams& params, const ValueModel& model,
                        const Experience& exp, Eigen::Index washout) {
    if (exp.size() < 1) throw ParameterError("bellman_residual: empty experience");
    const Eigen::Index skip = std::max<Eigen::Index>(washout, 1);
    const Eigen::Index m = exp.size() - skip;
    if (m < 1) throw ParameterError("bellman_residual: washout leaves no samples");

    const ReservoirTrajectory traj =
        reservoir_run(params, Vector::Zero(params.n()), exp.input_matrix());
    auto [design, targets] = build_bellman_design(traj, arrival_rewards(exp), model.gamma);
    const Vector err = design.bottomRows(m) * model.W - targets.tail(m);
    return err.squaredNorm() / static_cast<double>(m);
}

AutocorrDiagnostics autocorr_diagnostics(const ReservoirTrajectory& traj, Eigen::Index washout,
                                         double tau) {
    if (washout >= traj.rows()) throw ParameterError("autocorr_diagnostics: washout too large");
    const Matrix states = traj.bottomRows(traj.rows() - washout);
    AutocorrDiagnostics out;
    out.tau = tau;
    out.sigma = (states.transpose() * states) / static_cast<double>(states.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> es(out.sigma, Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    const double lo = ev(0);
    const double hi = ev(ev.size() - 1);
    const double tol = static_cast<double>(out.sigma.rows()) * hi *
                       std::numeric_limits<double>::epsilon();
    out.kappa = (lo <= tol) ? std::numeric_limits<double>::infinity() : hi / lo;
    out.tau_below_inverse_kappa = std::isfinite(out.kappa) && tau < 1.0 / out.kappa;
    return out;
}

}  // namespace esn
