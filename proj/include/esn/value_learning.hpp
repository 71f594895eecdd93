#pragma once

#include <json.hpp>
#include <vector>

#include "esn/reservoir.hpp"

namespace esn {

/// Linear readout over reservoir states: V(x) = W . x.
struct ValueModel {
    Vector W;
    double gamma = 0.0;   // discount in [0, 1)
    double lambda = 0.0;  // ridge parameter used for the fit

    nlohmann::json to_json() const;
    static ValueModel from_json(const nlohmann::json& j);
};

/// One rollout step: observation, executed action, and the reward observed
/// on arrival (after the transition).
struct ExperienceStep {
    Vector observation;
    Vector action;
    double reward = 0.0;
};

struct Experience {
    std::vector<ExperienceStep> steps;
    std::string env_id;
    std::string policy_id;
    std::uint64_t seed = 0;

    Eigen::Index size() const { return static_cast<Eigen::Index>(steps.size()); }

    /// Reservoir inputs z_k = (observation_k, action_k), one row per step.
    Matrix input_matrix() const;
};

/// alpha_k = a / (b + k + 1); sums to infinity, squares summable.
struct StepSizeSchedule {
    double a = 1.0;
    double b = 100.0;

    double alpha(Eigen::Index k) const { return a / (b + static_cast<double>(k) + 1.0); }
};

/// Design row k is (x_k - gamma x_{k+1})^T, target entry k is rewards[k].
std::pair<Matrix, Vector> build_bellman_design(const ReservoirTrajectory& traj,
                                               const Vector& rewards, double gamma);

/// Drives the reservoir over the experience inputs from x_0 = 0 and ridge-fits
/// the temporal-difference regression. The target paired with row k is the
/// reward observed at time k, i.e. steps[k-1].reward; row 0 has no observed
/// reward and is always dropped, so the effective washout is max(washout, 1).
ValueModel fit_offline(const ReservoirParams& params, const Experience& exp, double gamma,
                       double lambda, Eigen::Index washout);

double value_of(const ValueModel& model, const Vector& x);

struct GreedyChoice {
    Eigen::Index index = 0;
    Vector action;
    double predicted_value = 0.0;
};

/// Evaluates every candidate action through the hypothetical next reservoir
/// state and returns the argmax; ties break toward the lowest index.
GreedyChoice greedy_action(const ReservoirParams& params, const ValueModel& model,
                           const Vector& x, const Vector& current_obs,
                           const std::vector<Vector>& candidates);

struct OnlineStepResult {
    ValueModel model;
    double td = 0.0;  // temporal-difference error driving the update
    GreedyChoice choice;
};

/// Stochastic temporal-difference step:
///   W' = W - alpha_k x_k (W.x_k - r_k - gamma_eff max_a W.step(x_k, z_k(a))).
/// Returns the updated model together with the TD error and the argmax
/// candidate used for the bootstrap target.
OnlineStepResult online_step(const ReservoirParams& params, const ValueModel& model,
                             const Vector& x_k, const Vector& current_obs,
                             const std::vector<Vector>& candidates, double r_k, double alpha_k,
                             double gamma_eff);

/// gamma_eff defaults to the model's discount; pass 1.0 to reproduce the
/// undiscounted-max variant.
ValueModel online_update(const ReservoirParams& params, const ValueModel& model, const Vector& x_k,
                         const Vector& current_obs, const std::vector<Vector>& candidates,
                         double r_k, double alpha_k, double gamma_eff);

ValueModel online_update(const ReservoirParams& params, const ValueModel& model, const Vector& x_k,
                         const Vector& current_obs, const std::vector<Vector>& candidates,
                         double r_k, double alpha_k);

/// Mean squared temporal-difference error of the model on the experience,
/// averaged over post-washout rows of the same design used by fit_offline.
double bellman_residual(const ReservoirParams& params, const ValueModel& model,
                        const Experience& exp, Eigen::Index washout);

struct AutocorrDiagnostics {
    Matrix sigma;          // (1/m) sum_k x_k x_k^T over post-washout states
    double kappa = 0.0;    // condition number; infinity when singular
    double tau = 0.0;      // contraction constant the bound was checked against
    bool tau_below_inverse_kappa = false;
};

AutocorrDiagnostics autocorr_diagnostics(const ReservoirTrajectory& traj, Eigen::Index washout,
                                         double tau);

}  // namespace esn
