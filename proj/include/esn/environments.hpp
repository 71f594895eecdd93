#pragma once

#include <functional>

#include "esn/rng.hpp"
#include "esn/value_learning.hpp"

namespace esn {

// ---------------------------------------------------------------------------
// Bee World: deterministic, partially observed control on the unit circle.
// ---------------------------------------------------------------------------

struct BeeWorldConfig {
    double max_step = 0.1;                 // c; actions live in (-c, c)
    double omega = 2.0 * M_PI / 50.0;      // nectar angular frequency
};

struct BeeWorldState {
    double position = 0.0;  // y in [0, 1)
    long time = 0;
};

/// n(y, t) = 1 + cos(omega t) sin(2 pi y); y is wrapped mod 1.
double nectar(double y, double t, double omega);

/// Moves the bee by a (|a| < c), advances time, and returns the nectar
/// observed on arrival as the reward.
std::pair<BeeWorldState, double> bee_step(const BeeWorldState& state, double a,
                                          const BeeWorldConfig& cfg);

/// pi_0 ~ U(-c, c).
double policy_bee_uniform(const BeeWorldConfig& cfg, RngStream& rng);

// ---------------------------------------------------------------------------
// Market maker: stochastic inventory control with quadratic costs.
// ---------------------------------------------------------------------------

struct MarketMakerConfig {
    double control_cost = 1.0;      // alpha
    double inventory_cost = 1.0;    // beta
    double volatility = 1.0;        // sigma, order-flow noise scale
    double time_increment = 1.0;    // epsilon (Delta t)
    double baseline_profit = 0.0;   // r
};

struct MarketMakerState {
    double inventory = 0.0;
    long time = 0;
    double last_action = 0.0;
};

/// y' = y + eps a + sigma sqrt(eps) N(0,1); reward on arrival is
/// eps (r - alpha a^2 - beta y'^2).
std::pair<MarketMakerState, double> mm_step(const MarketMakerState& state, double a,
                                            const MarketMakerConfig& cfg, RngStream& rng);

/// pi_0(y) ~ N(0, sigma_i^2) - eta y.
double policy_mm_initial(double y, double eta, double sigma_i, RngStream& rng);

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

/// Runs the uniform initial policy in Bee World for `steps` steps.
/// Observations are the nectar at the current position; d = 2 downstream.
Experience rollout_bee(const BeeWorldConfig& cfg, BeeWorldState& state, Eigen::Index steps,
                       RngStream& rng);

/// Runs the mean-reverting initial policy in the market maker environment.
/// Observations are the current inventory.
Experience rollout_mm(const MarketMakerConfig& cfg, MarketMakerState& state, double eta,
                      double sigma_i, Eigen::Index steps, RngStream& rng);

/// Generic policy-driven rollout: `policy` maps the current observation to an
/// action. Used by the greedy improved-policy phase.
Experience rollout_bee_policy(const BeeWorldConfig& cfg, BeeWorldState& state, Eigen::Index steps,
                              const std::function<double(double obs)>& policy);

Experience rollout_mm_policy(const MarketMakerConfig& cfg, MarketMakerState& state,
                             Eigen::Index steps, RngStream& rng,
                             const std::function<double(double obs)>& policy);

/// Experience serialisation: CSV rows (k, obs..., action..., reward) and a
/// JSON document with a metadata header.
std::string experience_to_csv(const Experience& exp);
nlohmann::json experience_to_json(const Experience& exp);
Experience experience_from_json(const nlohmann::json& j);

}  // namespace esn
