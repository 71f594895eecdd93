#pragma once

#include <string>
#include <vector>

#include "esn/errors.hpp"
#include "esn/linalg.hpp"

namespace esn {

// ---------------------------------------------------------------------------
// Market maker, continuous time.
// ---------------------------------------------------------------------------

struct MMContinuousSolution {
    double feedback_gain = 0.0;    // h; optimal control is -h y
    double discount_rate = 0.0;    // delta
    double alpha = 0.0, beta = 0.0, sigma = 0.0, r_base = 0.0;

    double value_at(double y) const;
    double stationary_variance() const;  // sigma^2 / (2 h)
};

MMContinuousSolution mm_continuous(double alpha, double beta, double delta, double sigma,
                                   double r_base);

// ---------------------------------------------------------------------------
// Market maker, discrete time (unit time increment).
// ---------------------------------------------------------------------------

struct MMDiscreteSolution {
    double p = 0.0;        // value-function coefficient: v(y) = -alpha p y^2 + const
    double gamma = 0.0;    // discount in (0, 1)
    double alpha = 0.0, beta = 0.0, sigma = 0.0, r_base = 0.0;

    double value_at(double y) const;

    /// Std of the stationary law of y' = (1 - p) y + sigma N.
    double stationary_std() const;

    /// Gain of the one-step greedy (Bellman-optimal) control
    /// -(gamma p / (1 + gamma p)) y, which equals p - 1 when alpha = beta.
    /// Substituting it into the Bellman equation reproduces value_at exactly,
    /// which the gain p does not (see mm_bellman_gap).
    double greedy_gain() const { return gamma * p / (1.0 + gamma * p); }

    /// Std of the stationary law under the greedy gain.
    double greedy_stationary_std() const;

    double stationary_density(double y, double gain) const;
};

MMDiscreteSolution mm_discrete(double alpha, double beta, double gamma, double sigma,
                               double r_base);

/// Max over the grid of |(T s)(y) - s(y)| where T is the Gaussian transition
/// operator of y' = (1 - p) y + sigma N applied by quadrature to the claimed
/// stationary density. Throws NumericalError if the quadrature error estimate
/// exceeds quad_tol.
double mm_stationary_fixed_point_check(const MMDiscreteSolution& sol, const Vector& grid,
                                       int quad_points, double quad_tol = 1e-8);

/// One-step Bellman self-consistency of the discrete solution: evaluates
/// |v(y) - (r - alpha a^2 - beta y^2 + gamma E[v(y')])| at the given point
/// with a = -gain y, the expectation taken by Gauss-Hermite quadrature.
double mm_bellman_gap(const MMDiscreteSolution& sol, double y, double gain, int nodes = 64);

// ---------------------------------------------------------------------------
// Bee World optimal trajectory (Euler-Lagrange system).
// ---------------------------------------------------------------------------

struct EulerLagrangeState {
    double velocity = 0.0;  // v, strictly inside (-c, c)
    double position = 0.0;  // y on the circle
    double time = 0.0;      // tau
};

struct EulerLagrangeDeriv {
    double dv = 0.0;
    double dy = 0.0;
    double dtau = 1.0;
};

/// Right-hand side of the stationarity system
///   dv = -(2c cos^2(pi v / 2c) / pi)
///        (4 c cos(omega tau) cos(2 pi y) / eps_pen + log(gamma) tan(pi v / 2c)).
/// Throws ParameterError when |v| >= c (tan singularity).
EulerLagrangeDeriv bee_euler_lagrange_rhs(const EulerLagrangeState& s, double eps_pen, double c,
                                          double gamma, double omega);

struct BeeTrajectoryPoint {
    double t = 0.0;
    double velocity = 0.0;
    double position = 0.0;
    double nectar = 0.0;
};

struct BeeIntegrationResult {
    std::vector<BeeTrajectoryPoint> trajectory;
    double average_nectar = 0.0;
};

/// Thrown when the adaptive integrator's step size underflows; carries
/// whatever part of the trajectory was completed.
struct BeeStiffnessError : NumericalError {
    BeeIntegrationResult partial;

    BeeStiffnessError(const std::string& msg, BeeIntegrationResult p)
        : NumericalError(msg), partial(std::move(p)) {}
};

/// Integrates the nectar-seeking branch of the stationarity system (the
/// velocity field reversed relative to bee_euler_lagrange_rhs, which damps v
/// and tracks nectar maxima) with an embedded adaptive Runge-Kutta pair,
/// accumulating the running nectar integral. forcing_scale is a test hook
/// that scales the nectar-gradient term (1 = physical dynamics).
BeeIntegrationResult integrate_optimal_bee(double eps_pen, double c, double gamma, double omega,
                                           double y0, double v0, double horizon, double tol,
                                           double forcing_scale = 1.0);

}  // namespace esn
