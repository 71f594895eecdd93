#include "esn/oracles.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>

namespace esn {

namespace {

double gaussian_pdf(double x, double std_dev) {
    const double z = x / std_dev;
    return std::exp(-0.5 * z * z) / (std_dev * std::sqrt(2.0 * M_PI));
}

}  // namespace

// ---------------------------------------------------------------------------
// Continuous market maker
// ---------------------------------------------------------------------------

double MMContinuousSolution::value_at(double y) const {
    return -alpha * feedback_gain * y * y +
           (r_base - alpha * feedback_gain * sigma * sigma) / discount_rate;
}

double MMContinuousSolution::stationary_variance() const {
    return sigma * sigma / (2.0 * feedback_gain);
}

MMContinuousSolution mm_continuous(double alpha, double beta, double delta, double sigma,
                                   double r_base) {
    if (alpha <= 0.0 || beta <= 0.0 || delta <= 0.0 || sigma <= 0.0)
        throw ParameterError("mm_continuous: parameters must be positive");
    MMContinuousSolution sol;
    sol.alpha = alpha;
    sol.beta = beta;
    sol.sigma = sigma;
    sol.r_base = r_base;
    sol.discount_rate = delta;
    // Positive root of alpha h^2 + alpha delta h - beta = 0.
    sol.feedback_gain =
        (-alpha * delta + std::sqrt(alpha * alpha * delta * delta + 4.0 * alpha * beta)) /
        (2.0 * alpha);
    return sol;
}

// ---------------------------------------------------------------------------
// Discrete market maker
// ---------------------------------------------------------------------------

double MMDiscreteSolution::value_at(double y) const {
    return -alpha * p * y * y + (r_base - gamma * alpha * p * sigma * sigma) / (1.0 - gamma);
}

double MMDiscreteSolution::stationary_std() const {
    return sigma / std::sqrt(p * (2.0 - p));
}

double MMDiscreteSolution::greedy_stationary_std() const {
    const double g = greedy_gain();
    return sigma / std::sqrt(g * (2.0 - g));
}

double MMDiscreteSolution::stationary_density(double y, double gain) const {
    if (gain <= 0.0 || gain >= 2.0)
        throw ParameterError("stationary_density: gain outside (0,2), no stationary law");
    return gaussian_pdf(y, sigma / std::sqrt(gain * (2.0 - gain)));
}

MMDiscreteSolution mm_discrete(double alpha, double beta, double gamma, double sigma,
                               double r_base) {
    if (alpha <= 0.0 || beta <= 0.0 || sigma <= 0.0)
        throw ParameterError("mm_discrete: alpha, beta, sigma must be positive");
    if (gamma <= 0.0 || gamma >= 1.0) throw ParameterError("mm_discrete: gamma outside (0,1)");
    MMDiscreteSolution sol;
    sol.alpha = alpha;
    sol.beta = beta;
    sol.gamma = gamma;
    sol.sigma = sigma;
    sol.r_base = r_base;
    // Positive root of gamma alpha p^2 - (alpha (gamma - 1) + gamma beta) p - beta = 0.
    const double b = alpha * (gamma - 1.0) + gamma * beta;
    sol.p = (b + std::sqrt(b * b + 4.0 * alpha * beta * gamma)) / (2.0 * gamma * alpha);
    return sol;
}

double mm_stationary_fixed_point_check(const MMDiscreteSolution& sol, const Vector& grid,
                                       int quad_points, double quad_tol) {
    if (!grid.allFinite()) throw ParameterError("fixed_point_check: non-finite grid");
    if (quad_points < 64) throw ParameterError("fixed_point_check: quad_points < 64");

    const double std_dev = sol.stationary_std();
    const double half_width = 8.0 * std_dev;

    // Composite Simpson over [-L, L]; the integrand is smooth and compactly
    // negligible outside the window.
    auto apply_operator = [&](int points, Vector& out) {
        int m = points | 1;  // Simpson needs an odd node count
        const double h = 2.0 * half_width / static_cast<double>(m - 1);
        Vector nodes(m), weights(m), density(m);
        for (int i = 0; i < m; ++i) {
            nodes(i) = -half_width + h * static_cast<double>(i);
            density(i) = sol.stationary_density(nodes(i), sol.p);
            const bool edge = (i == 0 || i == m - 1);
            weights(i) = edge ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        }
        weights *= h / 3.0;
        out.resize(grid.size());
        for (Eigen::Index g = 0; g < grid.size(); ++g) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) {
                const double mean = (1.0 - sol.p) * nodes(i);
                acc += weights(i) * gaussian_pdf(grid(g) - mean, sol.sigma) * density(i);
            }
            out(g) = acc;
        }
    };

    Vector fine, coarse;
    apply_operator(quad_points, fine);
    apply_operator(quad_points / 2, coarse);
    const double est = (fine - coarse).cwiseAbs().maxCoeff();
    if (est > quad_tol)
        throw NumericalError("fixed_point_check: quadrature error estimate above tolerance");

    double max_err = 0.0;
    for (Eigen::Index g = 0; g < grid.size(); ++g)
        max_err = std::max(max_err, std::abs(fine(g) - sol.stationary_density(grid(g), sol.p)));
    return max_err;
}

double mm_bellman_gap(const MMDiscreteSolution& sol, double y, double gain, int nodes) {
    if (nodes < 2) throw ParameterError("mm_bellman_gap: too few quadrature nodes");

    // Gauss-Hermite rule by Golub-Welsch: the Jacobi matrix for Hermite
    // polynomials has zero diagonal and off-diagonal sqrt(i/2).
    Matrix jacobi = Matrix::Zero(nodes, nodes);
    for (int i = 1; i < nodes; ++i) {
        const double b = std::sqrt(static_cast<double>(i) / 2.0);
        jacobi(i, i - 1) = b;
        jacobi(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
    const Vector& t = es.eigenvalues();
    Vector w(nodes);
    for (int i = 0; i < nodes; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        w(i) = v0 * v0;  // already normalized: weights sum to 1 after dividing by sqrt(pi)
    }

    // One-step Bellman right-hand side with running cost charged at the
    // current inventory, a = -gain y, and y' = y + a + sigma N.
    const double a = -gain * y;
    double expectation = 0.0;
    for (int i = 0; i < nodes; ++i) {
        const double y_next = y + a + sol.sigma * std::sqrt(2.0) * t(i);
        expectation += w(i) * sol.value_at(y_next);
    }
    const double rhs = sol.r_base - sol.alpha * a * a - sol.beta * y * y +
                       sol.gamma * expectation;
    return std::abs(sol.value_at(y) - rhs);
}

// ---------------------------------------------------------------------------
// Bee World Euler-Lagrange system
// ---------------------------------------------------------------------------

EulerLagrangeDeriv bee_euler_lagrange_rhs(const EulerLagrangeState& s, double eps_pen, double c,
                                          double gamma, double omega) {
    if (eps_pen <= 0.0) throw ParameterError("bee_euler_lagrange_rhs: eps_pen <= 0");
    if (gamma <= 0.0 || gamma >= 1.0)
        throw ParameterError("bee_euler_lagrange_rhs: gamma outside (0,1)");
    if (std::abs(s.velocity) >= c)
        throw ParameterError("bee_euler_lagrange_rhs: |v| >= c, tan singularity");
    const double g = M_PI * s.velocity / (2.0 * c);
    const double prefactor = 2.0 * c * std::cos(g) * std::cos(g) / M_PI;
    const double forcing =
        4.0 * c * std::cos(omega * s.time) * std::cos(2.0 * M_PI * s.position) / eps_pen;
    EulerLagrangeDeriv d;
    d.dv = -prefactor * (forcing + std::log(gamma) * std::tan(g));
    d.dy = s.velocity;
    d.dtau = 1.0;
    return d;
}

namespace {

double nectar_field(double y, double t, double omega) {
    return 1.0 + std::cos(omega * t) * std::sin(2.0 * M_PI * y);
}

// Cash-Karp embedded 4(5) tableau.
constexpr std::array<double, 6> kCkC = {0.0, 1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0};
constexpr std::array<std::array<double, 5>, 6> kCkA = {{
    {0.0, 0.0, 0.0, 0.0, 0.0},
    {1.0 / 5.0, 0.0, 0.0, 0.0, 0.0},
    {3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0},
    {3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0},
    {-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0},
    {1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0},
}};
constexpr std::array<double, 6> kCkB5 = {37.0 / 378.0,  0.0, 250.0 / 621.0,
                                         125.0 / 594.0, 0.0, 512.0 / 1771.0};
constexpr std::array<double, 6> kCkB4 = {2825.0 / 27648.0,  0.0,           18575.0 / 48384.0,
                                         13525.0 / 55296.0, 277.0 / 14336.0, 1.0 / 4.0};

struct BeeOdeState {
    double v = 0.0, y = 0.0, acc = 0.0;  // acc is the running nectar integral
};

}  // namespace

BeeIntegrationResult integrate_optimal_bee(double eps_pen, double c, double gamma, double omega,
                                           double y0, double v0, double horizon, double tol,
                                           double forcing_scale) {
    if (tol <= 0.0) throw ParameterError("integrate_optimal_bee: tol <= 0");
    if (std::abs(v0) >= c) throw ParameterError("integrate_optimal_bee: |v0| >= c");
    if (horizon <= 0.0) throw ParameterError("integrate_optimal_bee: horizon <= 0");

    // The displayed stationarity system damps toward the tan singularity; the
    // nectar-seeking solution branch is its velocity-reversed flow, which
    // relaxes v toward the local nectar gradient instead.
    auto deriv = [&](double t, const BeeOdeState& s) -> BeeOdeState {
        const double g = M_PI * s.v / (2.0 * c);
        const double prefactor = 2.0 * c * std::cos(g) * std::cos(g) / M_PI;
        const double forcing = forcing_scale * 4.0 * c * std::cos(omega * t) *
                               std::cos(2.0 * M_PI * s.y) / eps_pen;
        BeeOdeState d;
        d.v = prefactor * (forcing + std::log(gamma) * std::tan(g));
        d.y = s.v;
        d.acc = nectar_field(s.y, t, omega);
        return d;
    };

    BeeIntegrationResult result;
    BeeOdeState state{v0, y0, 0.0};
    double t = 0.0;
    double h = std::min(1e-4, horizon);
    result.trajectory.push_back({t, state.v, state.y, nectar_field(state.y, t, omega)});

    const double margin = 1e-12;
    while (t < horizon) {
        h = std::min(h, horizon - t);
        if (h < 1e-12) {
            result.average_nectar = (t > 0.0) ? state.acc / t : 0.0;
            throw BeeStiffnessError("integrate_optimal_bee: step size underflow (stiffness)",
                                    std::move(result));
        }

        std::array<BeeOdeState, 6> k;
        bool singular = false;
        for (int stage = 0; stage < 6; ++stage) {
            BeeOdeState arg = state;
            for (int j = 0; j < stage; ++j) {
                arg.v += h * kCkA[stage][j] * k[j].v;
                arg.y += h * kCkA[stage][j] * k[j].y;
                arg.acc += h * kCkA[stage][j] * k[j].acc;
            }
            if (std::abs(arg.v) >= c - margin) {
                singular = true;
                break;
            }
            k[stage] = deriv(t + kCkC[stage] * h, arg);
        }
        if (singular) {
            h *= 0.5;
            continue;
        }

        BeeOdeState next = state, low = state;
        for (int stage = 0; stage < 6; ++stage) {
            next.v += h * kCkB5[stage] * k[stage].v;
            next.y += h * kCkB5[stage] * k[stage].y;
            next.acc += h * kCkB5[stage] * k[stage].acc;
            low.v += h * kCkB4[stage] * k[stage].v;
            low.y += h * kCkB4[stage] * k[stage].y;
            low.acc += h * kCkB4[stage] * k[stage].acc;
        }
        if (std::abs(next.v) >= c - margin) {
            h *= 0.5;
            continue;
        }

        const double err = std::max({std::abs(next.v - low.v) / (tol * (1.0 + std::abs(next.v))),
                                     std::abs(next.y - low.y) / (tol * (1.0 + std::abs(next.y))),
                                     std::abs(next.acc - low.acc) /
                                         (tol * (1.0 + std::abs(next.acc)))});
        if (err <= 1.0) {
            t += h;
            state = next;
            result.trajectory.push_back({t, state.v, state.y, nectar_field(state.y, t, omega)});
            h *= std::clamp(0.9 * std::pow(std::max(err, 1e-16), -0.2), 1.0, 5.0);
        } else {
            h *= std::clamp(0.9 * std::pow(err, -0.25), 0.1, 0.9);
        }
    }

    result.average_nectar = state.acc / horizon;
    return result;
}

}  // namespace esn
