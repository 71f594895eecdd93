#include "esn/environments.hpp"

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "esn/errors.hpp"

namespace esn {

namespace {

double wrap_unit(double y) {
    double w = std::fmod(y, 1.0);
    if (w < 0.0) w += 1.0;
    return w;
}

Vector scalar_vec(double v) {
    Vector out(1);
    out << v;
    return out;
}

}  // namespace

double nectar(double y, double t, double omega) {
    return 1.0 + std::cos(omega * t) * std::sin(2.0 * M_PI * wrap_unit(y));
}

std::pair<BeeWorldState, double> bee_step(const BeeWorldState& state, double a,
                                          const BeeWorldConfig& cfg) {
    if (std::abs(a) >= cfg.max_step) throw ParameterError("bee_step: |action| >= max step");
    BeeWorldState next;
    next.position = wrap_unit(state.position + a);
    next.time = state.time + 1;
    const double reward = nectar(next.position, static_cast<double>(next.time), cfg.omega);
    return {next, reward};
}

double policy_bee_uniform(const BeeWorldConfig& cfg, RngStream& rng) {
    return rng.uniform(-cfg.max_step, cfg.max_step);
}

std::pair<MarketMakerState, double> mm_step(const MarketMakerState& state, double a,
                                            const MarketMakerConfig& cfg, RngStream& rng) {
    if (!std::isfinite(a)) throw ParameterError("mm_step: non-finite action");
    const double eps = cfg.time_increment;
    MarketMakerState next;
    next.inventory = state.inventory + eps * a +
                     cfg.volatility * std::sqrt(eps) * rng.gaussian(0.0, 1.0);
    next.time = state.time + 1;
    next.last_action = a;
    const double reward = eps * (cfg.baseline_profit - cfg.control_cost * a * a -
                                 cfg.inventory_cost * next.inventory * next.inventory);
    return {next, reward};
}

double policy_mm_initial(double y, double eta, double sigma_i, RngStream& rng) {
    if (eta < 0.0 || sigma_i < 0.0) throw ParameterError("policy_mm_initial: negative parameter");
    return rng.gaussian(0.0, sigma_i) - eta * y;
}

Experience rollout_bee(const BeeWorldConfig& cfg, BeeWorldState& state, Eigen::Index steps,
                       RngStream& rng) {
    return rollout_bee_policy(cfg, state, steps,
                              [&](double) { return policy_bee_uniform(cfg, rng); });
}

Experience rollout_bee_policy(const BeeWorldConfig& cfg, BeeWorldState& state, Eigen::Index steps,
                              const std::function<double(double obs)>& policy) {
    if (steps < 1) throw ParameterError("rollout: steps < 1");
    Experience exp;
    exp.env_id = "bee";
    exp.steps.reserve(static_cast<std::size_t>(steps));
    double obs = nectar(state.position, static_cast<double>(state.time), cfg.omega);
    for (Eigen::Index k = 0; k < steps; ++k) {
        const double a = policy(obs);
        auto [next, reward] = bee_step(state, a, cfg);
        exp.steps.push_back({scalar_vec(obs), scalar_vec(a), reward});
        state = next;
        obs = reward;  // the bee observes exactly the nectar it collects
    }
    return exp;
}

Experience rollout_mm(const MarketMakerConfig& cfg, MarketMakerState& state, double eta,
                      double sigma_i, Eigen::Index steps, RngStream& rng) {
    return rollout_mm_policy(cfg, state, steps, rng, [&](double obs) {
        return policy_mm_initial(obs, eta, sigma_i, rng);
    });
}

Experience rollout_mm_policy(const MarketMakerConfig& cfg, MarketMakerState& state,
                             Eigen::Index steps, RngStream& rng,
                             const std::function<double(double obs)>& policy) {
    if (steps < 1) throw ParameterError("rollout: steps < 1");
    Experience exp;
    exp.env_id = "market_maker";
    exp.steps.reserve(static_cast<std::size_t>(steps));
    for (Eigen::Index k = 0; k < steps; ++k) {
        const double obs = state.inventory;
        const double a = policy(obs);
        auto [next, reward] = mm_step(state, a, cfg, rng);
        exp.steps.push_back({scalar_vec(obs), scalar_vec(a), reward});
        state = next;
    }
    return exp;
}

std::string experience_to_csv(const Experience& exp) {
    std::ostringstream out;
    out.precision(17);
    const Eigen::Index obs_dim = exp.steps.empty() ? 0 : exp.steps.front().observation.size();
    const Eigen::Index act_dim = exp.steps.empty() ? 0 : exp.steps.front().action.size();
    out << "k";
    for (Eigen::Index i = 0; i < obs_dim; ++i) out << ",obs" << i;
    for (Eigen::Index i = 0; i < act_dim; ++i) out << ",action" << i;
    out << ",reward\n";
    for (Eigen::Index k = 0; k < exp.size(); ++k) {
        const auto& s = exp.steps[static_cast<std::size_t>(k)];
        out << k;
        for (Eigen::Index i = 0; i < obs_dim; ++i) out << ',' << s.observation(i);
        for (Eigen::Index i = 0; i < act_dim; ++i) out << ',' << s.action(i);
        out << ',' << s.reward << '\n';
    }
    return out.str();
}

nlohmann::json experience_to_json(const Experience& exp) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : exp.steps) {
        steps.push_back(
            {{"obs", std::vector<double>(s.observation.data(),
                                         s.observation.data() + s.observation.size())},
             {"action", std::vector<double>(s.action.data(), s.action.data() + s.action.size())},
             {"reward", s.reward}});
    }
    return {{"env", exp.env_id}, {"policy", exp.policy_id}, {"seed", exp.seed},
            {"steps", std::move(steps)}};
}

Experience experience_from_json(const nlohmann::json& j) {
    Experience exp;
    exp.env_id = j.at("env").get<std::string>();
    exp.policy_id = j.at("policy").get<std::string>();
    exp.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& js : j.at("steps")) {
        ExperienceStep s;
        const auto obs = js.at("obs").get<std::vector<double>>();
        const auto act = js.at("action").get<std::vector<double>>();
        s.observation = Eigen::Map<const Vector>(obs.data(), static_cast<Eigen::Index>(obs.size()));
        s.action = Eigen::Map<const Vector>(act.data(), static_cast<Eigen::Index>(act.size()));
        s.reward = js.at("reward").get<double>();
        exp.steps.push_back(std::move(s));
    }
    return exp;
}

}  // namespace esn
