#include "esn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "esn/errors.hpp"

namespace esn {

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ParameterError("config: unknown key '" + key + "' in " + where);
}

double require_number(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw ParameterError("config: missing key '" + key + "'");
    if (!j.at(key).is_number()) throw ParameterError("config: '" + key + "' must be a number");
    return j.at(key).get<double>();
}

double number_or(const nlohmann::json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ParameterError("config: '" + key + "' must be a number");
    return j.at(key).get<double>();
}

Vector scalar_vec(double v) {
    Vector out(1);
    out << v;
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

nlohmann::json ExperimentConfig::echo() const {
    nlohmann::json j;
    j["env"] = (env == EnvKind::bee) ? "bee" : "market_maker";
    j["mode"] = (mode == RunMode::offline_one_step) ? "offline_one_step" : "online";
    if (reservoir_kind == ReservoirKind::standard) {
        j["reservoir"] = {{"kind", "standard"},
                          {"n", reservoir_size},
                          {"weight_range", weight_range},
                          {"spectral_target", spectral_target}};
    } else {
        j["reservoir"] = {{"kind", "structured"},
                          {"N", structured.feature_count},
                          {"T0", structured.memory_horizon},
                          {"R", structured.ball_radius},
                          {"M_T0", structured.input_bound}};
    }
    j["gamma"] = gamma;
    j["lambda"] = lambda;
    j["washout"] = washout;
    j["train_steps"] = train_steps;
    j["eval_steps"] = eval_steps;
    j["candidates"] = candidate_count;
    j["histogram_bins"] = histogram_bins;
    if (env == EnvKind::bee) {
        j["bee"] = {{"max_step", bee.max_step}, {"omega", bee.omega}};
    } else {
        j["mm"] = {{"control_cost", mm.control_cost},
                   {"inventory_cost", mm.inventory_cost},
                   {"volatility", mm.volatility},
                   {"time_increment", mm.time_increment},
                   {"baseline_profit", mm.baseline_profit},
                   {"eta", mm_eta},
                   {"sigma_i", mm_sigma_i}};
    }
    if (mode == RunMode::online)
        j["online"] = {{"a", schedule.a}, {"b", schedule.b}, {"gamma_eff", gamma_eff}};
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParameterError("config: document must be a JSON object");
    reject_unknown_keys(j,
                        {"env", "mode", "reservoir", "gamma", "lambda", "washout", "train_steps",
                         "eval_steps", "candidates", "histogram_bins", "bee", "mm", "online"},
                        "top level");

    ExperimentConfig cfg;
    const std::string env = j.value("env", "");
    if (env == "bee")
        cfg.env = EnvKind::bee;
    else if (env == "market_maker")
        cfg.env = EnvKind::market_maker;
    else
        throw ParameterError("config: env must be 'bee' or 'market_maker'");

    const std::string mode = j.value("mode", "");
    if (mode == "offline_one_step")
        cfg.mode = RunMode::offline_one_step;
    else if (mode == "online")
        cfg.mode = RunMode::online;
    else
        throw ParameterError("config: mode must be 'offline_one_step' or 'online'");

    if (!j.contains("reservoir") || !j.at("reservoir").is_object())
        throw ParameterError("config: missing reservoir object");
    const auto& res = j.at("reservoir");
    const std::string kind = res.value("kind", "");
    if (kind == "standard") {
        reject_unknown_keys(res, {"kind", "n", "weight_range", "spectral_target"}, "reservoir");
        cfg.reservoir_kind = ReservoirKind::standard;
        cfg.reservoir_size = static_cast<Eigen::Index>(require_number(res, "n"));
        cfg.weight_range = number_or(res, "weight_range", 0.1);
        cfg.spectral_target = number_or(res, "spectral_target", 0.9);
        if (cfg.reservoir_size < 1) throw ParameterError("config: reservoir n < 1");
        if (cfg.weight_range <= 0.0 || cfg.spectral_target <= 0.0)
            throw ParameterError("config: reservoir scales must be positive");
    } else if (kind == "structured") {
        reject_unknown_keys(res, {"kind", "N", "T0", "R", "M_T0"}, "reservoir");
        cfg.reservoir_kind = ReservoirKind::structured;
        cfg.structured.feature_count = static_cast<int>(require_number(res, "N"));
        cfg.structured.memory_horizon = static_cast<int>(require_number(res, "T0"));
        cfg.structured.ball_radius = number_or(res, "R", 1.0);
        cfg.structured.input_bound = number_or(res, "M_T0", 1.0);
        cfg.structured.input_dim = 2;
        if (cfg.structured.feature_count < 1 || cfg.structured.memory_horizon < 0 ||
            cfg.structured.ball_radius <= 0.0 || cfg.structured.input_bound <= 0.0)
            throw ParameterError("config: invalid structured reservoir parameters");
    } else {
        throw ParameterError("config: reservoir kind must be 'standard' or 'structured'");
    }

    cfg.gamma = require_number(j, "gamma");
    if (cfg.gamma < 0.0 || cfg.gamma >= 1.0) throw ParameterError("config: gamma outside [0,1)");
    cfg.lambda = require_number(j, "lambda");
    if (cfg.lambda < 0.0) throw ParameterError("config: lambda < 0");
    cfg.washout = static_cast<Eigen::Index>(require_number(j, "washout"));
    cfg.train_steps = static_cast<Eigen::Index>(require_number(j, "train_steps"));
    cfg.eval_steps = static_cast<Eigen::Index>(number_or(j, "eval_steps",
                                                         static_cast<double>(cfg.train_steps)));
    cfg.candidate_count = static_cast<int>(require_number(j, "candidates"));
    cfg.histogram_bins = static_cast<Eigen::Index>(number_or(j, "histogram_bins", 60));
    if (cfg.washout < 0) throw ParameterError("config: washout < 0");
    if (cfg.train_steps < 2) throw ParameterError("config: train_steps < 2");
    if (std::max<Eigen::Index>(cfg.washout, 1) >= cfg.train_steps)
        throw ParameterError("config: washout leaves no training samples");
    if (cfg.eval_steps < 1) throw ParameterError("config: eval_steps < 1");
    if (cfg.candidate_count < 1) throw ParameterError("config: candidates < 1");
    if (cfg.histogram_bins < 1) throw ParameterError("config: histogram_bins < 1");

    if (cfg.env == EnvKind::bee) {
        if (j.contains("mm")) throw ParameterError("config: 'mm' block with env 'bee'");
        const auto& bee = j.contains("bee") ? j.at("bee") : nlohmann::json::object();
        reject_unknown_keys(bee, {"max_step", "omega"}, "bee");
        cfg.bee.max_step = number_or(bee, "max_step", 0.1);
        cfg.bee.omega = number_or(bee, "omega", 2.0 * M_PI / 50.0);
        if (cfg.bee.max_step <= 0.0) throw ParameterError("config: bee.max_step <= 0");
        if (cfg.bee.omega < 0.0) throw ParameterError("config: bee.omega < 0");
    } else {
        if (j.contains("bee")) throw ParameterError("config: 'bee' block with env 'market_maker'");
        const auto& mm = j.contains("mm") ? j.at("mm") : nlohmann::json::object();
        reject_unknown_keys(mm,
                            {"control_cost", "inventory_cost", "volatility", "time_increment",
                             "baseline_profit", "eta", "sigma_i"},
                            "mm");
        cfg.mm.control_cost = number_or(mm, "control_cost", 1.0);
        cfg.mm.inventory_cost = number_or(mm, "inventory_cost", 1.0);
        cfg.mm.volatility = number_or(mm, "volatility", 1.0);
        cfg.mm.time_increment = number_or(mm, "time_increment", 1.0);
        cfg.mm.baseline_profit = number_or(mm, "baseline_profit", 0.0);
        cfg.mm_eta = number_or(mm, "eta", 0.05);
        cfg.mm_sigma_i = number_or(mm, "sigma_i", 1.0);
        if (cfg.mm.control_cost <= 0.0 || cfg.mm.inventory_cost <= 0.0 ||
            cfg.mm.volatility <= 0.0 || cfg.mm.time_increment <= 0.0)
            throw ParameterError("config: mm costs, volatility, time_increment must be positive");
        if (cfg.mm_eta < 0.0 || cfg.mm_sigma_i < 0.0)
            throw ParameterError("config: mm policy parameters must be non-negative");
    }

    if (cfg.mode == RunMode::online) {
        const auto& online = j.contains("online") ? j.at("online") : nlohmann::json::object();
        reject_unknown_keys(online, {"a", "b", "gamma_eff"}, "online");
        cfg.schedule.a = number_or(online, "a", 1.0);
        cfg.schedule.b = number_or(online, "b", 100.0);
        cfg.gamma_eff = number_or(online, "gamma_eff", cfg.gamma);
        if (cfg.schedule.a <= 0.0 || cfg.schedule.b < 0.0)
            throw ParameterError("config: online schedule requires a > 0, b >= 0");
        if (cfg.gamma_eff < 0.0 || cfg.gamma_eff > 1.0)
            throw ParameterError("config: online gamma_eff outside [0,1]");
    } else if (j.contains("online")) {
        throw ParameterError("config: 'online' block with mode 'offline_one_step'");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Report plumbing
// ---------------------------------------------------------------------------

std::uint64_t fnv1a_hash(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw ParameterError(std::string("report: non-finite metric: ") + what);
}

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v) check_finite(x, what);
}

}  // namespace

void ExperimentReport::validate() const {
    check_finite(initial_mean_reward, "initial_mean_reward");
    check_finite(improved_mean_reward, "improved_mean_reward");
    check_finite(train_residual, "train_residual");
    check_finite(improved_residual, "improved_residual");
    check_finite(sigma_kappa, "sigma_kappa");
    check_finite(scatter_slope, "scatter_slope");
    check_finite(ks_statistic, "ks_statistic");
    check_finite(ks_threshold, "ks_threshold");
    check_finite(wall_clock_sec, "wall_clock_sec");
    check_finite(hist_edges, "hist_edges");
    check_finite(hist_mass, "hist_mass");
    check_finite(hist_oracle_density, "hist_oracle_density");
    check_finite(online.w_drift, "online.w_drift");
    check_finite(online.decade_residuals, "online.decade_residuals");
    check_finite(online.total_drift, "online.total_drift");
    check_finite(online.final_w_norm, "online.final_w_norm");
    for (const auto& p : values) {
        check_finite(p[0], "values");
        check_finite(p[1], "values");
    }
    for (const auto& p : scatter) {
        check_finite(p[0], "scatter");
        check_finite(p[1], "scatter");
    }
}

nlohmann::json ExperimentReport::to_json() const {
    validate();
    nlohmann::json j;
    j["version"] = kVersion;
    j["config"] = config_echo;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["mode"] = mode;
    j["env"] = env;
    j["wall_clock_sec"] = wall_clock_sec;
    j["metrics"] = {{"initial_mean_reward", initial_mean_reward},
                    {"improved_mean_reward", improved_mean_reward},
                    {"train_residual", train_residual},
                    {"improved_residual", improved_residual},
                    {"sigma_kappa", sigma_kappa},
                    {"sigma_singular", sigma_singular}};
    if (env == "market_maker" && config_echo.contains("mm")) {
        // Per-step cost derived from reward = eps (r - cost).
        const double eps = config_echo["mm"]["time_increment"].get<double>();
        const double r = config_echo["mm"]["baseline_profit"].get<double>();
        j["metrics"]["initial_mean_cost"] = r - initial_mean_reward / eps;
        j["metrics"]["improved_mean_cost"] = r - improved_mean_reward / eps;
    }
    j["oracle"] = oracle;
    j["initial_experience"] = experience_to_json(initial_experience);
    j["improved_experience"] = experience_to_json(improved_experience);
    j["histogram"] = {{"edges", hist_edges},
                      {"mass", hist_mass},
                      {"oracle_density", hist_oracle_density}};
    j["values"] = values;
    j["scatter"] = {{"points", scatter},
                    {"slope", scatter_slope},
                    {"ks_statistic", ks_statistic},
                    {"ks_threshold", ks_threshold},
                    {"ks_pass", ks_pass}};
    j["online"] = {{"w_drift", online.w_drift},
                   {"decade_residuals", online.decade_residuals},
                   {"decade_ends", online.decade_ends},
                   {"total_drift", online.total_drift},
                   {"final_w_norm", online.final_w_norm}};
    return j;
}

ExperimentReport ExperimentReport::from_json(const nlohmann::json& j) {
    ExperimentReport r;
    r.config_echo = j.at("config");
    r.config_hash = j.at("config_hash").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mode = j.at("mode").get<std::string>();
    r.env = j.at("env").get<std::string>();
    r.wall_clock_sec = j.at("wall_clock_sec").get<double>();
    const auto& m = j.at("metrics");
    r.initial_mean_reward = m.at("initial_mean_reward").get<double>();
    r.improved_mean_reward = m.at("improved_mean_reward").get<double>();
    r.train_residual = m.at("train_residual").get<double>();
    r.improved_residual = m.at("improved_residual").get<double>();
    r.sigma_kappa = m.at("sigma_kappa").get<double>();
    r.sigma_singular = m.at("sigma_singular").get<bool>();
    r.oracle = j.at("oracle");
    r.initial_experience = experience_from_json(j.at("initial_experience"));
    r.improved_experience = experience_from_json(j.at("improved_experience"));
    r.hist_edges = j.at("histogram").at("edges").get<std::vector<double>>();
    r.hist_mass = j.at("histogram").at("mass").get<std::vector<double>>();
    r.hist_oracle_density = j.at("histogram").at("oracle_density").get<std::vector<double>>();
    r.values = j.at("values").get<std::vector<std::array<double, 2>>>();
    const auto& sc = j.at("scatter");
    r.scatter = sc.at("points").get<std::vector<std::array<double, 2>>>();
    r.scatter_slope = sc.at("slope").get<double>();
    r.ks_statistic = sc.at("ks_statistic").get<double>();
    r.ks_threshold = sc.at("ks_threshold").get<double>();
    r.ks_pass = sc.at("ks_pass").get<bool>();
    const auto& on = j.at("online");
    r.online.w_drift = on.at("w_drift").get<std::vector<double>>();
    r.online.decade_residuals = on.at("decade_residuals").get<std::vector<double>>();
    r.online.decade_ends = on.at("decade_ends").get<std::vector<Eigen::Index>>();
    r.online.total_drift = on.at("total_drift").get<double>();
    r.online.final_w_norm = on.at("final_w_norm").get<double>();
    return r;
}

bool ExperimentReport::operator==(const ExperimentReport& other) const {
    nlohmann::json a = to_json();
    nlohmann::json b = other.to_json();
    a["wall_clock_sec"] = 0.0;
    b["wall_clock_sec"] = 0.0;
    return a == b;
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

namespace {

ReservoirParams build_reservoir(const ExperimentConfig& cfg, RngStream& rng) {
    if (cfg.reservoir_kind == ReservoirKind::standard)
        return init_standard(cfg.reservoir_size, 2, cfg.weight_range, cfg.spectral_target, rng);
    return init_structured(cfg.structured, rng);
}

std::vector<Vector> draw_candidates(const ExperimentConfig& cfg, RngStream& rng) {
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(cfg.candidate_count));
    for (int i = 0; i < cfg.candidate_count; ++i) {
        if (cfg.env == EnvKind::bee) {
            double a = rng.uniform(-cfg.bee.max_step, cfg.bee.max_step);
            while (std::abs(a) >= cfg.bee.max_step)
                a = rng.uniform(-cfg.bee.max_step, cfg.bee.max_step);
            out.push_back(scalar_vec(a));
        } else {
            out.push_back(scalar_vec(rng.gaussian(0.0, 1.0)));
        }
    }
    return out;
}

double mean_reward(const Experience& exp) {
    double acc = 0.0;
    for (const auto& s : exp.steps) acc += s.reward;
    return acc / static_cast<double>(exp.size());
}

void build_histogram(const std::vector<double>& samples, double lo, double hi, Eigen::Index bins,
                     std::vector<double>& edges, std::vector<double>& mass) {
    edges.resize(static_cast<std::size_t>(bins) + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (Eigen::Index i = 0; i <= bins; ++i)
        edges[static_cast<std::size_t>(i)] = lo + width * static_cast<double>(i);
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    for (double x : samples) {
        auto idx = static_cast<Eigen::Index>(std::floor((x - lo) / width));
        idx = std::clamp<Eigen::Index>(idx, 0, bins - 1);  // outliers land in edge bins
        counts[static_cast<std::size_t>(idx)] += 1.0;
    }
    const double total = static_cast<double>(samples.size());
    mass.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) mass[i] = counts[i] / total;
}

nlohmann::json bee_oracle_json(const ExperimentConfig& cfg) {
    const double eps_pen = 1e-5;
    const double horizon = 250.0;
    const double tol = 1e-6;
    const double gamma = (cfg.gamma > 0.0 && cfg.gamma < 1.0) ? cfg.gamma : 0.5;
    const auto res =
        integrate_optimal_bee(eps_pen, cfg.bee.max_step, gamma, cfg.bee.omega, 0.0, 0.0, horizon,
                              tol);
    return {{"average_nectar", res.average_nectar},
            {"eps_pen", eps_pen},
            {"horizon", horizon},
            {"tol", tol},
            {"gamma", gamma},
            {"omega", cfg.bee.omega}};
}

nlohmann::json mm_oracle_json(const ExperimentConfig& cfg) {
    const auto d = mm_discrete(cfg.mm.control_cost, cfg.mm.inventory_cost, cfg.gamma,
                               cfg.mm.volatility, cfg.mm.baseline_profit);
    const auto c = mm_continuous(cfg.mm.control_cost, cfg.mm.inventory_cost, -std::log(cfg.gamma),
                                 cfg.mm.volatility, cfg.mm.baseline_profit);
    auto mean_cost = [&](double g) {
        const double var = cfg.mm.volatility * cfg.mm.volatility / (g * (2.0 - g));
        return (cfg.mm.control_cost * g * g + cfg.mm.inventory_cost) * var;
    };
    return {{"p", d.p},
            {"stationary_std", d.stationary_std()},
            {"greedy_gain", d.greedy_gain()},
            {"greedy_stationary_std", d.greedy_stationary_std()},
            {"value_at_zero", d.value_at(0.0)},
            {"mean_cost_gain_p", mean_cost(d.p)},
            {"mean_cost_greedy_gain", mean_cost(d.greedy_gain())},
            {"continuous_h", c.feedback_gain},
            {"continuous_stationary_variance", c.stationary_variance()}};
}

struct EnvDriver {
    const ExperimentConfig& cfg;
    RngStream& rng;
    BeeWorldState bee{};
    MarketMakerState mm{};

    double current_obs() const {
        if (cfg.env == EnvKind::bee)
            return nectar(bee.position, static_cast<double>(bee.time), cfg.bee.omega);
        return mm.inventory;
    }

    double initial_action(RngStream& policy_rng) {
        if (cfg.env == EnvKind::bee) return policy_bee_uniform(cfg.bee, policy_rng);
        return policy_mm_initial(mm.inventory, cfg.mm_eta, cfg.mm_sigma_i, policy_rng);
    }

    double step(double action) {  // returns the reward; advances the state
        if (cfg.env == EnvKind::bee) {
            auto [next, reward] = bee_step(bee, action, cfg.bee);
            bee = next;
            return reward;
        }
        auto [next, reward] = mm_step(mm, action, cfg.mm, rng);
        mm = next;
        return reward;
    }

    double hist_sample() const {  // post-step position / inventory
        return cfg.env == EnvKind::bee ? bee.position : mm.inventory;
    }
};

}  // namespace

double ks_statistic_gaussian(std::vector<double> samples, double std_dev) {
    if (samples.empty()) throw ParameterError("ks_statistic_gaussian: no samples");
    if (std_dev <= 0.0) throw ParameterError("ks_statistic_gaussian: std <= 0");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = 0.5 * std::erfc(-samples[i] / (std_dev * std::sqrt(2.0)));
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
    }
    return d;
}

ExperimentReport run_offline_one_step(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream root(seed);
    RngStream rng_res = root.substream(0);
    RngStream rng_env = root.substream(1);
    RngStream rng_cand = root.substream(2);

    const ReservoirParams params = build_reservoir(cfg, rng_res);

    ExperimentReport rep;
    rep.config_echo = cfg.echo();
    rep.config_hash = fnv1a_hash(std::string(kVersion) + rep.config_echo.dump());
    rep.seed = seed;
    rep.mode = "offline_one_step";
    rep.env = (cfg.env == EnvKind::bee) ? "bee" : "market_maker";

    // Phase 1: rollout under the initial policy.
    EnvDriver driver{cfg, rng_env};
    Experience train;
    if (cfg.env == EnvKind::bee) {
        train = rollout_bee(cfg.bee, driver.bee, cfg.train_steps, rng_env);
    } else {
        train = rollout_mm(cfg.mm, driver.mm, cfg.mm_eta, cfg.mm_sigma_i, cfg.train_steps,
                           rng_env);
    }
    train.policy_id = "initial";
    train.seed = seed;
    rep.initial_mean_reward = mean_reward(train);

    // Phase 2: ridge fit of the Bellman regression.
    ValueModel model = fit_offline(params, train, cfg.gamma, cfg.lambda, cfg.washout);
    rep.train_residual = bellman_residual(params, model, train, cfg.washout);

    const ReservoirTrajectory traj =
        reservoir_run(params, Vector::Zero(params.n()), train.input_matrix());
    const auto diag = autocorr_diagnostics(traj, std::max<Eigen::Index>(cfg.washout, 1),
                                           cfg.spectral_target);
    rep.sigma_singular = !std::isfinite(diag.kappa);
    rep.sigma_kappa = rep.sigma_singular ? 0.0 : diag.kappa;

    const Eigen::Index first = std::max<Eigen::Index>(cfg.washout, 1);
    const Eigen::Index stride = std::max<Eigen::Index>(1, (cfg.train_steps - first) / 2000);
    for (Eigen::Index k = first; k < cfg.train_steps; k += stride)
        rep.values.push_back({train.steps[static_cast<std::size_t>(k)].observation(0),
                              model.W.dot(traj.row(k))});

    // Phase 3: greedy rollout continuing the reservoir state from training.
    Vector x = traj.row(traj.rows() - 1);
    Experience improved;
    improved.env_id = train.env_id;
    improved.policy_id = "greedy_one_step";
    improved.seed = seed;
    std::vector<double> hist_samples;
    hist_samples.reserve(static_cast<std::size_t>(cfg.eval_steps));
    double obs = driver.current_obs();
    for (Eigen::Index k = 0; k < cfg.eval_steps; ++k) {
        const auto candidates = draw_candidates(cfg, rng_cand);
        const GreedyChoice choice = greedy_action(params, model, x, scalar_vec(obs), candidates);
        const double a = choice.action(0);
        const double reward = driver.step(a);
        improved.steps.push_back({scalar_vec(obs), scalar_vec(a), reward});
        if (cfg.env == EnvKind::market_maker) rep.scatter.push_back({obs, a});
        Vector z(2);
        z << obs, a;
        x = reservoir_step(params, x, z);
        hist_samples.push_back(driver.hist_sample());
        obs = (cfg.env == EnvKind::bee) ? reward : driver.mm.inventory;
    }
    rep.improved_mean_reward = mean_reward(improved);
    rep.improved_residual = bellman_residual(params, model, improved, cfg.washout);
    rep.initial_experience = std::move(train);
    rep.improved_experience = std::move(improved);

    // Phase 4: oracle comparison and distribution diagnostics.
    if (cfg.env == EnvKind::bee) {
        rep.oracle = bee_oracle_json(cfg);
        build_histogram(hist_samples, 0.0, 1.0, cfg.histogram_bins, rep.hist_edges, rep.hist_mass);
    } else {
        rep.oracle = mm_oracle_json(cfg);
        build_histogram(hist_samples, -6.0, 6.0, cfg.histogram_bins, rep.hist_edges,
                        rep.hist_mass);
        const auto sol = mm_discrete(cfg.mm.control_cost, cfg.mm.inventory_cost, cfg.gamma,
                                     cfg.mm.volatility, cfg.mm.baseline_profit);
        for (std::size_t i = 0; i + 1 < rep.hist_edges.size(); ++i)
            rep.hist_oracle_density.push_back(
                sol.stationary_density(0.5 * (rep.hist_edges[i] + rep.hist_edges[i + 1]), sol.p));
        rep.ks_statistic = ks_statistic_gaussian(hist_samples, sol.stationary_std());
        // One-sample KS rejection threshold at significance 0.01.
        rep.ks_threshold = 1.6276236115189504 / std::sqrt(static_cast<double>(cfg.eval_steps));
        rep.ks_pass = rep.ks_statistic <= rep.ks_threshold;
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (const auto& p : rep.scatter) {
            sx += p[0];
            sy += p[1];
            sxx += p[0] * p[0];
            sxy += p[0] * p[1];
        }
        const double n = static_cast<double>(rep.scatter.size());
        const double denom = sxx - sx * sx / n;
        rep.scatter_slope = (denom > 0.0) ? (sxy - sx * sy / n) / denom : 0.0;
    }

    rep.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.validate();
    return rep;
}

ExperimentReport run_online(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream root(seed);
    RngStream rng_res = root.substream(0);
    RngStream rng_env = root.substream(1);
    RngStream rng_cand = root.substream(2);

    const ReservoirParams params = build_reservoir(cfg, rng_res);

    ExperimentReport rep;
    rep.config_echo = cfg.echo();
    rep.config_hash = fnv1a_hash(std::string(kVersion) + rep.config_echo.dump());
    rep.seed = seed;
    rep.mode = "online";
    rep.env = (cfg.env == EnvKind::bee) ? "bee" : "market_maker";

    ValueModel model;
    model.W = Vector::Zero(params.n());
    model.gamma = cfg.gamma;
    model.lambda = 0.0;

    EnvDriver driver{cfg, rng_env};
    Experience exp;
    exp.env_id = rep.env;
    exp.policy_id = "behavior_initial";
    exp.seed = seed;

    OnlineLog log;
    Vector x = Vector::Zero(params.n());
    double obs = driver.current_obs();
    double prev_reward = 0.0;
    double last_drift = 0.0;
    double window_td2 = 0.0;
    Eigen::Index window_count = 0;
    Eigen::Index next_decade = 10;
    std::vector<double> hist_samples;
    hist_samples.reserve(static_cast<std::size_t>(cfg.train_steps));

    for (Eigen::Index k = 0; k < cfg.train_steps; ++k) {
        if (k >= 1) {  // reward at time 0 is unobserved, as in the offline fit
            const auto candidates = draw_candidates(cfg, rng_cand);
            const auto res = online_step(params, model, x, scalar_vec(obs), candidates,
                                         prev_reward, cfg.schedule.alpha(k), cfg.gamma_eff);
            last_drift = (res.model.W - model.W).norm();
            log.total_drift += last_drift;
            window_td2 += res.td * res.td;
            ++window_count;
            model = res.model;
            if (model.W.norm() > 1e6) {
                log.final_w_norm = model.W.norm();
                throw DivergenceError("run_online: readout norm exceeded 1e6 at step " +
                                          std::to_string(k),
                                      std::move(log));
            }
        }
        const double a = driver.initial_action(rng_env);
        const double reward = driver.step(a);
        exp.steps.push_back({scalar_vec(obs), scalar_vec(a), reward});
        Vector z(2);
        z << obs, a;
        x = reservoir_step(params, x, z);
        hist_samples.push_back(driver.hist_sample());
        prev_reward = reward;
        obs = (cfg.env == EnvKind::bee) ? reward : driver.mm.inventory;

        if (k + 1 == next_decade || k + 1 == cfg.train_steps) {
            if (window_count > 0) {
                log.decade_residuals.push_back(window_td2 / static_cast<double>(window_count));
                log.w_drift.push_back(last_drift);
                log.decade_ends.push_back(k + 1);
                window_td2 = 0.0;
                window_count = 0;
            }
            while (next_decade <= k + 1) next_decade *= 10;
        }
    }
    log.final_w_norm = model.W.norm();

    rep.initial_mean_reward = mean_reward(exp);
    rep.improved_mean_reward = rep.initial_mean_reward;  // no improvement phase in this mode
    rep.train_residual = log.decade_residuals.empty() ? 0.0 : log.decade_residuals.back();
    rep.initial_experience = std::move(exp);
    rep.improved_experience.env_id = rep.env;
    rep.improved_experience.policy_id = "none";
    rep.online = std::move(log);
    rep.oracle = (cfg.env == EnvKind::bee) ? bee_oracle_json(cfg) : mm_oracle_json(cfg);
    if (cfg.env == EnvKind::bee) {
        build_histogram(hist_samples, 0.0, 1.0, cfg.histogram_bins, rep.hist_edges, rep.hist_mass);
    } else {
        build_histogram(hist_samples, -6.0, 6.0, cfg.histogram_bins, rep.hist_edges,
                        rep.hist_mass);
    }

    rep.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.validate();
    return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
    return cfg.mode == RunMode::offline_one_step ? run_offline_one_step(cfg, seed)
                                                 : run_online(cfg, seed);
}

nlohmann::json oracle_summary(const ExperimentConfig& cfg) {
    return (cfg.env == EnvKind::bee) ? bee_oracle_json(cfg) : mm_oracle_json(cfg);
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_report: cannot open " + path.string());
    out << content;
    if (!out) throw std::runtime_error("emit_report: write failed for " + path.string());
}

}  // namespace

void emit_report(const ExperimentReport& report, const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    write_file(dir / "report.json", report.to_json().dump(2) + "\n");

    const Experience& exp = report.improved_experience.steps.empty()
                                ? report.initial_experience
                                : report.improved_experience;
    write_file(dir / "experience.csv", experience_to_csv(exp));

    std::ostringstream values;
    values.precision(17);
    values << "observation,value\n";
    for (const auto& p : report.values) values << p[0] << ',' << p[1] << '\n';
    write_file(dir / "values.csv", values.str());

    std::ostringstream hist;
    hist.precision(17);
    const bool with_density = !report.hist_oracle_density.empty();
    hist << (with_density ? "bin_lo,bin_hi,mass,oracle_density\n" : "bin_lo,bin_hi,mass\n");
    for (std::size_t i = 0; i < report.hist_mass.size(); ++i) {
        hist << report.hist_edges[i] << ',' << report.hist_edges[i + 1] << ','
             << report.hist_mass[i];
        if (with_density) hist << ',' << report.hist_oracle_density[i];
        hist << '\n';
    }
    write_file(dir / "histogram.csv", hist.str());

    std::ostringstream scatter;
    scatter.precision(17);
    scatter << "inventory,action\n";
    for (const auto& p : report.scatter) scatter << p[0] << ',' << p[1] << '\n';
    write_file(dir / "scatter.csv", scatter.str());
}

}  // namespace esn
