#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "esn/environments.hpp"
#include "esn/oracles.hpp"
#include "esn/reservoir.hpp"
#include "esn/value_learning.hpp"

namespace esn {

inline constexpr const char* kVersion = "1.0.0";

enum class EnvKind { bee, market_maker };
enum class ReservoirKind { standard, structured };
enum class RunMode { offline_one_step, online };

struct ExperimentConfig {
    EnvKind env = EnvKind::bee;
    RunMode mode = RunMode::offline_one_step;

    ReservoirKind reservoir_kind = ReservoirKind::standard;
    Eigen::Index reservoir_size = 300;   // standard init
    double weight_range = 0.1;
    double spectral_target = 0.9;
    StructuredInitSpec structured;       // structured init

    double gamma = 0.5;
    double lambda = 1e-9;
    Eigen::Index washout = 100;
    Eigen::Index train_steps = 2000;     // l
    Eigen::Index eval_steps = 2000;      // L
    int candidate_count = 100;

    BeeWorldConfig bee;
    MarketMakerConfig mm;
    double mm_eta = 0.05;                // initial-policy mean reversion
    double mm_sigma_i = 1.0;             // initial-policy noise std

    StepSizeSchedule schedule;           // online mode
    double gamma_eff = 0.5;              // bootstrap discount for online mode
    Eigen::Index histogram_bins = 60;

    /// The fully resolved configuration, defaults included. Echoed into
    /// reports so that no default is silent.
    nlohmann::json echo() const;

    /// Parses and validates; rejects unknown keys, missing required keys, and
    /// out-of-range values with a ParameterError naming the field.
    static ExperimentConfig from_json(const nlohmann::json& j);
};

struct OnlineLog {
    std::vector<double> w_drift;            // ||W_k - W_{k-1}|| at decade boundaries
    std::vector<double> decade_residuals;   // mean squared TD error per decade window
    std::vector<Eigen::Index> decade_ends;  // step index closing each window
    double total_drift = 0.0;               // sum of ||W_k - W_{k-1}|| over the run
    double final_w_norm = 0.0;
};

/// Thrown when the online readout norm crosses the divergence guard; carries
/// the log accumulated up to the aborted step.
struct DivergenceError : NumericalError {
    OnlineLog partial;

    DivergenceError(const std::string& msg, OnlineLog log)
        : NumericalError(msg), partial(std::move(log)) {}
};

struct ExperimentReport {
    nlohmann::json config_echo;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;  // FNV-1a of version string + config echo
    std::string mode;               // "offline_one_step" | "online"
    std::string env;                // "bee" | "market_maker"
    double wall_clock_sec = 0.0;    // excluded from equality and determinism checks

    double initial_mean_reward = 0.0;
    double improved_mean_reward = 0.0;
    double train_residual = 0.0;     // Bellman residual of the fitted model on training data
    double improved_residual = 0.0;  // same model evaluated on the improved rollout
    double sigma_kappa = 0.0;        // autocorrelation condition number; 0 when singular
    bool sigma_singular = false;

    nlohmann::json oracle;  // closed-form / ODE ground truth for the env config

    Experience initial_experience;
    Experience improved_experience;

    std::vector<double> hist_edges;  // histogram of improved-policy positions / inventories
    std::vector<double> hist_mass;   // normalized to sum 1
    std::vector<double> hist_oracle_density;  // oracle stationary density at bin centers (MM)

    std::vector<std::array<double, 2>> values;   // (observation, fitted value) pairs
    std::vector<std::array<double, 2>> scatter;  // (inventory, action) pairs (MM)
    double scatter_slope = 0.0;
    double ks_statistic = 0.0;   // improved inventories vs derived stationary law (MM)
    double ks_threshold = 0.0;   // rejection threshold at significance 0.01
    bool ks_pass = false;

    OnlineLog online;

    /// Every numeric metric must be finite; throws ParameterError otherwise.
    void validate() const;

    nlohmann::json to_json() const;  // validates first
    static ExperimentReport from_json(const nlohmann::json& j);

    /// Equality modulo the wall-clock field.
    bool operator==(const ExperimentReport& other) const;
};

ExperimentReport run_offline_one_step(const ExperimentConfig& cfg, std::uint64_t seed);

ExperimentReport run_online(const ExperimentConfig& cfg, std::uint64_t seed);

/// Dispatches on cfg.mode.
ExperimentReport run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

/// Closed-form / ODE ground truth for the environment of cfg, exactly the
/// report's oracle section.
nlohmann::json oracle_summary(const ExperimentConfig& cfg);

/// Writes report.json, experience.csv, values.csv, histogram.csv, scatter.csv.
void emit_report(const ExperimentReport& report, const std::string& out_dir);

/// One-sample Kolmogorov-Smirnov statistic against a Gaussian N(0, std^2).
double ks_statistic_gaussian(std::vector<double> samples, double std_dev);

std::uint64_t fnv1a_hash(const std::string& data);

}  // namespace esn
