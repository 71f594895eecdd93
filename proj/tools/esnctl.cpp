#include <CLI11.hpp>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>
#include <vector>

#include "esn/errors.hpp"
#include "esn/experiment.hpp"

namespace {

constexpr int kExitConfigError = 1;
constexpr int kExitNumericalError = 2;

esn::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw esn::ParameterError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw esn::ParameterError(std::string("config is not valid JSON: ") + e.what());
    }
    return esn::ExperimentConfig::from_json(j);
}

int cmd_run(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
    const auto cfg = load_config(config_path);
    const auto report = esn::run_experiment(cfg, seed);
    esn::emit_report(report, out_dir);
    std::cout << "wrote " << out_dir << "/report.json (env=" << report.env
              << ", mode=" << report.mode << ", seed=" << seed << ")\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, std::uint64_t seeds, const std::string& out_dir) {
    const auto cfg = load_config(config_path);
    if (seeds == 0) throw esn::ParameterError("sweep: --seeds must be >= 1");

    std::vector<esn::ExperimentReport> reports(seeds);
    std::vector<std::exception_ptr> failures(seeds);
    std::atomic<std::uint64_t> next{0};
    const unsigned workers = std::max(1u, std::min<unsigned>(
        std::thread::hardware_concurrency(), static_cast<unsigned>(seeds)));

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::uint64_t s = next.fetch_add(1); s < seeds; s = next.fetch_add(1)) {
                try {
                    reports[s] = esn::run_experiment(cfg, s);
                } catch (...) {
                    failures[s] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (std::uint64_t s = 0; s < seeds; ++s)
        if (failures[s]) std::rethrow_exception(failures[s]);

    // Single writer; seed order makes the aggregate deterministic.
    nlohmann::json per_seed = nlohmann::json::array();
    double sum_initial = 0.0, sum_improved = 0.0;
    std::uint64_t wins = 0;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        const auto& r = reports[s];
        esn::emit_report(r, out_dir + "/seed_" + std::to_string(s));
        per_seed.push_back({{"seed", s},
                            {"initial_mean_reward", r.initial_mean_reward},
                            {"improved_mean_reward", r.improved_mean_reward},
                            {"train_residual", r.train_residual}});
        sum_initial += r.initial_mean_reward;
        sum_improved += r.improved_mean_reward;
        if (r.improved_mean_reward > r.initial_mean_reward) ++wins;
    }
    nlohmann::json agg = {
        {"seeds", seeds},
        {"config", cfg.echo()},
        {"mean_initial_reward", sum_initial / static_cast<double>(seeds)},
        {"mean_improved_reward", sum_improved / static_cast<double>(seeds)},
        {"improvement_wins", wins},
        {"per_seed", std::move(per_seed)},
    };
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/aggregate.json");
    out << agg.dump(2) << "\n";
    std::cout << "wrote " << out_dir << "/aggregate.json (" << seeds << " seeds, "
              << wins << " improved)\n";
    return 0;
}

int cmd_oracle(const std::string& env, const std::string& config_path) {
    const auto cfg = load_config(config_path);
    const std::string cfg_env = (cfg.env == esn::EnvKind::bee) ? "bee" : "mm";
    if (env != cfg_env)
        throw esn::ParameterError("oracle: --env '" + env + "' does not match config env");
    std::cout << esn::oracle_summary(cfg).dump(2) << "\n";
    return 0;
}

int cmd_validate(const std::string& config_path) {
    const auto cfg = load_config(config_path);
    std::cout << cfg.echo().dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Echo state network value-learning experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, oracle_env;
    std::uint64_t seed = 0, seeds = 1;

    auto* run = app.add_subcommand("run", "Run one seeded experiment");
    run->add_option("--config", config_path)->required();
    run->add_option("--seed", seed)->required();
    run->add_option("--out", out_dir)->required();

    auto* sweep = app.add_subcommand("sweep", "Run seeds 0..n-1 across a worker pool");
    sweep->add_option("--config", config_path)->required();
    sweep->add_option("--seeds", seeds)->required();
    sweep->add_option("--out", out_dir)->required();

    auto* oracle = app.add_subcommand("oracle", "Print analytic ground truth for a config");
    oracle->add_option("--env", oracle_env)->required()->check(CLI::IsMember({"bee", "mm"}));
    oracle->add_option("--config", config_path)->required();

    auto* validate = app.add_subcommand("validate", "Validate a config and echo it");
    validate->add_option("--config", config_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, seed, out_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, seeds, out_dir);
        if (oracle->parsed()) return cmd_oracle(oracle_env, config_path);
        return cmd_validate(config_path);
    } catch (const esn::ParameterError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const esn::SingularityError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumericalError;
    } catch (const esn::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericalError;
    }
}
