#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ablate/config.hpp"
#include "ablate/errors.hpp"
#include "ablate/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace ablate;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> budget;
    std::optional<int> max_parallel;
    std::optional<std::string> out;
};

void apply_overrides(StudyConfig& config, const Overrides& overrides, bool out_dir_in_config) {
    if (overrides.seed) config.seed = *overrides.seed;
    if (overrides.budget) config.budget = *overrides.budget;
    if (overrides.max_parallel) config.max_parallel = *overrides.max_parallel;
    if (overrides.out) {
        config.out_root = *overrides.out;
    } else if (!out_dir_in_config) {
        const char* env = std::getenv("ABLATE_OUT_DIR");
        if (env != nullptr && *env != '\0') config.out_root = env;
    }
}

int report_violations(const ValidationResult& result) {
    for (const auto& v : result.violations)
        std::cout << "violation [" << v.code << "] " << v.message << "\n";
    if (result.ok()) {
        std::cout << "config ok\n";
        return 0;
    }
    std::cout << result.violations.size() << " violation(s)\n";
    return 1;
}

std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

StudyConfig load_checked(const fs::path& config_path, const Overrides& overrides) {
    if (!fs::exists(config_path))
        throw ConfigError("config file not found: " + config_path.string());
    const bool out_in_config = [&] {
        std::ifstream in(config_path);
        nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
        return !doc.is_discarded() && doc.contains("run") && doc["run"].contains("out_dir");
    }();
    StudyConfig config = load_study_config(config_path);
    apply_overrides(config, overrides, out_in_config);
    const auto issues = validate_study_config(config);
    if (!issues.ok()) {
        std::ostringstream msg;
        msg << "config has " << issues.violations.size() << " violation(s): ";
        for (std::size_t i = 0; i < issues.violations.size(); ++i) {
            if (i > 0) msg << "; ";
            msg << issues.violations[i].message;
        }
        throw ConfigError(msg.str());
    }
    return config;
}

int cmd_run(const fs::path& config_path, const Overrides& overrides) {
    StudyConfig config = load_checked(config_path, overrides);
    StudyResult result = run_study(config);
    std::cout << "run " << result.report.run_id << " finished: " << result.report.execution_attempts
              << " attempts over " << result.report.rounds_completed << " rounds (seed "
              << result.report.seed << ")\n";
    if (result.report.stats.exec_rate.has_value())
        std::cout << "exec rate " << *result.report.stats.exec_rate << "\n";
    std::cout << "archive: " << result.run_dir.string() << "\n";
    return 0;
}

int cmd_validate(const fs::path& config_path) {
    if (!fs::exists(config_path))
        throw ConfigError("config file not found: " + config_path.string());
    StudyConfig config = load_study_config(config_path);
    return report_violations(validate_study_config(config));
}

int cmd_simulate(const fs::path& config_path, const Overrides& overrides,
                 const std::string& policies_csv, int trials, const std::string& format) {
    if (trials < 1) throw ConfigError("--trials must be >= 1");
    StudyConfig config = load_checked(config_path, overrides);
    if (config.executor != ExecutorKind::Simulated)
        throw ConfigError("simulate needs a simulated executor config");
    if (!config.ground_truth.has_value())
        throw ConfigError("simulate needs ground truth in the config");

    std::vector<Policy> policies;
    std::stringstream ss(policies_csv);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) policies.push_back(policy_from_string(token));
    }
    if (policies.empty()) throw ConfigError("--policies is empty");

    std::vector<SweepRow> rows;
    for (Policy policy : policies) rows.push_back(run_policy_sweep(config, policy, trials));

    std::ostringstream csv;
    csv << "policy,trials,mean_acc_at_k,mean_regret,mean_exec_rate\n";
    char buf[160];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.6g,%.6g,%.6g\n", to_string(row.policy).c_str(),
                      row.trials, row.mean_acc, row.mean_regret, row.mean_exec);
        csv << buf;
    }
    fs::create_directories(config.out_root);
    const fs::path csv_path = config.out_root / "simulate.csv";
    std::ofstream out(csv_path, std::ios::trunc);
    out << csv.str();
    out.close();

    if (format == "csv") {
        std::cout << csv.str();
    } else {
        std::cout << "policy comparison over " << trials << " trials (k=" << config.k << ")\n";
        for (const auto& row : rows) {
            std::snprintf(buf, sizeof(buf), "  %-10s acc@k %.4f  regret %.4f  exec %.4f\n",
                          to_string(row.policy).c_str(), row.mean_acc, row.mean_regret,
                          row.mean_exec);
            std::cout << buf;
        }
        std::cout << "table written to " << csv_path.string() << "\n";
    }
    return 0;
}

int cmd_replay(const fs::path& log_arg, std::optional<double> lambda_override,
               const std::optional<std::string>& out) {
    fs::path log_path = log_arg;
    if (fs::is_directory(log_path)) log_path /= "events.log";
    ReplayOptions opts;
    opts.lambda_override = lambda_override;
    StudyReport report = replay(log_path, opts);
    const std::string rendered = emit_report(report, ReportFormat::Json);

    if (out.has_value()) {
        fs::create_directories(fs::path(*out).parent_path().empty()
                                   ? fs::path(".")
                                   : fs::path(*out).parent_path());
        std::ofstream file(*out, std::ios::binary | std::ios::trunc);
        file << rendered;
        std::cout << "recomputed report written to " << *out << "\n";
    }

    const fs::path original = log_path.parent_path() / "report.json";
    if (!lambda_override.has_value() && fs::exists(original)) {
        if (read_text(original) == rendered) {
            std::cout << "replay matches the original report byte-for-byte\n";
        } else {
            std::cerr << "replay does not match the stored report\n";
            return 1;
        }
    } else if (lambda_override.has_value()) {
        std::cout << "report recomputed with lambda=" << *lambda_override
                  << " (flagged as recomputed, not original)\n";
    }
    return 0;
}

int cmd_report(const fs::path& run_arg, const std::string& format) {
    fs::path dir = run_arg;
    if (!fs::is_directory(dir)) dir = dir.parent_path();
    const fs::path file = dir / (format == "json" ? "report.json" : "report.txt");
    if (!fs::exists(file)) throw Error("no report at " + file.string());
    std::cout << read_text(file);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive ablation-study orchestrator"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;
    std::string policies = "ucb,random,heuristic";
    int trials = 100;
    std::string format = "text";
    std::string log_path;
    std::string run_path;
    std::optional<double> lambda_override;
    std::optional<std::string> out_flag;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("-c,--config", config_path, "study config file")->required();
        sub->add_option("--seed", [&](const std::vector<std::string>& v) {
            overrides.seed = std::stoull(v.front());
            return true;
        }, "override the study seed");
        sub->add_option("--budget", [&](const std::vector<std::string>& v) {
            overrides.budget = std::stoi(v.front());
            return true;
        }, "override the execution budget");
        sub->add_option("--max-parallel", [&](const std::vector<std::string>& v) {
            overrides.max_parallel = std::stoi(v.front());
            return true;
        }, "override max parallel executions");
        sub->add_option("--out", [&](const std::vector<std::string>& v) {
            overrides.out = v.front();
            out_flag = v.front();
            return true;
        }, "output directory (default: ABLATE_OUT_DIR or ./ablate_out)");
    };

    CLI::App* run = app.add_subcommand("run", "run one ablation study");
    add_common(run, true);

    CLI::App* simulate = app.add_subcommand("simulate", "compare policies on a simulated study");
    add_common(simulate, true);
    simulate->add_option("--policies", policies, "comma-separated: ucb,random,heuristic");
    simulate->add_option("--trials", trials, "seeded trials per policy");
    simulate->add_option("--format", format, "text or csv");

    CLI::App* validate = app.add_subcommand("validate", "check a config and its component space");
    validate->add_option("-c,--config", config_path, "study config file")->required();

    CLI::App* replay_cmd = app.add_subcommand("replay", "recompute a report from events.log");
    replay_cmd->add_option("log", log_path, "events.log or run directory")->required();
    replay_cmd->add_option("--lambda", [&](const std::vector<std::string>& v) {
        lambda_override = std::stod(v.front());
        return true;
    }, "recompute rewards with a different cost penalty");
    replay_cmd->add_option("--out", [&](const std::vector<std::string>& v) {
        out_flag = v.front();
        return true;
    }, "write the recomputed report here");

    CLI::App* report_cmd = app.add_subcommand("report", "print a stored study report");
    report_cmd->add_option("run", run_path, "run directory or report path")->required();
    report_cmd->add_option("--format", format, "json or text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, overrides);
        if (simulate->parsed()) return cmd_simulate(config_path, overrides, policies, trials, format);
        if (validate->parsed()) return cmd_validate(config_path);
        if (replay_cmd->parsed()) return cmd_replay(log_path, lambda_override, out_flag);
        if (report_cmd->parsed()) return cmd_report(run_path, format);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
