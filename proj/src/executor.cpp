#include "ablate/executor.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ablate/errors.hpp"
#include "ablate/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ablate {

std::string to_string(RunStatus status) {
    return status == RunStatus::Success ? "success" : "failed";
}

std::string to_string(FailureCategory category) {
    switch (category) {
        case FailureCategory::MappingFailure: return "mapping_failure";
        case FailureCategory::EnvironmentFailure: return "environment_failure";
        case FailureCategory::RuntimeFailure: return "runtime_failure";
    }
    return "unknown";
}

MetricsRecord execute_simulated(const CandidateSpec& candidate, const SimulatedEnv& env,
                                std::uint64_t seed, double baseline_score,
                                const std::string& primary_metric) {
    auto it = env.find(candidate.arm_id);
    if (it == env.end())
        throw Error("execute_simulated: unknown arm '" + candidate.arm_id + "'");
    const SimulatedArmModel& model = it->second;

    CounterRng rng(seed, candidate.candidate_id);

    MetricsRecord record;
    record.cost_gpu_hours = candidate.estimated_cost;
    record.wall_seconds = 0.0;

    const double failure_draw = rng.next_uniform();
    if (failure_draw < model.failure_prob) {
        record.status = RunStatus::Failed;
        const double category_draw = rng.next_uniform();
        if (category_draw < 0.5)
            record.failure_category = FailureCategory::MappingFailure;
        else if (category_draw < 0.8)
            record.failure_category = FailureCategory::EnvironmentFailure;
        else
            record.failure_category = FailureCategory::RuntimeFailure;
        return record;
    }

    const double drawn = model.reward_std == 0.0
                             ? model.reward_mean
                             : rng.next_gaussian(model.reward_mean, model.reward_std);
    // Synthetic score placed so that |baseline - score| equals the drawn
    // reward observation (exactly, at zero cost).
    record.metrics[primary_metric] = baseline_score - drawn;
    record.status = RunStatus::Success;
    return record;
}

std::optional<std::map<std::string, double>> parse_metrics_file(const fs::path& file,
                                                                const std::string& primary_metric,
                                                                std::string* error_out) {
    auto fail = [&](const std::string& why) -> std::optional<std::map<std::string, double>> {
        if (error_out != nullptr) *error_out = why;
        return std::nullopt;
    };

    std::ifstream in(file);
    if (!in) return fail("metrics file missing: " + file.string());
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) return fail("metrics file is not valid JSON");
    if (!doc.is_object()) return fail("metrics file must be a JSON object");

    std::map<std::string, double> metrics;
    for (const auto& [key, value] : doc.items()) {
        if (!value.is_number()) return fail("metric '" + key + "' is not a number");
        metrics[key] = value.get<double>();
    }
    auto it = metrics.find(primary_metric);
    if (it == metrics.end()) return fail("primary metric '" + primary_metric + "' missing");
    if (!std::isfinite(it->second)) return fail("primary metric '" + primary_metric + "' not finite");
    return metrics;
}

namespace {

struct CommandResult {
    int exit_code = -1;
    bool timed_out = false;
    bool spawn_failed = false;
};

std::string expand_template(std::string text, const std::string& key, const std::string& value) {
    const std::string token = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
    return text;
}

CommandResult run_command(const std::string& command, const fs::path& cwd, double timeout_seconds,
                          const fs::path& stdout_file, const fs::path& stderr_file) {
    CommandResult result;

    const pid_t pid = fork();
    if (pid < 0) {
        result.spawn_failed = true;
        return result;
    }
    if (pid == 0) {
        // Child. Own process group so a timeout kill reaps grandchildren too.
        setpgid(0, 0);
        if (chdir(cwd.c_str()) != 0) _exit(127);
        const int out_fd =
            open(stdout_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        const int err_fd =
            open(stderr_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (out_fd >= 0) dup2(out_fd, STDOUT_FILENO);
        if (err_fd >= 0) dup2(err_fd, STDERR_FILENO);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(timeout_seconds);
    int status = 0;
    while (true) {
        const pid_t done = waitpid(pid, &status, WNOHANG);
        if (done == pid) break;
        if (done < 0) {
            result.spawn_failed = true;
            return result;
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            result.timed_out = true;
            return result;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return result;
}

}  // namespace

MetricsRecord execute_shell(const CandidateSpec& candidate, Workspace& ws,
                            const ShellExecutorOptions& options) {
    if (ws.state != WorkspaceState::Mutated)
        throw StateError("execute_shell: workspace is " + to_string(ws.state) +
                         ", expected mutated");
    if (options.timeout_seconds <= 0.0) throw Error("execute_shell: timeout must be positive");

    std::string command = options.command;
    command = expand_template(command, "workspace", ws.path.string());
    command = expand_template(command, "candidate_id", candidate.candidate_id);
    command = expand_template(command, "seed", std::to_string(options.seed));

    const fs::path log_dir =
        options.log_dir.empty() ? ws.path / "ablate_logs" : options.log_dir;
    fs::create_directories(log_dir);

    MetricsRecord record;
    record.cost_gpu_hours = candidate.estimated_cost;

    const auto started = std::chrono::steady_clock::now();
    const CommandResult run = run_command(command, ws.path, options.timeout_seconds,
                                          log_dir / "stdout.log", log_dir / "stderr.log");
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    // The workspace has been executed in whatever way the command managed;
    // state advances regardless of outcome so harvest can collect evidence.
    ws.state = WorkspaceState::Executed;

    if (run.spawn_failed) throw Error("execute_shell: failed to spawn command");
    if (run.timed_out || run.exit_code != 0) {
        record.status = RunStatus::Failed;
        record.failure_category = FailureCategory::RuntimeFailure;
        return record;
    }

    std::string why;
    auto metrics = parse_metrics_file(ws.path / kMetricsFileName, options.primary_metric, &why);
    if (!metrics.has_value()) {
        record.status = RunStatus::Failed;
        record.failure_category = FailureCategory::EnvironmentFailure;
        return record;
    }
    record.metrics = std::move(*metrics);
    auto cost_it = record.metrics.find("cost_gpu_hours");
    if (cost_it != record.metrics.end() && std::isfinite(cost_it->second) &&
        cost_it->second >= 0.0) {
        record.cost_gpu_hours = cost_it->second;
        record.metrics.erase(cost_it);
    } else {
        record.cost_gpu_hours = record.wall_seconds / 3600.0;
    }
    record.status = RunStatus::Success;
    return record;
}

}  // namespace ablate
