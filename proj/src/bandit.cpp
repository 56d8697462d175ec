#include "ablate/bandit.hpp"

#include <cmath>

#include "ablate/errors.hpp"

namespace ablate {

BanditState make_bandit_state(const std::map<std::string, double>& arm_weights, int max_rounds,
                              double beta_base, BudgetTiers budgets, double lambda) {
    if (max_rounds < 1) throw Error("bandit: max_rounds must be >= 1");
    if (!(beta_base > 0.0)) throw Error("bandit: beta_base must be positive");
    if (lambda < 0.0) throw Error("bandit: lambda must be non-negative");
    if (budgets.k_explore < 1 || budgets.k_base < 1 || budgets.k_exploit < 1)
        throw Error("bandit: generation budgets must be positive");

    BanditState state;
    state.max_rounds = max_rounds;
    state.beta_base = beta_base;
    state.budgets = budgets;
    state.lambda = lambda;
    for (const auto& [arm_id, weight] : arm_weights) {
        if (weight < 0.0) throw Error("bandit: arm '" + arm_id + "' has negative weight");
        ArmStats stats;
        stats.arm_id = arm_id;
        stats.prior_weight = weight;
        state.arms.emplace(arm_id, std::move(stats));
    }
    return state;
}

double effective_beta(const BanditState& state) {
    const long r10 = 10L * state.round;
    if (r10 < 3L * state.max_rounds) return 1.5 * state.beta_base;
    if (r10 >= 7L * state.max_rounds) return 0.5 * state.beta_base;
    return state.beta_base;
}

double ucb_score(const ArmStats& arm, int total_trials, double beta) {
    return arm.mean_reward +
           beta * std::sqrt(std::log(static_cast<double>(total_trials) + 1.0) /
                            static_cast<double>(arm.pulls));
}

std::string select_arm(const BanditState& state) {
    std::set<std::string> all;
    for (const auto& [id, _] : state.arms) all.insert(id);
    return select_arm_among(state, all);
}

std::string select_arm_among(const BanditState& state, const std::set<std::string>& eligible) {
    if (eligible.empty()) throw Error("select_arm: no arms to select from");

    const ArmStats* best_unexplored = nullptr;
    for (const auto& id : eligible) {
        auto it = state.arms.find(id);
        if (it == state.arms.end()) throw Error("select_arm: unknown arm '" + id + "'");
        const ArmStats& arm = it->second;
        if (arm.pulls != 0) continue;
        // Strict > keeps the lexicographically-first arm on weight ties,
        // since iteration is in ascending id order.
        if (best_unexplored == nullptr || arm.prior_weight > best_unexplored->prior_weight)
            best_unexplored = &arm;
    }
    if (best_unexplored != nullptr) return best_unexplored->arm_id;

    const double beta = effective_beta(state);
    const ArmStats* best = nullptr;
    double best_score = 0.0;
    for (const auto& id : eligible) {
        const ArmStats& arm = state.arms.at(id);
        const double score = ucb_score(arm, state.total_trials, beta);
        if (best == nullptr || score > best_score) {
            best = &arm;
            best_score = score;
        }
    }
    return best->arm_id;
}

int generation_budget(const BanditState& state, const std::string& arm_id) {
    auto it = state.arms.find(arm_id);
    if (it == state.arms.end()) throw Error("generation_budget: unknown arm '" + arm_id + "'");
    const int pulls = it->second.pulls;
    if (pulls < 3) return state.budgets.k_explore;
    if (pulls > 10) return state.budgets.k_exploit;
    return state.budgets.k_base;
}

double compute_reward(const RewardInput& input, double lambda) {
    if (!std::isfinite(input.baseline_score) || !std::isfinite(input.observed_score) ||
        !std::isfinite(input.cost_gpu_hours) || !std::isfinite(lambda))
        throw Error("compute_reward: non-finite input");
    if (input.cost_gpu_hours < 0.0) throw Error("compute_reward: negative cost");
    return std::abs(input.baseline_score - input.observed_score) - lambda * input.cost_gpu_hours;
}

void update(BanditState& state, const std::string& arm_id, double reward) {
    auto it = state.arms.find(arm_id);
    if (it == state.arms.end()) throw Error("update: unknown arm '" + arm_id + "'");
    ArmStats& arm = it->second;
    arm.pulls += 1;
    arm.sum_reward += reward;
    arm.mean_reward = arm.sum_reward / static_cast<double>(arm.pulls);
    state.total_trials += 1;
}

}  // namespace ablate
