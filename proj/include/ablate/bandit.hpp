#pragma once

#include <map>
#include <set>
#include <string>

namespace ablate {

struct ArmStats {
    std::string arm_id;
    int pulls = 0;
    double mean_reward = 0.0;  // undefined until the first pull; never read at pulls == 0
    double sum_reward = 0.0;
    double prior_weight = 1.0;
};

struct BudgetTiers {
    int k_explore = 5;
    int k_base = 3;
    int k_exploit = 2;
};

// Arm selection state for one study. Mutated by a single writer between
// execution batches; see update().
struct BanditState {
    std::map<std::string, ArmStats> arms;
    int total_trials = 0;  // T: sum of pulls across arms
    int round = 0;
    int max_rounds = 5;
    double beta_base = 2.0;
    BudgetTiers budgets;
    double lambda = 0.01;
};

BanditState make_bandit_state(const std::map<std::string, double>& arm_weights, int max_rounds,
                              double beta_base, BudgetTiers budgets, double lambda);

// Three-phase exploration coefficient: 1.5*beta_base while round < 0.3R,
// 0.5*beta_base once round >= 0.7R, beta_base in between. Phase boundaries
// are evaluated on integers (round*10 vs R*3 and R*7) so there is no float
// boundary ambiguity.
double effective_beta(const BanditState& state);

// Unexplored arms first, by descending prior weight; once every arm has at
// least one pull, the arm maximizing mean + beta * sqrt(ln(T+1) / pulls).
// All ties break lexicographically on arm id.
std::string select_arm(const BanditState& state);

// Same policy restricted to a subset of arms (used by the orchestrator to
// skip arms whose candidate pool is exhausted).
std::string select_arm_among(const BanditState& state, const std::set<std::string>& eligible);

double ucb_score(const ArmStats& arm, int total_trials, double beta);

// Per-round candidate budget, tiered by how often the arm has been pulled:
// k_explore below 3 pulls, k_exploit above 10, k_base otherwise.
int generation_budget(const BanditState& state, const std::string& arm_id);

struct RewardInput {
    double baseline_score = 0.0;
    double observed_score = 0.0;
    double cost_gpu_hours = 0.0;
};

// r = |baseline - observed| - lambda * cost. May be negative; rejects
// non-finite inputs.
double compute_reward(const RewardInput& input, double lambda);

// Records one reward observation: increments the arm's pull count and the
// global trial count, folds the reward into the running mean.
void update(BanditState& state, const std::string& arm_id, double reward);

}  // namespace ablate
