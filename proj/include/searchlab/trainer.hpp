#pragma once
// Experience-augmented group policy optimization.
//
// Each iteration takes a batch of queries, samples a group of G rollouts per
// query from a frozen snapshot of the policy, bank and baseline table, scores
// them, standardizes rewards within each group, and applies one averaged
// score-function step. Baselines are folded in after every group is scored.
// The experience bank is regenerated from the window of trajectories since
// the previous update whenever the iteration is a multiple of the cadence.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchlab/agent.hpp"
#include "searchlab/experience.hpp"
#include "searchlab/policy.hpp"
#include "searchlab/reward.hpp"
#include "searchlab/synth_env.hpp"

namespace searchlab {

inline constexpr std::string_view kInstructions =
    "Answer the question. Reason inside <think></think>, then either call the search tool with "
    "<tool_call>query</tool_call> or give the final answer with <answer>answer</answer>.";

struct TrainConfig {
    int group_size = 12;
    int batch_queries = 16;
    double learning_rate = 0.05;
    int epochs = 8;
    int max_iterations = 0;  // 0 = no cap beyond epochs
    int max_steps = 6;
    std::uint64_t seed = 1;
    RewardConfig reward;
    int cadence = 5;
    bool experience_in_inference = true;
    bool use_experience = true;
    bool use_few_shot = true;
    double few_shot_threshold = 0.8;
    std::size_t few_shot_capacity = 64;
    double budget_prior = 1.0;
    double misread_prob = 0.05;
    double format_error_prob = 0.04;
    int top_k = kDefaultTopK;
    int threads = 1;
    int checkpoint_every = 5;  // 0 disables intermediate checkpoints

    AgentSettings agent_settings() const;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing fields keep their defaults; the reward section is not read here.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct RolloutGroup {
    std::string query_id;
    std::vector<Trajectory> trajectories;
    std::vector<RewardBreakdown> breakdowns;
    std::vector<double> rewards;
    std::vector<double> advantages;
    std::vector<std::vector<DecisionPoint>> traces;
    // Baseline each trajectory was scored against (pre-group snapshot).
    std::optional<int> baseline;
};

// (R_i - mean) / population std; all zeros when std < 1e-12.
std::vector<double> compute_advantages(const std::vector<double>& rewards);

// Runs G rollouts for one query from the same prompt. Rollout i is seeded
// with derive_seed(master_seed, query.id, group_index * G + i). Rewards are
// computed against `baselines` as given; the table is not modified.
RolloutGroup rollout_group(const PolicyState& policy, const KnowledgeBase& kb, const std::string& prompt,
                           const Query& query, int group_size, const AgentSettings& settings,
                           const BaselineTable& baselines, const RewardConfig& reward, std::uint64_t master_seed,
                           std::uint64_t group_index);

// Applies every trajectory of the group to the table.
void apply_baseline_observations(BaselineTable& table, const RolloutGroup& group, const RewardConfig& reward);

// (1/G) sum_i A_i sum_t grad log pi(d_t | x_t), evaluated at `policy`.
WeightMatrix policy_gradient(const PolicyState& policy, const RolloutGroup& group);

PolicyState policy_update(PolicyState policy, const RolloutGroup& group, double lr);

struct IterationMetrics {
    int iteration = 0;
    double mean_reward = 0.0;
    double mean_tc = 0.0;
    double f1 = 0.0;
    double em = 0.0;
    std::size_t bank_size = 0;
    std::size_t baseline_size = 0;
    bool bank_updated = false;
};

void to_json(nlohmann::json& j, const IterationMetrics& m);

struct Checkpoint {
    int iteration = 0;
    PolicyState policy;
    ExperienceBank bank;
    BaselineTable baselines;
};

struct TrainReport {
    PolicyState policy;
    ExperienceBank bank;
    BaselineTable baselines;
    FewShotPool few_shot;
    std::vector<IterationMetrics> metrics;
    std::vector<int> bank_update_steps;
    std::vector<int> skipped_updates;  // cadence steps where the summarizer failed
    std::vector<Checkpoint> checkpoints;
    int iterations = 0;
};

struct TrainHooks {
    std::function<void(int iteration, const RolloutGroup&)> on_group;
    std::function<void(const IterationMetrics&)> on_iteration;
    std::function<void(const std::string&)> on_warning;
};

TrainReport train(const TrainConfig& cfg, const World& world, Summarizer& summarizer, const TrainHooks& hooks = {});

struct Metrics {
    double f1_mean = 0.0;
    double em_mean = 0.0;
    double tc_mean = 0.0;
    double tc_em1 = 0.0;
    double tc_em0 = 0.0;
    std::size_t count = 0;
    std::size_t count_em1 = 0;
    std::size_t count_em0 = 0;
    std::optional<double> delta_pct;
    std::size_t tokens_total = 0;
    std::chrono::nanoseconds wall_time{0};
};

// 100 * (tc_em0 - tc_em1) / tc_em0; absent when tc_em0 is 0.
std::optional<double> delta_pct(double tc_em1, double tc_em0);

struct EvalRecord {
    std::string query_id;
    double f1 = 0.0;
    int em = 0;
    std::size_t tool_calls = 0;
    std::size_t tokens = 0;
};

EvalRecord score_for_eval(const Trajectory& traj, const Query& q);

Metrics compute_metrics(const std::vector<EvalRecord>& records);

struct EvalResult {
    Metrics metrics;
    std::vector<Trajectory> trajectories;
    std::vector<EvalRecord> records;
};

// Greedy decisions over every query of the world. The prompt carries the
// bank when with_experience is set and never carries a few-shot example.
EvalResult evaluate(const PolicyState& policy, const World& world, const TrainConfig& cfg, bool with_experience,
                    const ExperienceBank& bank);

}  // namespace searchlab
