#pragma once
// Multi-objective trajectory reward: token F1 accuracy, a hard format gate,
// and an exponential tool-call penalty measured against the fewest tool calls
// previously seen on a correct answer to the same query.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchlab/core_types.hpp"

namespace searchlab {

struct RewardConfig {
    double lambda = 0.75;      // decay strength of the tool penalty
    double theta_t = 0.8;      // F1 at or above which an answer counts as correct
    double w_alpha = 0.5;      // accuracy weight
    double w_beta = 0.5;       // tool weight
    double theta_r_bad = 0.3;  // totals below this are contrastive negatives

    void validate() const;
};

struct RewardBreakdown {
    double f1 = 0.0;
    int em = 0;
    int format_score = 0;  // -1 or 0
    double tool_score = 0.0;
    double total = 0.0;
    std::size_t tool_calls = 0;
    std::optional<int> baseline;
};

// SQuAD-style normalization: lowercase, drop punctuation, drop the articles
// a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);
std::vector<std::string> answer_tokens(std::string_view text);

double token_f1(std::string_view prediction, const std::vector<std::string>& golds);
int exact_match(std::string_view prediction, const std::vector<std::string>& golds);

// 0 iff every model emission in the transcript is well formed (a single
// emission is checked exactly as parse_response does), else -1.
int format_reward(std::string_view raw_text);

double tool_reward(std::size_t tool_calls, std::optional<int> baseline, double f1, const RewardConfig& cfg);

RewardBreakdown overall_reward(const Trajectory& traj, const std::vector<std::string>& golds,
                               std::optional<int> baseline, const RewardConfig& cfg);

class BaselineTable {
public:
    std::optional<int> get(const std::string& query_id) const;
    std::size_t size() const { return entries_.size(); }
    const std::map<std::string, int>& entries() const { return entries_; }

    // Records min(existing, tool_calls) when f1 >= theta_t; otherwise a no-op.
    void observe(const std::string& query_id, int tool_calls, double f1, const RewardConfig& cfg);

    bool operator==(const BaselineTable&) const = default;

private:
    std::map<std::string, int> entries_;
};

BaselineTable observe_for_baseline(BaselineTable table, const std::string& query_id, int tool_calls, double f1,
                                   const RewardConfig& cfg);

void to_json(nlohmann::json& j, const RewardConfig& c);
void from_json(const nlohmann::json& j, RewardConfig& c);
void to_json(nlohmann::json& j, const RewardBreakdown& b);

std::vector<nlohmann::json> baseline_records(const BaselineTable& table);
BaselineTable baseline_from_records(const std::vector<nlohmann::json>& records);

}  // namespace searchlab
