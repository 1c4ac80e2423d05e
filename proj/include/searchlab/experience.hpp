#pragma once
// Contrastive experiential memory: trajectories are split into good/bad sets
// by reward, summarized with a templated explanation of their reward, and
// distilled into natural-language guidelines that are injected into every
// rollout prompt alongside a sampled high-reward example.

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchlab/core_types.hpp"
#include "searchlab/reward.hpp"

namespace searchlab {

struct TrajectorySummary {
    std::string query_id;
    std::string trajectory_digest;
    double f1 = 0.0;
    double reward = 0.0;
    std::string explanation;

    // Structured facts behind the digest, used by the rule-based summarizer.
    std::size_t tool_calls = 0;
    bool well_formed = true;
    bool truncated = false;
    bool searched_before_answer = false;

    bool operator==(const TrajectorySummary&) const = default;
};

enum class GuidelineCategory { SuccessStrategies, PitfallsToAvoid, ReasoningGuidelines };

std::string_view category_key(GuidelineCategory c);    // success_strategies, ...
std::string_view category_title(GuidelineCategory c);  // Success Strategies, ...

struct ExperienceDelta {
    std::vector<std::string> success_strategies;
    std::vector<std::string> pitfalls_to_avoid;
    std::vector<std::string> reasoning_guidelines;

    bool empty() const { return success_strategies.empty() && pitfalls_to_avoid.empty() && reasoning_guidelines.empty(); }
    bool operator==(const ExperienceDelta&) const = default;
};

struct ExperienceBank {
    std::vector<std::string> success_strategies;
    std::vector<std::string> pitfalls_to_avoid;
    std::vector<std::string> reasoning_guidelines;
    int last_update_step = 0;
    int cadence = 5;
    std::size_t max_entries_per_category = 5;

    std::vector<std::string>& entries(GuidelineCategory c);
    const std::vector<std::string>& entries(GuidelineCategory c) const;
    std::size_t size() const;
    bool empty() const { return size() == 0; }

    // New guidelines not already present are appended; the oldest entries are
    // dropped once a category exceeds max_entries_per_category.
    void merge(const ExperienceDelta& delta);

    bool operator==(const ExperienceBank&) const = default;
};

struct FewShotEntry {
    std::string trajectory_digest;
    double reward = 0.0;

    bool operator==(const FewShotEntry&) const = default;
};

class FewShotPool {
public:
    explicit FewShotPool(std::size_t capacity = 64, double threshold = 0.8) : capacity_(capacity), threshold_(threshold) {}

    // Inserts when reward >= threshold, evicting the oldest entry at capacity.
    bool offer(std::string digest, double reward);

    const std::deque<FewShotEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    double threshold() const { return threshold_; }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    double threshold_;
    std::deque<FewShotEntry> entries_;
};

struct ScoredTrajectory {
    Trajectory trajectory;
    RewardBreakdown breakdown;
};

struct Categorized {
    // Indices into the categorized input.
    std::vector<std::size_t> good;
    std::vector<std::size_t> bad;
    std::vector<std::size_t> neutral;
};

// good: total == 1 exactly; bad: total < theta_r_bad; neutral: the rest.
Categorized categorize(const std::vector<ScoredTrajectory>& items, const RewardConfig& cfg);

std::string trajectory_digest(const Trajectory& traj);

TrajectorySummary summarize(const Trajectory& traj, const RewardBreakdown& breakdown, std::optional<int> baseline,
                            const RewardConfig& cfg = {});

// Failure talking to an external summarizer; the caller may retry later.
class SummarizerUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Summarizer {
public:
    virtual ~Summarizer() = default;
    virtual ExperienceDelta generate(const std::vector<TrajectorySummary>& good,
                                     const std::vector<TrajectorySummary>& bad) = 0;
};

namespace guideline {
inline constexpr std::string_view kMinimalCalls =
    "Use minimal function calls to directly answer the question: at most one search per hop.";
inline constexpr std::string_view kThinkPattern =
    "Always use <think> pattern: reason inside <think></think> before every <tool_call> or <answer>.";
inline constexpr std::string_view kNoRepeat = "Avoid repeating searches without answering; stop once the evidence chain is complete.";
inline constexpr std::string_view kNoEarlyAnswer = "Do not answer before every hop of the question has been resolved by a search.";
inline constexpr std::string_view kSearchDetails =
    "You should always search for specific details after identifying key subjects.";
inline constexpr std::string_view kCommit =
    "Answer as soon as the retrieved facts cover every entity and relation in the question.";
}  // namespace guideline

struct SummaryStats {
    std::size_t count = 0;
    double mean_tool_calls = 0.0;
    double format_failure_rate = 0.0;
    double mean_f1 = 0.0;
    double search_before_answer_rate = 0.0;
    double truncation_rate = 0.0;
    double wrong_answer_rate = 0.0;
};

SummaryStats summary_stats(const std::vector<TrajectorySummary>& set);

// Deterministic contrast of aggregate statistics between the two sets,
// mapped onto fixed template guidelines.
class RuleBasedSummarizer final : public Summarizer {
public:
    ExperienceDelta generate(const std::vector<TrajectorySummary>& good,
                             const std::vector<TrajectorySummary>& bad) override;
};

// Throws std::invalid_argument when both sets are empty.
ExperienceDelta generate_experience(const std::vector<TrajectorySummary>& good,
                                    const std::vector<TrajectorySummary>& bad, Summarizer& summarizer);

// Regenerates and merges on steps that are multiples of the bank cadence.
// Summarizer failures propagate and leave the input bank untouched.
ExperienceBank maybe_update(ExperienceBank bank, int step, const std::vector<TrajectorySummary>& good,
                            const std::vector<TrajectorySummary>& bad, Summarizer& summarizer);

std::optional<std::string> sample_few_shot(const FewShotPool& pool, std::uint64_t rng_seed);

std::string assemble_prompt(std::string_view instructions, const ExperienceBank& bank,
                            const std::optional<std::string>& few_shot, const Query& q);

// Caps applied when feeding a window of trajectories to the summarizer.
inline constexpr std::size_t kSummaryCap = 8;

// Summaries of the (at most `cap`) highest-reward good and lowest-reward bad
// trajectories of a window.
std::pair<std::vector<TrajectorySummary>, std::vector<TrajectorySummary>> contrastive_summaries(
    const std::vector<ScoredTrajectory>& window, const RewardConfig& cfg, std::size_t cap = kSummaryCap);

void to_json(nlohmann::json& j, const TrajectorySummary& s);
void from_json(const nlohmann::json& j, TrajectorySummary& s);
void to_json(nlohmann::json& j, const ExperienceDelta& d);
void from_json(const nlohmann::json& j, ExperienceDelta& d);

std::vector<nlohmann::json> bank_records(const ExperienceBank& bank);
ExperienceBank bank_from_records(const std::vector<nlohmann::json>& records);

}  // namespace searchlab
