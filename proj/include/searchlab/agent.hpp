#pragma once
// Toy search agent driven by a PolicyState.
//
// The agent parses the question template, chains "entity relation" searches
// hop by hop, and emits a tag-formatted transcript. It also reads the prompt:
// an efficiency guideline sets a per-hop search budget, a formatting
// guideline makes its emissions strict, and a worked example halves its
// formatting slip rate.
//
// Reading noise: the first read of each hop is a skim that, with probability
// misread_prob, takes the object of a neighbouring hit instead of the right
// one. Any later read of the same hop is careful. A wrong intermediate entity
// usually dead-ends on the next hop, which makes the agent back up one hop; a
// wrong final entity is only caught by an explicit verification search.

#include <optional>
#include <string>
#include <vector>

#include "searchlab/core_types.hpp"
#include "searchlab/policy.hpp"
#include "searchlab/rng.hpp"
#include "searchlab/synth_env.hpp"

namespace searchlab {

struct AgentSettings {
    int max_steps = 6;
    int top_k = kDefaultTopK;
    double misread_prob = 0.08;
    double format_error_prob = 0.04;
};

struct PromptDirectives {
    bool budget_per_hop = false;
    bool strict_format = false;
    bool has_example = false;
};

PromptDirectives parse_prompt_directives(std::string_view prompt);

struct AgentContext {
    Query query;
    std::string prompt;
    std::vector<Step> steps_so_far;
    std::vector<SearchHit> retrieved_facts;
    std::optional<int> budget_hint;

    // Fresh context; budget_hint is derived from the prompt and the question.
    static AgentContext start(Query query, std::string prompt);
};

enum class DecisionMode { Sample, Greedy };

struct DecisionPoint {
    FeatureVector features{};
    Decision decision = Decision::Continue;
};

struct RolloutOutput {
    Trajectory trajectory;
    std::vector<DecisionPoint> trace;
};

RolloutOutput rollout_traced(const PolicyState& policy, const KnowledgeBase& kb, AgentContext ctx,
                             const AgentSettings& settings, Rng& rng, DecisionMode mode = DecisionMode::Sample);

Trajectory rollout(const PolicyState& policy, const KnowledgeBase& kb, AgentContext ctx, const AgentSettings& settings,
                   Rng& rng, DecisionMode mode = DecisionMode::Sample);

}  // namespace searchlab
