#pragma once
// Linear softmax decision head over {Search, Continue, Answer}.

#include <array>
#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

#include "searchlab/core_types.hpp"
#include "searchlab/rng.hpp"

namespace searchlab {

enum class Feature {
    Bias = 0,
    StepsSoFar,       // steps taken / max_steps
    SearchesSoFar,    // searches issued / max_steps
    Coverage,         // fraction of question terms covered by facts the agent accepted
    CandidateFound,   // 1 when the agent holds a complete answer candidate
    Verified,         // 1 once the candidate has been confirmed by a careful re-read
    Hop0Cue,          // 1 when the question states a fact ("given that ...")
    BudgetSatisfied,  // +1 searches >= hinted budget, -1 below it, 0 without a hint
};

inline constexpr std::size_t kNumFeatures = 8;

std::string_view feature_name(Feature f);
std::optional<Feature> feature_from_name(std::string_view name);

using FeatureVector = std::array<double, kNumFeatures>;
using Probabilities = std::array<double, kNumDecisions>;
using WeightMatrix = std::array<std::array<double, kNumDecisions>, kNumFeatures>;

struct PolicyState {
    WeightMatrix weights{};  // weights[feature][decision]
    double temperature = 1.0;

    double& weight(Feature f, Decision d) { return weights[static_cast<std::size_t>(f)][static_cast<std::size_t>(d)]; }
    double weight(Feature f, Decision d) const {
        return weights[static_cast<std::size_t>(f)][static_cast<std::size_t>(d)];
    }

    // Zero weights except an instruction-following prior on the budget
    // feature: answer once the hinted budget is met, keep searching below it.
    static PolicyState with_prior(double budget_prior);

    bool is_finite() const;
    bool operator==(const PolicyState&) const = default;
};

std::array<double, kNumDecisions> logits(const PolicyState& policy, const FeatureVector& x);
Probabilities probabilities(const PolicyState& policy, const FeatureVector& x);
double log_prob(const PolicyState& policy, const FeatureVector& x, Decision action);

// d/dw[f][d] log pi(action | x) = (1[d == action] - p_d) * x_f / temperature.
WeightMatrix log_prob_gradient(const PolicyState& policy, const FeatureVector& x, Decision action);

// Argmax; ties go to the lowest decision index.
Decision greedy_decision(const PolicyState& policy, const FeatureVector& x);
Decision sample_decision(const PolicyState& policy, const FeatureVector& x, Rng& rng);

void add_scaled(WeightMatrix& into, const WeightMatrix& g, double scale);

void to_json(nlohmann::json& j, const PolicyState& p);
void from_json(const nlohmann::json& j, PolicyState& p);

}  // namespace searchlab
