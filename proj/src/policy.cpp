#include "searchlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace searchlab {

namespace {

constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "bias", "steps_so_far", "searches_so_far", "coverage", "candidate_found", "verified", "hop0_cue", "budget_satisfied"};

}  // namespace

std::string_view feature_name(Feature f) { return kFeatureNames[static_cast<std::size_t>(f)]; }

std::optional<Feature> feature_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        if (kFeatureNames[i] == name) return static_cast<Feature>(i);
    }
    return std::nullopt;
}

PolicyState PolicyState::with_prior(double budget_prior) {
    PolicyState p;
    p.weight(Feature::BudgetSatisfied, Decision::Answer) = budget_prior;
    p.weight(Feature::BudgetSatisfied, Decision::Search) = -budget_prior;
    return p;
}

bool PolicyState::is_finite() const {
    if (!std::isfinite(temperature) || temperature <= 0.0) return false;
    for (const auto& row : weights) {
        for (double w : row) {
            if (!std::isfinite(w)) return false;
        }
    }
    return true;
}

std::array<double, kNumDecisions> logits(const PolicyState& policy, const FeatureVector& x) {
    std::array<double, kNumDecisions> z{};
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (x[f] == 0.0) continue;
        for (std::size_t d = 0; d < kNumDecisions; ++d) z[d] += policy.weights[f][d] * x[f];
    }
    for (double& v : z) v /= policy.temperature;
    return z;
}

Probabilities probabilities(const PolicyState& policy, const FeatureVector& x) {
    const auto z = logits(policy, x);
    const double zmax = *std::max_element(z.begin(), z.end());
    Probabilities p{};
    double sum = 0.0;
    for (std::size_t d = 0; d < kNumDecisions; ++d) {
        p[d] = std::exp(z[d] - zmax);
        sum += p[d];
    }
    for (double& v : p) v /= sum;
    return p;
}

double log_prob(const PolicyState& policy, const FeatureVector& x, Decision action) {
    const auto z = logits(policy, x);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    return z[static_cast<std::size_t>(action)] - zmax - std::log(sum);
}

WeightMatrix log_prob_gradient(const PolicyState& policy, const FeatureVector& x, Decision action) {
    const auto p = probabilities(policy, x);
    WeightMatrix g{};
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        for (std::size_t d = 0; d < kNumDecisions; ++d) {
            const double indicator = d == static_cast<std::size_t>(action) ? 1.0 : 0.0;
            g[f][d] = (indicator - p[d]) * x[f] / policy.temperature;
        }
    }
    return g;
}

Decision greedy_decision(const PolicyState& policy, const FeatureVector& x) {
    const auto z = logits(policy, x);
    return static_cast<Decision>(std::distance(z.begin(), std::max_element(z.begin(), z.end())));
}

Decision sample_decision(const PolicyState& policy, const FeatureVector& x, Rng& rng) {
    const auto p = probabilities(policy, x);
    double u = rng.uniform();
    for (std::size_t d = 0; d + 1 < kNumDecisions; ++d) {
        if (u < p[d]) return static_cast<Decision>(d);
        u -= p[d];
    }
    return static_cast<Decision>(kNumDecisions - 1);
}

void add_scaled(WeightMatrix& into, const WeightMatrix& g, double scale) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        for (std::size_t d = 0; d < kNumDecisions; ++d) into[f][d] += scale * g[f][d];
    }
}

void to_json(nlohmann::json& j, const PolicyState& p) {
    nlohmann::json weights = nlohmann::json::array();
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        for (std::size_t d = 0; d < kNumDecisions; ++d) {
            weights.push_back({{"feature", kFeatureNames[f]},
                               {"decision", to_string(static_cast<Decision>(d))},
                               {"weight", p.weights[f][d]}});
        }
    }
    j = nlohmann::json{{"temperature", p.temperature}, {"weights", weights}};
}

void from_json(const nlohmann::json& j, PolicyState& p) {
    p = PolicyState{};
    j.at("temperature").get_to(p.temperature);
    for (const auto& w : j.at("weights")) {
        const auto f = feature_from_name(w.at("feature").get<std::string>());
        const auto d = decision_from_string(w.at("decision").get<std::string>());
        if (!f || !d) throw std::invalid_argument("unknown policy weight key: " + w.dump());
        p.weight(*f, *d) = w.at("weight").get<double>();
    }
}

}  // namespace searchlab
