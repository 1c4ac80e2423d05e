#include <doctest.h>

#include <cmath>

#include "searchlab/policy.hpp"

using namespace searchlab;

namespace {

PolicyState random_policy(Rng& rng, double scale = 2.0) {
    PolicyState p;
    for (auto& row : p.weights) {
        for (double& w : row) w = (rng.uniform() * 2.0 - 1.0) * scale;
    }
    p.temperature = 0.5 + rng.uniform();
    return p;
}

FeatureVector random_features(Rng& rng) {
    FeatureVector x{};
    x[0] = 1.0;
    for (std::size_t f = 1; f < kNumFeatures; ++f) x[f] = rng.uniform() * 2.0 - 1.0;
    return x;
}

}  // namespace

TEST_CASE("zero weights give a uniform distribution") {
    const PolicyState p;
    FeatureVector x{};
    x[0] = 1.0;
    for (double v : probabilities(p, x)) CHECK(v == doctest::Approx(1.0 / 3.0));
    CHECK(log_prob(p, x, Decision::Answer) == doctest::Approx(-std::log(3.0)));
}

TEST_CASE("hand-computed softmax") {
    PolicyState p;
    p.weight(Feature::Bias, Decision::Search) = std::log(2.0);
    p.weight(Feature::Bias, Decision::Answer) = std::log(5.0);
    FeatureVector x{};
    x[0] = 1.0;
    // exp logits 2, 1, 5 over a total of 8.
    const auto pr = probabilities(p, x);
    CHECK(pr[0] == doctest::Approx(0.25));
    CHECK(pr[1] == doctest::Approx(0.125));
    CHECK(pr[2] == doctest::Approx(0.625));
}

TEST_CASE("probabilities are a distribution and log_prob matches") {
    Rng rng(8);
    for (int i = 0; i < 2000; ++i) {
        const auto p = random_policy(rng, 50.0);
        const auto x = random_features(rng);
        const auto pr = probabilities(p, x);
        double sum = 0.0;
        for (double v : pr) {
            CHECK(v >= 0.0);
            CHECK(std::isfinite(v));
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t d = 0; d < kNumDecisions; ++d) {
            if (pr[d] > 1e-300) CHECK(log_prob(p, x, static_cast<Decision>(d)) == doctest::Approx(std::log(pr[d])).epsilon(1e-9));
        }
    }
}

TEST_CASE("log_prob_gradient agrees with central finite differences") {
    Rng rng(21);
    const double h = 1e-5;
    for (int i = 0; i < 50; ++i) {
        const auto p = random_policy(rng);
        const auto x = random_features(rng);
        const auto action = static_cast<Decision>(rng.below(kNumDecisions));
        const auto g = log_prob_gradient(p, x, action);
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            for (std::size_t d = 0; d < kNumDecisions; ++d) {
                auto plus = p, minus = p;
                plus.weights[f][d] += h;
                minus.weights[f][d] -= h;
                const double numeric = (log_prob(plus, x, action) - log_prob(minus, x, action)) / (2 * h);
                CHECK(g[f][d] == doctest::Approx(numeric).epsilon(1e-6).scale(1.0));
            }
        }
    }
}

TEST_CASE("greedy decision is the argmax with ties to the lowest index") {
    PolicyState p;
    FeatureVector x{};
    x[0] = 1.0;
    CHECK(greedy_decision(p, x) == Decision::Search);
    p.weight(Feature::Bias, Decision::Continue) = 1.0;
    p.weight(Feature::Bias, Decision::Answer) = 1.0;
    CHECK(greedy_decision(p, x) == Decision::Continue);
    p.weight(Feature::Bias, Decision::Answer) = 1.5;
    CHECK(greedy_decision(p, x) == Decision::Answer);
}

TEST_CASE("sampling frequencies follow the probabilities") {
    PolicyState p;
    p.weight(Feature::Bias, Decision::Search) = std::log(2.0);
    p.weight(Feature::Bias, Decision::Answer) = std::log(5.0);
    FeatureVector x{};
    x[0] = 1.0;
    Rng rng(99);
    std::array<int, kNumDecisions> counts{};
    const int n = 80000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_decision(p, x, rng))];
    CHECK(counts[0] / double(n) == doctest::Approx(0.25).epsilon(0.03));
    CHECK(counts[1] / double(n) == doctest::Approx(0.125).epsilon(0.05));
    CHECK(counts[2] / double(n) == doctest::Approx(0.625).epsilon(0.02));
}

TEST_CASE("budget prior favors answering once the budget is met") {
    const auto p = PolicyState::with_prior(1.0);
    FeatureVector met{};
    met[0] = 1.0;
    met[static_cast<std::size_t>(Feature::BudgetSatisfied)] = 1.0;
    CHECK(greedy_decision(p, met) == Decision::Answer);
    auto below = met;
    below[static_cast<std::size_t>(Feature::BudgetSatisfied)] = -1.0;
    CHECK(greedy_decision(p, below) == Decision::Search);
    CHECK(PolicyState::with_prior(0.0) == PolicyState{});
}

TEST_CASE("feature names round-trip") {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        const auto feature = static_cast<Feature>(f);
        CHECK(feature_from_name(feature_name(feature)) == feature);
    }
    CHECK_FALSE(feature_from_name("nope").has_value());
}

TEST_CASE("policy JSON round-trips and rejects unknown keys") {
    Rng rng(3);
    const auto p = random_policy(rng);
    const nlohmann::json j = p;
    CHECK(j.get<PolicyState>() == p);
    auto bad = j;
    bad["weights"][0]["feature"] = "mystery";
    CHECK_THROWS_AS(bad.get<PolicyState>(), std::invalid_argument);
}

TEST_CASE("is_finite and add_scaled") {
    PolicyState p;
    CHECK(p.is_finite());
    WeightMatrix g{};
    g[1][2] = 2.0;
    add_scaled(p.weights, g, 0.25);
    CHECK(p.weight(Feature::StepsSoFar, Decision::Answer) == 0.5);
    p.weights[0][0] = std::nan("");
    CHECK_FALSE(p.is_finite());
    PolicyState cold;
    cold.temperature = 0.0;
    CHECK_FALSE(cold.is_finite());
}
