#include <doctest.h>

#include "searchlab/agent.hpp"
#include "searchlab/experience.hpp"
#include "searchlab/reward.hpp"

using namespace searchlab;

namespace {

const World& world() {
    static const World w = [] {
        WorldConfig c;
        c.num_entities = 50;
        c.num_queries = 120;
        c.hop_distribution = {{0, 1}, {1, 1}, {2, 1}, {3, 1}};
        c.seed = 3;
        return generate_world(c);
    }();
    return w;
}

std::vector<Query> with_hops(int hops) {
    std::vector<Query> out;
    for (const auto& q : world().queries) {
        if (q.required_hops == hops) out.push_back(q);
    }
    return out;
}

PolicyState forcing(Decision d) {
    PolicyState p;
    p.weight(Feature::Bias, d) = 50.0;
    return p;
}

// Searches until a candidate is held, then answers.
PolicyState chain_then_answer() {
    PolicyState p;
    p.weight(Feature::Bias, Decision::Search) = 10.0;
    p.weight(Feature::CandidateFound, Decision::Answer) = 30.0;
    return p;
}

AgentSettings quiet() {
    AgentSettings s;
    s.misread_prob = 0.0;
    s.format_error_prob = 0.0;
    return s;
}

const std::string kPlain = "Answer the question.";

std::size_t idx(Feature f) { return static_cast<std::size_t>(f); }

}  // namespace

TEST_CASE("forced Answer on a hop-0 query uses no tools and is exactly right") {
    const RewardConfig cfg;
    for (const auto& q : with_hops(0)) {
        Rng rng(1);
        const auto t = rollout(forcing(Decision::Answer), world().kb, AgentContext::start(q, kPlain), quiet(), rng);
        CHECK(tool_calls(t) == 0);
        const auto b = overall_reward(t, q.gold_answers, std::nullopt, cfg);
        CHECK(b.em == 1);
        CHECK(b.format_score == 0);
        CHECK(b.total == 1.0);
    }
}

TEST_CASE("forced Search truncates after max_steps searches") {
    const RewardConfig cfg;
    AgentSettings s = quiet();
    s.max_steps = 4;
    for (const auto& q : with_hops(2)) {
        Rng rng(2);
        const auto t = rollout(forcing(Decision::Search), world().kb, AgentContext::start(q, kPlain), s, rng);
        CHECK_FALSE(t.final_answer.has_value());
        CHECK(t.steps.size() == 4);
        CHECK(tool_calls(t) == 4);
        CHECK(overall_reward(t, q.gold_answers, std::nullopt, cfg).f1 == 0.0);
        CHECK(is_valid(t));
    }
}

TEST_CASE("same seed, policy and query give the same trajectory") {
    AgentSettings s;
    s.misread_prob = 0.3;
    s.format_error_prob = 0.3;
    PolicyState p;
    p.weight(Feature::CandidateFound, Decision::Answer) = 1.0;
    for (const auto& q : world().queries) {
        Rng a(77), b(77);
        const auto ta = rollout(p, world().kb, AgentContext::start(q, kPlain), s, a);
        const auto tb = rollout(p, world().kb, AgentContext::start(q, kPlain), s, b);
        CHECK(ta == tb);
    }
}

TEST_CASE("chaining searches hop by hop answers every query with the minimum tool count") {
    const RewardConfig cfg;
    for (const auto& q : world().queries) {
        if (q.required_hops == 0) continue;
        Rng rng(5);
        const auto t = rollout(chain_then_answer(), world().kb, AgentContext::start(q, kPlain), quiet(), rng);
        const auto b = overall_reward(t, q.gold_answers, oracle_min_tools(q), cfg);
        CHECK_MESSAGE(b.em == 1, q.text);
        CHECK(static_cast<int>(tool_calls(t)) == oracle_min_tools(q));
        CHECK(b.total == 1.0);
    }
}

TEST_CASE("skim misreads corrupt answers that careful reads get right") {
    const RewardConfig cfg;
    AgentSettings noisy = quiet();
    noisy.misread_prob = 1.0;
    int wrong = 0, total = 0;
    for (const auto& q : with_hops(1)) {
        Rng rng(9);
        const auto t = rollout(chain_then_answer(), world().kb, AgentContext::start(q, kPlain), noisy, rng);
        ++total;
        wrong += overall_reward(t, q.gold_answers, std::nullopt, cfg).em == 0 ? 1 : 0;
    }
    REQUIRE(total > 0);
    CHECK(wrong * 2 > total);
}

TEST_CASE("a verification search re-reads carefully and sets the verified feature") {
    AgentSettings s = quiet();
    s.misread_prob = 1.0;
    for (const auto& q : with_hops(1)) {
        Rng rng(4);
        const auto out = rollout_traced(forcing(Decision::Search), world().kb, AgentContext::start(q, kPlain), s, rng);
        REQUIRE(out.trace.size() == static_cast<std::size_t>(s.max_steps));
        CHECK(out.trace[0].features[idx(Feature::CandidateFound)] == 0.0);
        CHECK(out.trace[1].features[idx(Feature::CandidateFound)] == 1.0);
        CHECK(out.trace[1].features[idx(Feature::Verified)] == 0.0);
        CHECK(out.trace[2].features[idx(Feature::Verified)] == 1.0);
        CHECK(out.trace[2].features[idx(Feature::Coverage)] == 1.0);
    }
    // After verification, answering gives the right entity even with certain skim errors.
    PolicyState verify_then_answer;
    verify_then_answer.weight(Feature::Bias, Decision::Search) = 10.0;
    verify_then_answer.weight(Feature::Verified, Decision::Answer) = 30.0;
    for (const auto& q : with_hops(1)) {
        Rng rng(4);
        const auto t = rollout(verify_then_answer, world().kb, AgentContext::start(q, kPlain), s, rng);
        CHECK(exact_match(t.final_answer.value_or(""), q.gold_answers) == 1);
        CHECK(tool_calls(t) == 2);
    }
}

TEST_CASE("features stay in range and the trace matches the steps") {
    AgentSettings s;
    s.misread_prob = 0.2;
    Rng prng(12);
    for (int round = 0; round < 20; ++round) {
        PolicyState p;
        for (auto& row : p.weights) {
            for (double& w : row) w = prng.uniform() * 4.0 - 2.0;
        }
        for (const auto& q : world().queries) {
            Rng rng(round * 1000 + 1);
            const auto out = rollout_traced(p, world().kb, AgentContext::start(q, kPlain), s, rng);
            const auto& t = out.trajectory;
            CHECK(is_valid(t));
            CHECK(t.steps.size() <= static_cast<std::size_t>(s.max_steps));
            REQUIRE(out.trace.size() == t.steps.size());
            for (std::size_t i = 0; i < t.steps.size(); ++i) CHECK(out.trace[i].decision == t.steps[i].decision);
            CHECK(t.token_count == whitespace_token_count(t.raw_text));
            CHECK(t.final_answer.has_value() == (!t.steps.empty() && t.steps.back().decision == Decision::Answer));
            for (const auto& dp : out.trace) {
                CHECK(dp.features[idx(Feature::Bias)] == 1.0);
                for (auto f : {Feature::StepsSoFar, Feature::SearchesSoFar, Feature::Coverage, Feature::CandidateFound,
                               Feature::Verified, Feature::Hop0Cue}) {
                    CHECK(dp.features[idx(f)] >= 0.0);
                    CHECK(dp.features[idx(f)] <= 1.0);
                }
                CHECK(dp.features[idx(Feature::BudgetSatisfied)] == 0.0);
            }
        }
    }
}

TEST_CASE("prompt directives are read from guideline text") {
    CHECK_FALSE(parse_prompt_directives(kPlain).budget_per_hop);
    ExperienceBank bank;
    bank.success_strategies = {std::string(guideline::kMinimalCalls)};
    bank.pitfalls_to_avoid = {std::string(guideline::kThinkPattern)};
    const Query q = with_hops(2).front();
    const auto prompt = assemble_prompt(kPlain, bank, std::string("search[x] -> answer[y]"), q);
    const auto d = parse_prompt_directives(prompt);
    CHECK(d.budget_per_hop);
    CHECK(d.strict_format);
    CHECK(d.has_example);

    CHECK(AgentContext::start(q, prompt).budget_hint == 2);
    CHECK_FALSE(AgentContext::start(q, kPlain).budget_hint.has_value());
    CHECK(AgentContext::start(with_hops(0).front(), prompt).budget_hint == 0);
}

TEST_CASE("budget feature is -1 below the hinted budget and +1 at it") {
    ExperienceBank bank;
    bank.success_strategies = {std::string(guideline::kMinimalCalls)};
    const Query q = with_hops(2).front();
    Rng rng(1);
    const auto out = rollout_traced(forcing(Decision::Search), world().kb,
                                    AgentContext::start(q, assemble_prompt(kPlain, bank, std::nullopt, q)), quiet(), rng);
    CHECK(out.trace[0].features[idx(Feature::BudgetSatisfied)] == -1.0);
    CHECK(out.trace[1].features[idx(Feature::BudgetSatisfied)] == -1.0);
    CHECK(out.trace[2].features[idx(Feature::BudgetSatisfied)] == 1.0);
}

TEST_CASE("format slips follow the prompt's formatting guidance") {
    const RewardConfig cfg;
    const Query q = with_hops(0).front();
    AgentSettings s = quiet();

    auto slip_rate = [&](const std::string& prompt, double p) {
        s.format_error_prob = p;
        int slips = 0;
        const int n = 4000;
        for (int i = 0; i < n; ++i) {
            Rng rng(static_cast<std::uint64_t>(i) + 1);
            const auto t = rollout(forcing(Decision::Answer), world().kb, AgentContext::start(q, prompt), s, rng);
            slips += format_reward(t.raw_text) == -1 ? 1 : 0;
        }
        return slips / static_cast<double>(n);
    };

    ExperienceBank strict;
    strict.pitfalls_to_avoid = {std::string(guideline::kThinkPattern)};
    const auto plain = assemble_prompt(kPlain, ExperienceBank{}, std::nullopt, q);
    const auto with_example = assemble_prompt(kPlain, ExperienceBank{}, std::string("answer[x]"), q);
    const auto strict_prompt = assemble_prompt(kPlain, strict, std::nullopt, q);

    CHECK(slip_rate(plain, 1.0) == 1.0);
    CHECK(slip_rate(plain, 0.0) == 0.0);
    CHECK(slip_rate(strict_prompt, 1.0) == 0.0);
    CHECK(slip_rate(plain, 0.4) == doctest::Approx(0.4).epsilon(0.1));
    CHECK(slip_rate(with_example, 0.4) == doctest::Approx(0.2).epsilon(0.15));

    s.format_error_prob = 1.0;
    Rng rng(1);
    const auto t = rollout(forcing(Decision::Answer), world().kb, AgentContext::start(q, plain), s, rng);
    CHECK(overall_reward(t, q.gold_answers, std::nullopt, cfg).total == -1.0);
}

TEST_CASE("unparseable questions fall back to a raw search") {
    const Query odd{"qx", "who painted the ceiling?", {"nobody"}, 1};
    Rng rng(1);
    const auto t = rollout(chain_then_answer(), world().kb, AgentContext::start(odd, kPlain), quiet(), rng);
    REQUIRE_FALSE(t.steps.empty());
    CHECK(t.steps.front().search_query == odd.text);
    CHECK(is_valid(t));
}
