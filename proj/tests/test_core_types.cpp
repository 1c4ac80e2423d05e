#include <doctest.h>

#include <random>
#include <string>

#include "searchlab/core_types.hpp"
#include "searchlab/rng.hpp"

using namespace searchlab;

namespace {

Step search_step(const std::string& q) {
    Step s;
    s.reasoning_text = "look up " + q;
    s.decision = Decision::Search;
    s.search_query = q;
    s.search_result = SearchResult{{{"f00001", "a r b", 0.5}}};
    return s;
}

Step plain_step(Decision d) {
    Step s;
    s.reasoning_text = "thinking";
    s.decision = d;
    return s;
}

Trajectory with_steps(std::initializer_list<Decision> ds) {
    Trajectory t;
    t.query_id = "q0000";
    for (auto d : ds) t.steps.push_back(d == Decision::Search ? search_step("x") : plain_step(d));
    if (!t.steps.empty() && t.steps.back().decision == Decision::Answer) t.final_answer = "y";
    return t;
}

}  // namespace

TEST_CASE("parse_response accepts think followed by a terminal tag") {
    auto r = parse_response("<think>reason</think><answer>Paris</answer>");
    CHECK(r.well_formed);
    REQUIRE(r.terminal_tag.has_value());
    CHECK(*r.terminal_tag == TerminalTag::Answer);
    CHECK(*r.payload == "Paris");
    CHECK(*r.think_text == "reason");

    r = parse_response("<think>x</think><tool_call>capital of France</tool_call>");
    CHECK(r.well_formed);
    CHECK(*r.terminal_tag == TerminalTag::ToolCall);
    CHECK(*r.payload == "capital of France");
}

TEST_CASE("parse_response rejects malformed input") {
    CHECK_FALSE(parse_response("").well_formed);
    CHECK_FALSE(parse_response("<answer>Paris</answer>").well_formed);
    CHECK_FALSE(parse_response("<think>x</think>").well_formed);
    CHECK_FALSE(parse_response("<think>x<answer>y</answer>").well_formed);
    CHECK_FALSE(parse_response("<think>x</think><answer>y</answer><answer>z</answer>").well_formed);
    CHECK_FALSE(parse_response("<think>x</think><answer>y</answer>trailing").well_formed);
    CHECK_FALSE(parse_response("<THINK>x</THINK><answer>y</answer>").well_formed);
    CHECK_FALSE(parse_response("<think>x</think><tool_call>a</answer>").well_formed);
    CHECK_FALSE(parse_response("<think>a</think>b</think><answer>y</answer>").well_formed);
}

TEST_CASE("parse_response tolerates surrounding whitespace") {
    const auto r = parse_response("  \n<think> a </think>\n <answer> b </answer>\n ");
    CHECK(r.well_formed);
    CHECK(*r.think_text == " a ");
    CHECK(*r.payload == " b ");
}

TEST_CASE("parse_response is total and well_formed implies all fields") {
    const std::vector<std::string> alphabet = {"<think>", "</think>", "<answer>", "</answer>", "<tool_call>",
                                               "</tool_call>", "<", ">", "/", "a", " ", "\n", "think"};
    Rng rng(42);
    for (int i = 0; i < 20000; ++i) {
        std::string s;
        const auto len = rng.below(8);
        for (std::size_t k = 0; k < len; ++k) s += alphabet[rng.below(alphabet.size())];
        ParsedResponse r;
        CHECK_NOTHROW(r = parse_response(s));
        if (r.well_formed) {
            CHECK(r.think_text.has_value());
            CHECK(r.terminal_tag.has_value());
            CHECK(r.payload.has_value());
        }
    }
}

TEST_CASE("render then parse recovers the triple") {
    Rng rng(7);
    const std::string chars = "abc XYZ 012.,?-\n";
    for (int i = 0; i < 2000; ++i) {
        auto random_text = [&] {
            std::string s;
            const auto len = rng.below(12);
            for (std::size_t k = 0; k < len; ++k) s += chars[rng.below(chars.size())];
            return s;
        };
        const std::string think = random_text();
        const std::string payload = random_text();
        const auto tag = rng.bernoulli(0.5) ? TerminalTag::Answer : TerminalTag::ToolCall;
        const auto r = parse_response(render_emission(think, tag, payload));
        REQUIRE(r.well_formed);
        CHECK(*r.think_text == think);
        CHECK(*r.terminal_tag == tag);
        CHECK(*r.payload == payload);
    }
}

TEST_CASE("tool_calls counts search steps") {
    CHECK(tool_calls(with_steps({Decision::Search, Decision::Search, Decision::Answer})) == 2);
    CHECK(tool_calls(with_steps({Decision::Answer})) == 0);
    CHECK(tool_calls(with_steps({Decision::Continue, Decision::Search, Decision::Continue, Decision::Answer})) == 1);
}

TEST_CASE("tool_calls equals the number of steps carrying a search query") {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        Trajectory t;
        const auto n = rng.below(10);
        for (std::size_t k = 0; k < n; ++k) {
            t.steps.push_back(rng.bernoulli(0.5) ? search_step("q") : plain_step(Decision::Continue));
        }
        std::size_t with_query = 0;
        for (const auto& s : t.steps) with_query += s.search_query.has_value() ? 1 : 0;
        CHECK(tool_calls(t) == with_query);
    }
}

TEST_CASE("split_emissions strips result blocks and blank pieces") {
    const std::string transcript =
        "<think>a</think><tool_call>q</tool_call>\n<result>\nx r y\n</result>\n<think>b</think><answer>y</answer>";
    const auto parts = split_emissions(transcript);
    REQUIRE(parts.size() == 2);
    CHECK(parse_response(parts[0]).well_formed);
    CHECK(parse_response(parts[1]).well_formed);
    CHECK(split_emissions("  \n ").empty());
}

TEST_CASE("whitespace_token_count") {
    CHECK(whitespace_token_count("") == 0);
    CHECK(whitespace_token_count("  a  b\n c\t") == 3);
    CHECK(whitespace_token_count("<think>x y</think>") == 2);
}

TEST_CASE("is_valid enforces step and answer invariants") {
    CHECK(is_valid(with_steps({Decision::Search, Decision::Answer})));
    CHECK(is_valid(with_steps({Decision::Search, Decision::Continue})));

    auto t = with_steps({Decision::Answer});
    t.final_answer.reset();
    CHECK_FALSE(is_valid(t));

    auto early = with_steps({Decision::Search});
    early.steps.insert(early.steps.begin(), plain_step(Decision::Answer));
    early.final_answer = "y";
    CHECK_FALSE(is_valid(early));

    auto missing = with_steps({Decision::Search, Decision::Answer});
    missing.steps[0].search_result.reset();
    CHECK_FALSE(is_valid(missing));

    auto extra = with_steps({Decision::Continue});
    extra.steps[0].search_query = "q";
    CHECK_FALSE(is_valid(extra));
}

TEST_CASE("trajectory JSON uses the log field names and round-trips") {
    auto t = with_steps({Decision::Search, Decision::Continue, Decision::Answer});
    t.raw_text = "<think>a</think><answer>y</answer>";
    t.token_count = 2;
    const nlohmann::json j = t;
    for (const char* key : {"query_id", "steps", "final_answer", "raw_text", "token_count"}) CHECK(j.contains(key));
    CHECK(j.at("steps").at(1).at("search_query").is_null());
    CHECK(j.at("steps").at(0).at("decision") == "search");
    CHECK(j.get<Trajectory>() == t);

    auto truncated = with_steps({Decision::Search});
    const nlohmann::json jt = truncated;
    CHECK(jt.at("final_answer").is_null());
    CHECK(jt.get<Trajectory>() == truncated);
}

TEST_CASE("decision names round-trip") {
    for (auto d : {Decision::Search, Decision::Continue, Decision::Answer}) {
        CHECK(decision_from_string(to_string(d)) == d);
    }
    CHECK_FALSE(decision_from_string("Search").has_value());
}
