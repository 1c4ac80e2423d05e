#pragma once
// Trajectory formalism and the structured-response grammar.
//
// A model emission is `<think>...</think>` followed by exactly one of
// `<answer>...</answer>` or `<tool_call>...</tool_call>`. A multi-step
// transcript interleaves emissions with `<result>...</result>` blocks
// injected by the search tool.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace searchlab {

struct Query {
    std::string id;
    std::string text;
    std::vector<std::string> gold_answers;
    int required_hops = 0;
};

enum class Decision { Search = 0, Continue = 1, Answer = 2 };

inline constexpr std::size_t kNumDecisions = 3;

std::string_view to_string(Decision d);
std::optional<Decision> decision_from_string(std::string_view s);

struct SearchHit {
    std::string fact_id;
    std::string text;
    double score = 0.0;

    bool operator==(const SearchHit&) const = default;
};

struct SearchResult {
    std::vector<SearchHit> hits;

    bool empty() const { return hits.empty(); }
    bool operator==(const SearchResult&) const = default;
};

struct Step {
    std::string reasoning_text;
    Decision decision = Decision::Continue;
    // Present iff decision == Search.
    std::optional<std::string> search_query;
    std::optional<SearchResult> search_result;

    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::string query_id;
    std::vector<Step> steps;
    // Absent iff the episode was truncated.
    std::optional<std::string> final_answer;
    std::string raw_text;
    std::size_t token_count = 0;

    bool operator==(const Trajectory&) const = default;
};

enum class TerminalTag { Answer, ToolCall };

struct ParsedResponse {
    bool well_formed = false;
    std::optional<std::string> think_text;
    std::optional<TerminalTag> terminal_tag;
    std::optional<std::string> payload;
};

// Total: never throws, malformed input yields well_formed == false.
ParsedResponse parse_response(std::string_view text);

// Inverse of parse_response for well-formed triples.
std::string render_emission(std::string_view think, TerminalTag tag, std::string_view payload);

// Splits a transcript into model emissions by removing `<result>` blocks.
// Emissions consisting only of whitespace are dropped.
std::vector<std::string> split_emissions(std::string_view transcript);

std::string render_result_block(const SearchResult& result);

std::size_t tool_calls(const Trajectory& traj);

std::size_t whitespace_token_count(std::string_view text);

// Checks the structural invariants of Step and Trajectory.
bool is_valid(const Trajectory& traj);

void to_json(nlohmann::json& j, const SearchHit& h);
void from_json(const nlohmann::json& j, SearchHit& h);
void to_json(nlohmann::json& j, const SearchResult& r);
void from_json(const nlohmann::json& j, SearchResult& r);
void to_json(nlohmann::json& j, const Step& s);
void from_json(const nlohmann::json& j, Step& s);
void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);
void to_json(nlohmann::json& j, const Query& q);
void from_json(const nlohmann::json& j, Query& q);

}  // namespace searchlab
