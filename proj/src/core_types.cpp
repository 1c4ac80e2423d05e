#include "searchlab/core_types.hpp"

#include <algorithm>
#include <cctype>

namespace searchlab {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";
constexpr std::string_view kToolOpen = "<tool_call>";
constexpr std::string_view kToolClose = "</tool_call>";
constexpr std::string_view kResultOpen = "<result>";
constexpr std::string_view kResultClose = "</result>";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::size_t skip_space(std::string_view s, std::size_t pos) {
    while (pos < s.size() && is_space(s[pos])) ++pos;
    return pos;
}

// Reads `open inner close` starting at pos. Returns the inner text and
// advances pos past the closing tag.
std::optional<std::string_view> read_block(std::string_view s, std::size_t& pos, std::string_view open,
                                           std::string_view close) {
    if (s.substr(pos, open.size()) != open) return std::nullopt;
    const std::size_t inner_begin = pos + open.size();
    const std::size_t close_at = s.find(close, inner_begin);
    if (close_at == std::string_view::npos) return std::nullopt;
    std::string_view inner = s.substr(inner_begin, close_at - inner_begin);
    if (inner.find(open) != std::string_view::npos) return std::nullopt;
    pos = close_at + close.size();
    return inner;
}

}  // namespace

std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::Search: return "search";
        case Decision::Continue: return "continue";
        case Decision::Answer: return "answer";
    }
    return "continue";
}

std::optional<Decision> decision_from_string(std::string_view s) {
    if (s == "search") return Decision::Search;
    if (s == "continue") return Decision::Continue;
    if (s == "answer") return Decision::Answer;
    return std::nullopt;
}

ParsedResponse parse_response(std::string_view text) {
    ParsedResponse out;
    std::size_t pos = skip_space(text, 0);

    auto think = read_block(text, pos, kThinkOpen, kThinkClose);
    if (!think) return out;
    pos = skip_space(text, pos);

    TerminalTag tag = TerminalTag::Answer;
    auto payload = read_block(text, pos, kAnswerOpen, kAnswerClose);
    if (!payload) {
        payload = read_block(text, pos, kToolOpen, kToolClose);
        tag = TerminalTag::ToolCall;
    }
    if (!payload) return out;
    if (skip_space(text, pos) != text.size()) return out;

    out.well_formed = true;
    out.think_text = std::string(*think);
    out.terminal_tag = tag;
    out.payload = std::string(*payload);
    return out;
}

std::string render_emission(std::string_view think, TerminalTag tag, std::string_view payload) {
    std::string out;
    out.reserve(think.size() + payload.size() + 48);
    out.append(kThinkOpen).append(think).append(kThinkClose);
    if (tag == TerminalTag::Answer) {
        out.append(kAnswerOpen).append(payload).append(kAnswerClose);
    } else {
        out.append(kToolOpen).append(payload).append(kToolClose);
    }
    return out;
}

std::vector<std::string> split_emissions(std::string_view transcript) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    auto push = [&](std::string_view piece) {
        if (std::any_of(piece.begin(), piece.end(), [](char c) { return !is_space(c); })) {
            out.emplace_back(piece);
        }
    };
    while (pos <= transcript.size()) {
        const std::size_t open = transcript.find(kResultOpen, pos);
        if (open == std::string_view::npos) {
            push(transcript.substr(pos));
            break;
        }
        push(transcript.substr(pos, open - pos));
        const std::size_t close = transcript.find(kResultClose, open + kResultOpen.size());
        if (close == std::string_view::npos) {
            // An unterminated result block swallows the rest; keep it so the
            // emission check fails on it.
            push(transcript.substr(open));
            break;
        }
        pos = close + kResultClose.size();
    }
    return out;
}

std::string render_result_block(const SearchResult& result) {
    std::string out(kResultOpen);
    out += '\n';
    for (const auto& hit : result.hits) {
        out += hit.text;
        out += '\n';
    }
    out.append(kResultClose);
    return out;
}

std::size_t tool_calls(const Trajectory& traj) {
    return static_cast<std::size_t>(std::count_if(traj.steps.begin(), traj.steps.end(),
                                                  [](const Step& s) { return s.decision == Decision::Search; }));
}

std::size_t whitespace_token_count(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

bool is_valid(const Trajectory& traj) {
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const Step& s = traj.steps[i];
        const bool search = s.decision == Decision::Search;
        if (s.search_query.has_value() != search || s.search_result.has_value() != search) return false;
        if (s.decision == Decision::Answer && i + 1 != traj.steps.size()) return false;
    }
    const bool answered = !traj.steps.empty() && traj.steps.back().decision == Decision::Answer;
    return answered == traj.final_answer.has_value();
}

void to_json(nlohmann::json& j, const SearchHit& h) {
    j = nlohmann::json{{"fact_id", h.fact_id}, {"text", h.text}, {"score", h.score}};
}

void from_json(const nlohmann::json& j, SearchHit& h) {
    j.at("fact_id").get_to(h.fact_id);
    j.at("text").get_to(h.text);
    j.at("score").get_to(h.score);
}

void to_json(nlohmann::json& j, const SearchResult& r) { j = nlohmann::json{{"hits", r.hits}}; }

void from_json(const nlohmann::json& j, SearchResult& r) { j.at("hits").get_to(r.hits); }

void to_json(nlohmann::json& j, const Step& s) {
    j = nlohmann::json{{"reasoning_text", s.reasoning_text}, {"decision", std::string(to_string(s.decision))}};
    j["search_query"] = s.search_query ? nlohmann::json(*s.search_query) : nlohmann::json(nullptr);
    j["search_result"] = s.search_result ? nlohmann::json(*s.search_result) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, Step& s) {
    j.at("reasoning_text").get_to(s.reasoning_text);
    const auto decision = decision_from_string(j.at("decision").get<std::string>());
    if (!decision) throw std::invalid_argument("unknown decision: " + j.at("decision").dump());
    s.decision = *decision;
    s.search_query.reset();
    s.search_result.reset();
    if (j.contains("search_query") && !j["search_query"].is_null()) s.search_query = j["search_query"].get<std::string>();
    if (j.contains("search_result") && !j["search_result"].is_null()) {
        s.search_result = j["search_result"].get<SearchResult>();
    }
}

void to_json(nlohmann::json& j, const Trajectory& t) {
    j = nlohmann::json{{"query_id", t.query_id}, {"steps", t.steps}};
    j["final_answer"] = t.final_answer ? nlohmann::json(*t.final_answer) : nlohmann::json(nullptr);
    j["raw_text"] = t.raw_text;
    j["token_count"] = t.token_count;
}

void from_json(const nlohmann::json& j, Trajectory& t) {
    j.at("query_id").get_to(t.query_id);
    j.at("steps").get_to(t.steps);
    t.final_answer.reset();
    if (j.contains("final_answer") && !j["final_answer"].is_null()) t.final_answer = j["final_answer"].get<std::string>();
    j.at("raw_text").get_to(t.raw_text);
    j.at("token_count").get_to(t.token_count);
}

void to_json(nlohmann::json& j, const Query& q) {
    j = nlohmann::json{{"id", q.id}, {"text", q.text}, {"gold_answers", q.gold_answers}, {"required_hops", q.required_hops}};
}

void from_json(const nlohmann::json& j, Query& q) {
    j.at("id").get_to(q.id);
    j.at("text").get_to(q.text);
    j.at("gold_answers").get_to(q.gold_answers);
    j.at("required_hops").get_to(q.required_hops);
}

}  // namespace searchlab
