#include "searchlab/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace searchlab {

void RewardConfig::validate() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("reward.lambda must be > 0");
    if (!(theta_t > 0.0 && theta_t <= 1.0)) throw std::invalid_argument("reward.theta_t must be in (0, 1]");
    if (!(w_alpha >= 0.0)) throw std::invalid_argument("reward.w_alpha must be >= 0");
    if (!(w_beta >= 0.0)) throw std::invalid_argument("reward.w_beta must be >= 0");
    if (!(theta_r_bad > 0.0 && theta_r_bad < 1.0)) throw std::invalid_argument("reward.theta_r_bad must be in (0, 1)");
}

std::vector<std::string> answer_tokens(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (std::ispunct(c)) continue;
        cleaned += static_cast<char>(std::tolower(c));
    }
    std::istringstream in(cleaned);
    std::vector<std::string> tokens;
    std::string tok;
    while (in >> tok) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    for (const auto& tok : answer_tokens(text)) {
        if (!out.empty()) out += ' ';
        out += tok;
    }
    return out;
}

namespace {

double f1_single(std::vector<std::string> pred, std::vector<std::string> gold) {
    if (pred.empty() || gold.empty()) return 0.0;
    std::sort(pred.begin(), pred.end());
    std::sort(gold.begin(), gold.end());
    std::vector<std::string> common;
    std::set_intersection(pred.begin(), pred.end(), gold.begin(), gold.end(), std::back_inserter(common));
    if (common.empty()) return 0.0;
    const double precision = static_cast<double>(common.size()) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(common.size()) / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double token_f1(std::string_view prediction, const std::vector<std::string>& golds) {
    const auto pred = answer_tokens(prediction);
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, f1_single(pred, answer_tokens(g)));
    return best;
}

int exact_match(std::string_view prediction, const std::vector<std::string>& golds) {
    const auto pred = normalize_answer(prediction);
    for (const auto& g : golds) {
        if (pred == normalize_answer(g)) return 1;
    }
    return 0;
}

int format_reward(std::string_view raw_text) {
    const auto emissions = split_emissions(raw_text);
    if (emissions.empty()) return -1;
    for (const auto& e : emissions) {
        if (!parse_response(e).well_formed) return -1;
    }
    return 0;
}

double tool_reward(std::size_t tool_calls, std::optional<int> baseline, double f1, const RewardConfig& cfg) {
    if (f1 < cfg.theta_t) return 0.0;
    if (!baseline) return 1.0;
    const double excess = std::max(0.0, static_cast<double>(tool_calls) - static_cast<double>(*baseline));
    return std::exp(-cfg.lambda * excess);
}

RewardBreakdown overall_reward(const Trajectory& traj, const std::vector<std::string>& golds,
                               std::optional<int> baseline, const RewardConfig& cfg) {
    RewardBreakdown b;
    b.tool_calls = tool_calls(traj);
    b.baseline = baseline;
    b.format_score = format_reward(traj.raw_text);
    const std::string answer = traj.final_answer.value_or("");
    b.f1 = token_f1(answer, golds);
    b.em = traj.final_answer ? exact_match(answer, golds) : 0;
    b.tool_score = tool_reward(b.tool_calls, baseline, b.f1, cfg);
    b.total = b.format_score == -1 ? -1.0 : cfg.w_alpha * b.f1 + cfg.w_beta * b.tool_score;
    return b;
}

std::optional<int> BaselineTable::get(const std::string& query_id) const {
    auto it = entries_.find(query_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void BaselineTable::observe(const std::string& query_id, int tool_calls, double f1, const RewardConfig& cfg) {
    if (f1 < cfg.theta_t) return;
    auto [it, inserted] = entries_.try_emplace(query_id, tool_calls);
    if (!inserted) it->second = std::min(it->second, tool_calls);
}

BaselineTable observe_for_baseline(BaselineTable table, const std::string& query_id, int tool_calls, double f1,
                                   const RewardConfig& cfg) {
    table.observe(query_id, tool_calls, f1, cfg);
    return table;
}

void to_json(nlohmann::json& j, const RewardConfig& c) {
    j = nlohmann::json{{"lambda", c.lambda},
                       {"theta_t", c.theta_t},
                       {"w_alpha", c.w_alpha},
                       {"w_beta", c.w_beta},
                       {"theta_r_bad", c.theta_r_bad}};
}

void from_json(const nlohmann::json& j, RewardConfig& c) {
    c = RewardConfig{};
    if (j.contains("lambda")) j.at("lambda").get_to(c.lambda);
    if (j.contains("theta_t")) j.at("theta_t").get_to(c.theta_t);
    if (j.contains("w_alpha")) j.at("w_alpha").get_to(c.w_alpha);
    if (j.contains("w_beta")) j.at("w_beta").get_to(c.w_beta);
    if (j.contains("theta_r_bad")) j.at("theta_r_bad").get_to(c.theta_r_bad);
}

void to_json(nlohmann::json& j, const RewardBreakdown& b) {
    j = nlohmann::json{{"f1", b.f1},
                       {"em", b.em},
                       {"format_score", b.format_score},
                       {"tool_score", b.tool_score},
                       {"total", b.total},
                       {"tool_calls", b.tool_calls}};
    j["baseline"] = b.baseline ? nlohmann::json(*b.baseline) : nlohmann::json(nullptr);
}

std::vector<nlohmann::json> baseline_records(const BaselineTable& table) {
    std::vector<nlohmann::json> out;
    for (const auto& [id, n] : table.entries()) out.push_back({{"query_id", id}, {"n", n}});
    return out;
}

BaselineTable baseline_from_records(const std::vector<nlohmann::json>& records) {
    BaselineTable table;
    RewardConfig always;
    for (const auto& r : records) table.observe(r.at("query_id").get<std::string>(), r.at("n").get<int>(), 1.0, always);
    return table;
}

}  // namespace searchlab
