#include "searchlab/experience.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "searchlab/rng.hpp"

namespace searchlab {

namespace {

constexpr GuidelineCategory kCategories[] = {GuidelineCategory::SuccessStrategies, GuidelineCategory::PitfallsToAvoid,
                                             GuidelineCategory::ReasoningGuidelines};

std::vector<std::string>& delta_entries(ExperienceDelta& d, GuidelineCategory c) {
    switch (c) {
        case GuidelineCategory::SuccessStrategies: return d.success_strategies;
        case GuidelineCategory::PitfallsToAvoid: return d.pitfalls_to_avoid;
        case GuidelineCategory::ReasoningGuidelines: return d.reasoning_guidelines;
    }
    return d.success_strategies;
}

const std::vector<std::string>& delta_entries(const ExperienceDelta& d, GuidelineCategory c) {
    return delta_entries(const_cast<ExperienceDelta&>(d), c);
}

}  // namespace

std::string_view category_key(GuidelineCategory c) {
    switch (c) {
        case GuidelineCategory::SuccessStrategies: return "success_strategies";
        case GuidelineCategory::PitfallsToAvoid: return "pitfalls_to_avoid";
        case GuidelineCategory::ReasoningGuidelines: return "reasoning_guidelines";
    }
    return "";
}

std::string_view category_title(GuidelineCategory c) {
    switch (c) {
        case GuidelineCategory::SuccessStrategies: return "Success Strategies";
        case GuidelineCategory::PitfallsToAvoid: return "Pitfalls to Avoid";
        case GuidelineCategory::ReasoningGuidelines: return "Reasoning Guidelines";
    }
    return "";
}

std::vector<std::string>& ExperienceBank::entries(GuidelineCategory c) {
    switch (c) {
        case GuidelineCategory::SuccessStrategies: return success_strategies;
        case GuidelineCategory::PitfallsToAvoid: return pitfalls_to_avoid;
        case GuidelineCategory::ReasoningGuidelines: return reasoning_guidelines;
    }
    return success_strategies;
}

const std::vector<std::string>& ExperienceBank::entries(GuidelineCategory c) const {
    return const_cast<ExperienceBank*>(this)->entries(c);
}

std::size_t ExperienceBank::size() const {
    return success_strategies.size() + pitfalls_to_avoid.size() + reasoning_guidelines.size();
}

void ExperienceBank::merge(const ExperienceDelta& delta) {
    for (auto c : kCategories) {
        auto& list = entries(c);
        for (const auto& g : delta_entries(delta, c)) {
            if (std::find(list.begin(), list.end(), g) != list.end()) continue;
            list.push_back(g);
        }
        while (list.size() > max_entries_per_category) list.erase(list.begin());
    }
}

bool FewShotPool::offer(std::string digest, double reward) {
    if (reward < threshold_ || capacity_ == 0) return false;
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back({std::move(digest), reward});
    return true;
}

Categorized categorize(const std::vector<ScoredTrajectory>& items, const RewardConfig& cfg) {
    Categorized out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double total = items[i].breakdown.total;
        if (total == 1.0) {
            out.good.push_back(i);
        } else if (total < cfg.theta_r_bad) {
            out.bad.push_back(i);
        } else {
            out.neutral.push_back(i);
        }
    }
    return out;
}

std::string trajectory_digest(const Trajectory& traj) {
    std::string out;
    for (const auto& step : traj.steps) {
        if (!out.empty()) out += " -> ";
        switch (step.decision) {
            case Decision::Search: out += fmt::format("search[{}]", step.search_query.value_or("")); break;
            case Decision::Continue: out += "continue"; break;
            case Decision::Answer: out += fmt::format("answer[{}]", traj.final_answer.value_or("")); break;
        }
    }
    if (!traj.final_answer) out += out.empty() ? "truncated" : " -> truncated";
    return out;
}

TrajectorySummary summarize(const Trajectory& traj, const RewardBreakdown& b, std::optional<int> baseline,
                            const RewardConfig& cfg) {
    TrajectorySummary s;
    s.query_id = traj.query_id;
    s.trajectory_digest = trajectory_digest(traj);
    s.f1 = b.f1;
    s.reward = b.total;
    s.tool_calls = tool_calls(traj);
    s.well_formed = b.format_score == 0;
    s.truncated = !traj.final_answer.has_value();
    s.searched_before_answer = !s.truncated && s.tool_calls > 0;

    const std::string baseline_text = baseline ? fmt::format("baseline n={}", *baseline) : std::string("no baseline");
    const std::string answer_text =
        s.truncated ? std::string("no final answer (truncated)") : fmt::format("answer \"{}\"", *traj.final_answer);
    const std::string tool_text =
        b.f1 < cfg.theta_t ? fmt::format("Tool={:.2f} (F1 below correctness threshold {:.2f})", b.tool_score, cfg.theta_t)
                           : fmt::format("Tool={:.2f}", b.tool_score);

    if (!s.well_formed) {
        s.explanation = fmt::format(
            "format violation (Format=-1) overrides every other component: total=-1.00. "
            "Diagnostics: {}, F1={:.2f}, EM={}, tool calls m={}, {}, {}.",
            answer_text, b.f1, b.em, s.tool_calls, baseline_text, tool_text);
    } else {
        s.explanation = fmt::format(
            "Format=0 (well formed). {}, F1={:.2f}, EM={}. tool calls m={}, {}, {}. "
            "total={:.2f} = {:.2f}*F1 + {:.2f}*Tool.",
            answer_text, b.f1, b.em, s.tool_calls, baseline_text, tool_text, b.total, cfg.w_alpha, cfg.w_beta);
    }
    return s;
}

SummaryStats summary_stats(const std::vector<TrajectorySummary>& set) {
    SummaryStats st;
    st.count = set.size();
    if (set.empty()) return st;
    const double n = static_cast<double>(set.size());
    for (const auto& s : set) {
        st.mean_tool_calls += static_cast<double>(s.tool_calls);
        st.format_failure_rate += s.well_formed ? 0.0 : 1.0;
        st.mean_f1 += s.f1;
        st.search_before_answer_rate += s.searched_before_answer ? 1.0 : 0.0;
        st.truncation_rate += s.truncated ? 1.0 : 0.0;
        st.wrong_answer_rate += (s.well_formed && !s.truncated && s.f1 < 0.5) ? 1.0 : 0.0;
    }
    st.mean_tool_calls /= n;
    st.format_failure_rate /= n;
    st.mean_f1 /= n;
    st.search_before_answer_rate /= n;
    st.truncation_rate /= n;
    st.wrong_answer_rate /= n;
    return st;
}

ExperienceDelta RuleBasedSummarizer::generate(const std::vector<TrajectorySummary>& good,
                                              const std::vector<TrajectorySummary>& bad) {
    const SummaryStats g = summary_stats(good);
    const SummaryStats b = summary_stats(bad);
    ExperienceDelta d;
    const bool both = g.count > 0 && b.count > 0;

    if (both && g.mean_tool_calls + 0.5 <= b.mean_tool_calls) d.success_strategies.emplace_back(guideline::kMinimalCalls);
    if (both && g.mean_f1 - b.mean_f1 > 0.5) d.success_strategies.emplace_back(guideline::kCommit);

    if (b.format_failure_rate - g.format_failure_rate > 0.5) d.pitfalls_to_avoid.emplace_back(guideline::kThinkPattern);
    if (b.truncation_rate - g.truncation_rate > 0.3) d.pitfalls_to_avoid.emplace_back(guideline::kNoRepeat);
    if (b.wrong_answer_rate - g.wrong_answer_rate > 0.3) d.pitfalls_to_avoid.emplace_back(guideline::kNoEarlyAnswer);

    if (both && g.search_before_answer_rate - b.search_before_answer_rate > 0.25) {
        d.reasoning_guidelines.emplace_back(guideline::kSearchDetails);
    }
    return d;
}

ExperienceDelta generate_experience(const std::vector<TrajectorySummary>& good,
                                    const std::vector<TrajectorySummary>& bad, Summarizer& summarizer) {
    if (good.empty() && bad.empty()) throw std::invalid_argument("generate_experience needs a non-empty good or bad set");
    return summarizer.generate(good, bad);
}

ExperienceBank maybe_update(ExperienceBank bank, int step, const std::vector<TrajectorySummary>& good,
                            const std::vector<TrajectorySummary>& bad, Summarizer& summarizer) {
    if (step < 1) throw std::invalid_argument("maybe_update: step must be >= 1");
    if (bank.cadence <= 0 || step % bank.cadence != 0) return bank;
    if (!good.empty() || !bad.empty()) bank.merge(generate_experience(good, bad, summarizer));
    bank.last_update_step = step;
    return bank;
}

std::optional<std::string> sample_few_shot(const FewShotPool& pool, std::uint64_t rng_seed) {
    if (pool.empty()) return std::nullopt;
    Rng rng(rng_seed);
    return pool.entries()[rng.below(pool.size())].trajectory_digest;
}

std::string assemble_prompt(std::string_view instructions, const ExperienceBank& bank,
                            const std::optional<std::string>& few_shot, const Query& q) {
    std::string out(instructions);
    out += "\n";
    for (auto c : kCategories) {
        const auto& list = bank.entries(c);
        if (list.empty()) continue;
        out += fmt::format("\n## {}\n", category_title(c));
        for (const auto& g : list) out += fmt::format("- {}\n", g);
    }
    if (few_shot) out += fmt::format("\n## Example\n{}\n", *few_shot);
    out += fmt::format("\nQuestion: {}\n", q.text);
    return out;
}

std::pair<std::vector<TrajectorySummary>, std::vector<TrajectorySummary>> contrastive_summaries(
    const std::vector<ScoredTrajectory>& window, const RewardConfig& cfg, std::size_t cap) {
    const Categorized cat = categorize(window, cfg);
    auto good_idx = cat.good;
    auto bad_idx = cat.bad;
    // Good totals are all exactly 1; stable ordering keeps window order.
    std::stable_sort(bad_idx.begin(), bad_idx.end(),
                     [&](std::size_t a, std::size_t b) { return window[a].breakdown.total < window[b].breakdown.total; });
    if (good_idx.size() > cap) good_idx.resize(cap);
    if (bad_idx.size() > cap) bad_idx.resize(cap);

    std::vector<TrajectorySummary> good, bad;
    for (auto i : good_idx) good.push_back(summarize(window[i].trajectory, window[i].breakdown, window[i].breakdown.baseline, cfg));
    for (auto i : bad_idx) bad.push_back(summarize(window[i].trajectory, window[i].breakdown, window[i].breakdown.baseline, cfg));
    return {std::move(good), std::move(bad)};
}

void to_json(nlohmann::json& j, const TrajectorySummary& s) {
    j = nlohmann::json{{"query_id", s.query_id},
                       {"trajectory_digest", s.trajectory_digest},
                       {"f1", s.f1},
                       {"reward", s.reward},
                       {"explanation", s.explanation},
                       {"tool_calls", s.tool_calls},
                       {"well_formed", s.well_formed},
                       {"truncated", s.truncated},
                       {"searched_before_answer", s.searched_before_answer}};
}

void from_json(const nlohmann::json& j, TrajectorySummary& s) {
    j.at("query_id").get_to(s.query_id);
    j.at("trajectory_digest").get_to(s.trajectory_digest);
    j.at("f1").get_to(s.f1);
    j.at("reward").get_to(s.reward);
    j.at("explanation").get_to(s.explanation);
    s.tool_calls = j.value("tool_calls", std::size_t{0});
    s.well_formed = j.value("well_formed", true);
    s.truncated = j.value("truncated", false);
    s.searched_before_answer = j.value("searched_before_answer", false);
}

void to_json(nlohmann::json& j, const ExperienceDelta& d) {
    j = nlohmann::json{{"success_strategies", d.success_strategies},
                       {"pitfalls_to_avoid", d.pitfalls_to_avoid},
                       {"reasoning_guidelines", d.reasoning_guidelines}};
}

void from_json(const nlohmann::json& j, ExperienceDelta& d) {
    d = ExperienceDelta{};
    for (auto c : kCategories) {
        const std::string key(category_key(c));
        if (!j.contains(key)) continue;
        const auto& arr = j.at(key);
        if (!arr.is_array()) throw std::invalid_argument("summarizer reply field '" + key + "' is not an array");
        for (const auto& item : arr) delta_entries(d, c).push_back(item.get<std::string>());
    }
}

std::vector<nlohmann::json> bank_records(const ExperienceBank& bank) {
    std::vector<nlohmann::json> out;
    out.push_back({{"record", "bank"},
                   {"last_update_step", bank.last_update_step},
                   {"cadence", bank.cadence},
                   {"max_entries_per_category", bank.max_entries_per_category}});
    for (auto c : kCategories) {
        for (const auto& g : bank.entries(c)) out.push_back({{"record", "guideline"}, {"category", category_key(c)}, {"text", g}});
    }
    return out;
}

ExperienceBank bank_from_records(const std::vector<nlohmann::json>& records) {
    ExperienceBank bank;
    for (const auto& r : records) {
        const std::string kind = r.value("record", "");
        if (kind == "bank") {
            r.at("last_update_step").get_to(bank.last_update_step);
            r.at("cadence").get_to(bank.cadence);
            bank.max_entries_per_category = r.value("max_entries_per_category", std::size_t{5});
        } else if (kind == "guideline") {
            const std::string key = r.at("category").get<std::string>();
            auto it = std::find_if(std::begin(kCategories), std::end(kCategories),
                                   [&](GuidelineCategory c) { return category_key(c) == key; });
            if (it == std::end(kCategories)) throw std::runtime_error("unknown guideline category: " + key);
            bank.entries(*it).push_back(r.at("text").get<std::string>());
        }
    }
    return bank;
}

}  // namespace searchlab
