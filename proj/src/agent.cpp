#include "searchlab/agent.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "searchlab/experience.hpp"

namespace searchlab {

namespace {

struct Triple {
    std::string subject;
    std::string relation;
    std::string object;
};

std::optional<Triple> parse_triple(std::string_view text) {
    std::istringstream in{std::string(text)};
    Triple t;
    std::string extra;
    if (!(in >> t.subject >> t.relation >> t.object) || (in >> extra)) return std::nullopt;
    return t;
}

std::vector<std::string> question_terms(std::string_view question) {
    static const std::set<std::string, std::less<>> stop = {"given", "that", "what", "is", "the", "of"};
    std::vector<std::string> out;
    for (auto term : search_terms(question)) {
        while (!term.empty() && (term.back() == '?' || term.back() == ',' || term.back() == '.')) term.pop_back();
        if (term.empty() || stop.count(term) != 0) continue;
        if (std::find(out.begin(), out.end(), term) == out.end()) out.push_back(term);
    }
    return out;
}

class Episode {
public:
    Episode(const PolicyState& policy, const KnowledgeBase& kb, AgentContext ctx, const AgentSettings& settings,
            Rng& rng, DecisionMode mode)
        : policy_(policy), kb_(kb), ctx_(std::move(ctx)), settings_(settings), rng_(rng), mode_(mode) {
        plan_ = parse_question(ctx_.query.text);
        content_terms_ = question_terms(ctx_.query.text);
        const auto directives = parse_prompt_directives(ctx_.prompt);
        format_slip_ = directives.strict_format ? 0.0 : settings_.format_error_prob;
        if (!directives.strict_format && directives.has_example) format_slip_ *= 0.5;
        if (plan_) {
            chain_.push_back(plan_->start_entity);
            hop_read_.assign(static_cast<std::size_t>(plan_->hops()), false);
        }
    }

    RolloutOutput run() {
        for (int t = 0; t < settings_.max_steps; ++t) {
            const FeatureVector x = features(t);
            const Decision d = mode_ == DecisionMode::Greedy ? greedy_decision(policy_, x) : sample_decision(policy_, x, rng_);
            out_.trace.push_back({x, d});
            switch (d) {
                case Decision::Search: do_search(); break;
                case Decision::Continue: do_continue(); break;
                case Decision::Answer: do_answer(); break;
            }
            if (d == Decision::Answer) break;
        }
        if (!out_.trajectory.final_answer && !pending_think_.empty()) {
            append_raw("<think>" + pending_think_);
        }
        out_.trajectory.query_id = ctx_.query.id;
        out_.trajectory.steps = ctx_.steps_so_far;
        out_.trajectory.token_count = whitespace_token_count(out_.trajectory.raw_text);
        return std::move(out_);
    }

private:
    int hops() const { return plan_ ? plan_->hops() : 0; }
    int resolved() const { return static_cast<int>(chain_.size()) - 1; }
    bool stated() const { return plan_ && plan_->embedded_fact.has_value(); }

    std::optional<std::string> candidate() const {
        if (!plan_) return std::nullopt;
        if (stated()) return plan_->embedded_fact->object;
        if (resolved() == hops()) return chain_.back();
        return std::nullopt;
    }

    double coverage() const {
        if (content_terms_.empty()) return 0.0;
        std::set<std::string, std::less<>> covered;
        auto cover = [&](const Triple& t) {
            covered.insert(t.subject);
            covered.insert(t.relation);
            covered.insert(t.object);
        };
        for (const auto& t : accepted_) cover(t);
        std::size_t hit = 0;
        for (const auto& term : content_terms_) hit += covered.count(term);
        return static_cast<double>(hit) / static_cast<double>(content_terms_.size());
    }

    FeatureVector features(int t) const {
        FeatureVector x{};
        const double max_steps = static_cast<double>(settings_.max_steps);
        x[static_cast<std::size_t>(Feature::Bias)] = 1.0;
        x[static_cast<std::size_t>(Feature::StepsSoFar)] = static_cast<double>(t) / max_steps;
        x[static_cast<std::size_t>(Feature::SearchesSoFar)] = static_cast<double>(searches_) / max_steps;
        x[static_cast<std::size_t>(Feature::Coverage)] = coverage();
        x[static_cast<std::size_t>(Feature::CandidateFound)] = candidate() ? 1.0 : 0.0;
        x[static_cast<std::size_t>(Feature::Verified)] = verified_ && candidate() ? 1.0 : 0.0;
        x[static_cast<std::size_t>(Feature::Hop0Cue)] = stated() ? 1.0 : 0.0;
        if (ctx_.budget_hint) {
            x[static_cast<std::size_t>(Feature::BudgetSatisfied)] = searches_ >= *ctx_.budget_hint ? 1.0 : -1.0;
        }
        return x;
    }

    void emit(std::string reasoning, TerminalTag tag, const std::string& payload) {
        std::string think = pending_think_.empty() ? std::move(reasoning) : pending_think_ + " " + reasoning;
        pending_think_.clear();
        std::string emission = render_emission(think, tag, payload);
        if (format_slip_ > 0.0 && rng_.bernoulli(format_slip_)) {
            emission.erase(emission.find("</think>"), std::string_view("</think>").size());
        }
        append_raw(emission);
    }

    void append_raw(const std::string& piece) {
        auto& raw = out_.trajectory.raw_text;
        if (!raw.empty()) raw += '\n';
        raw += piece;
    }

    // Reads the hit for (entity, relation). Skim reads may pick a neighbour.
    std::optional<std::pair<Triple, std::string>> read(const SearchResult& res, const std::string& entity,
                                                       const std::string& relation, bool careful) {
        std::optional<Triple> exact;
        std::vector<Triple> others;
        for (const auto& hit : res.hits) {
            auto t = parse_triple(hit.text);
            if (!t) continue;
            if (!exact && t->subject == entity && t->relation == relation) {
                exact = *t;
            } else {
                others.push_back(*t);
            }
        }
        if (!exact) return std::nullopt;
        if (!careful && !others.empty() && rng_.bernoulli(settings_.misread_prob)) {
            const Triple& wrong = others[rng_.below(others.size())];
            const std::string value = wrong.subject != entity ? wrong.subject : wrong.object;
            return std::make_pair(Triple{entity, relation, value}, value);
        }
        return std::make_pair(*exact, exact->object);
    }

    void record_search(std::string reasoning, const std::string& query, const SearchResult& res) {
        Step step;
        step.reasoning_text = reasoning;
        step.decision = Decision::Search;
        step.search_query = query;
        step.search_result = res;
        ctx_.steps_so_far.push_back(std::move(step));
        ctx_.retrieved_facts.insert(ctx_.retrieved_facts.end(), res.hits.begin(), res.hits.end());
        emit(std::move(reasoning), TerminalTag::ToolCall, query);
        append_raw(render_result_block(res));
        ++searches_;
    }

    void do_search() {
        if (!plan_) {
            const auto res = search(kb_, ctx_.query.text, settings_.top_k);
            record_search("Let me search for the question.", ctx_.query.text, res);
            return;
        }
        if (stated()) {
            const Fact& f = *plan_->embedded_fact;
            const std::string query = f.subject + " " + f.relation;
            const auto res = search(kb_, query, settings_.top_k);
            if (auto r = read(res, f.subject, f.relation, true)) {
                accepted_.assign(1, r->first);
                verified_ = r->second == f.object;
            }
            record_search(fmt::format("Let me confirm that the {} of {} is {}.", f.relation, f.subject, f.object), query, res);
            return;
        }
        if (resolved() == hops()) {
            // Verification of the final hop.
            const std::size_t j = static_cast<std::size_t>(hops() - 1);
            const std::string& entity = chain_[j];
            const std::string& relation = plan_->relations[j];
            const std::string query = entity + " " + relation;
            const auto res = search(kb_, query, settings_.top_k);
            const std::string reasoning =
                fmt::format("Let me verify that the {} of {} is {}.", relation, entity, chain_.back());
            if (auto r = read(res, entity, relation, true)) {
                chain_.back() = r->second;
                accepted_[j] = r->first;
                verified_ = true;
            }
            record_search(reasoning, query, res);
            return;
        }
        const std::size_t j = static_cast<std::size_t>(resolved());
        const std::string entity = chain_.back();
        const std::string& relation = plan_->relations[j];
        const std::string query = entity + " " + relation;
        const auto res = search(kb_, query, settings_.top_k);
        const std::string reasoning = fmt::format("I need the {} of {}.", relation, entity);
        if (auto r = read(res, entity, relation, hop_read_[j])) {
            hop_read_[j] = true;
            chain_.push_back(r->second);
            accepted_.push_back(r->first);
        } else if (j > 0) {
            // Dead end: the previous hop was misread. Back up one hop.
            chain_.pop_back();
            accepted_.pop_back();
        }
        record_search(reasoning, query, res);
    }

    void do_continue() {
        Step step;
        step.reasoning_text = "Let me review what I know so far.";
        step.decision = Decision::Continue;
        pending_think_ = pending_think_.empty() ? step.reasoning_text : pending_think_ + " " + step.reasoning_text;
        ctx_.steps_so_far.push_back(std::move(step));
    }

    void do_answer() {
        std::string answer;
        std::string reasoning;
        if (auto c = candidate()) {
            answer = *c;
            reasoning = stated() ? fmt::format("The question already states that the {} of {} is {}.",
                                               plan_->embedded_fact->relation, plan_->embedded_fact->subject, answer)
                                 : fmt::format("So the answer is {}.", answer);
        } else {
            answer = chain_.empty() ? std::string() : chain_.back();
            reasoning = fmt::format("I will answer with my best guess {}.", answer.empty() ? "unknown" : answer);
        }
        Step step;
        step.reasoning_text = reasoning;
        step.decision = Decision::Answer;
        ctx_.steps_so_far.push_back(std::move(step));
        emit(std::move(reasoning), TerminalTag::Answer, answer);
        out_.trajectory.final_answer = answer;
    }

    const PolicyState& policy_;
    const KnowledgeBase& kb_;
    AgentContext ctx_;
    const AgentSettings& settings_;
    Rng& rng_;
    DecisionMode mode_;

    std::optional<QuestionPlan> plan_;
    std::vector<std::string> content_terms_;
    std::vector<std::string> chain_;
    std::vector<bool> hop_read_;
    std::vector<Triple> accepted_;
    std::string pending_think_;
    int searches_ = 0;
    bool verified_ = false;
    double format_slip_ = 0.0;
    RolloutOutput out_;
};

}  // namespace

PromptDirectives parse_prompt_directives(std::string_view prompt) {
    PromptDirectives d;
    d.budget_per_hop = prompt.find("at most one search per hop") != std::string_view::npos;
    d.strict_format = prompt.find("Always use <think> pattern") != std::string_view::npos;
    d.has_example = prompt.find("\n## Example\n") != std::string_view::npos;
    return d;
}

AgentContext AgentContext::start(Query query, std::string prompt) {
    AgentContext ctx;
    if (parse_prompt_directives(prompt).budget_per_hop) {
        if (auto plan = parse_question(query.text)) ctx.budget_hint = plan->hops();
    }
    ctx.query = std::move(query);
    ctx.prompt = std::move(prompt);
    return ctx;
}

RolloutOutput rollout_traced(const PolicyState& policy, const KnowledgeBase& kb, AgentContext ctx,
                             const AgentSettings& settings, Rng& rng, DecisionMode mode) {
    return Episode(policy, kb, std::move(ctx), settings, rng, mode).run();
}

Trajectory rollout(const PolicyState& policy, const KnowledgeBase& kb, AgentContext ctx, const AgentSettings& settings,
                   Rng& rng, DecisionMode mode) {
    return rollout_traced(policy, kb, std::move(ctx), settings, rng, mode).trajectory;
}

}  // namespace searchlab
