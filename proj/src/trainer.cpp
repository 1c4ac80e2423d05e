#include "searchlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace searchlab {

AgentSettings TrainConfig::agent_settings() const {
    AgentSettings s;
    s.max_steps = max_steps;
    s.top_k = top_k;
    s.misread_prob = misread_prob;
    s.format_error_prob = format_error_prob;
    return s;
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* msg) {
        if (!ok) throw std::invalid_argument(msg);
    };
    require(group_size >= 2, "train.group_size must be >= 2");
    require(batch_queries >= 1, "train.batch_queries must be >= 1");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "train.learning_rate must be > 0");
    require(epochs >= 1, "train.epochs must be >= 1");
    require(max_iterations >= 0, "train.max_iterations must be >= 0");
    require(max_steps >= 1, "train.max_steps must be >= 1");
    require(cadence >= 1, "train.cadence must be >= 1");
    require(few_shot_threshold >= 0.0 && few_shot_threshold <= 1.0, "train.few_shot_threshold must be in [0, 1]");
    require(few_shot_capacity >= 1, "train.few_shot_capacity must be >= 1");
    require(std::isfinite(budget_prior), "train.budget_prior must be finite");
    require(misread_prob >= 0.0 && misread_prob <= 1.0, "train.misread_prob must be in [0, 1]");
    require(format_error_prob >= 0.0 && format_error_prob <= 1.0, "train.format_error_prob must be in [0, 1]");
    require(top_k >= 1, "train.top_k must be >= 1");
    require(threads >= 1, "train.threads must be >= 1");
    require(checkpoint_every >= 0, "train.checkpoint_every must be >= 0");
    reward.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"group_size", c.group_size},
                       {"batch_queries", c.batch_queries},
                       {"learning_rate", c.learning_rate},
                       {"epochs", c.epochs},
                       {"max_iterations", c.max_iterations},
                       {"max_steps", c.max_steps},
                       {"seed", c.seed},
                       {"cadence", c.cadence},
                       {"experience_in_inference", c.experience_in_inference},
                       {"use_experience", c.use_experience},
                       {"use_few_shot", c.use_few_shot},
                       {"few_shot_threshold", c.few_shot_threshold},
                       {"few_shot_capacity", c.few_shot_capacity},
                       {"budget_prior", c.budget_prior},
                       {"misread_prob", c.misread_prob},
                       {"format_error_prob", c.format_error_prob},
                       {"top_k", c.top_k},
                       {"threads", c.threads},
                       {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    static const std::vector<std::string> known = {
        "group_size", "batch_queries", "learning_rate", "epochs", "max_iterations", "max_steps",
        "seed", "cadence", "experience_in_inference", "use_experience", "use_few_shot", "few_shot_threshold",
        "few_shot_capacity", "budget_prior", "misread_prob", "format_error_prob", "top_k", "threads",
        "checkpoint_every"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("unknown field train." + key);
        }
    }
    auto read = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(field);
        } catch (const nlohmann::json::exception&) {
            throw std::invalid_argument(std::string("train.") + key + " has the wrong type");
        }
    };
    read("group_size", c.group_size);
    read("batch_queries", c.batch_queries);
    read("learning_rate", c.learning_rate);
    read("epochs", c.epochs);
    read("max_iterations", c.max_iterations);
    read("max_steps", c.max_steps);
    read("seed", c.seed);
    read("cadence", c.cadence);
    read("experience_in_inference", c.experience_in_inference);
    read("use_experience", c.use_experience);
    read("use_few_shot", c.use_few_shot);
    read("few_shot_threshold", c.few_shot_threshold);
    read("few_shot_capacity", c.few_shot_capacity);
    read("budget_prior", c.budget_prior);
    read("misread_prob", c.misread_prob);
    read("format_error_prob", c.format_error_prob);
    read("top_k", c.top_k);
    read("threads", c.threads);
    read("checkpoint_every", c.checkpoint_every);
}

std::vector<double> compute_advantages(const std::vector<double>& rewards) {
    std::vector<double> adv(rewards.size(), 0.0);
    if (rewards.empty()) return adv;
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    if (sd < 1e-12) return adv;
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

RolloutGroup rollout_group(const PolicyState& policy, const KnowledgeBase& kb, const std::string& prompt,
                           const Query& query, int group_size, const AgentSettings& settings,
                           const BaselineTable& baselines, const RewardConfig& reward, std::uint64_t master_seed,
                           std::uint64_t group_index) {
    if (group_size < 2) throw std::invalid_argument("rollout_group: group_size must be >= 2");
    RolloutGroup g;
    g.query_id = query.id;
    g.baseline = baselines.get(query.id);
    const auto G = static_cast<std::uint64_t>(group_size);
    for (std::uint64_t i = 0; i < G; ++i) {
        Rng rng(derive_seed(master_seed, query.id, group_index * G + i));
        auto out = rollout_traced(policy, kb, AgentContext::start(query, prompt), settings, rng, DecisionMode::Sample);
        auto breakdown = overall_reward(out.trajectory, query.gold_answers, g.baseline, reward);
        g.rewards.push_back(breakdown.total);
        g.breakdowns.push_back(breakdown);
        g.trajectories.push_back(std::move(out.trajectory));
        g.traces.push_back(std::move(out.trace));
    }
    g.advantages = compute_advantages(g.rewards);
    return g;
}

void apply_baseline_observations(BaselineTable& table, const RolloutGroup& group, const RewardConfig& reward) {
    for (const auto& b : group.breakdowns) {
        table.observe(group.query_id, static_cast<int>(b.tool_calls), b.f1, reward);
    }
}

WeightMatrix policy_gradient(const PolicyState& policy, const RolloutGroup& group) {
    WeightMatrix grad{};
    const std::size_t n = group.traces.size();
    if (n == 0) return grad;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = group.advantages[i];
        if (a == 0.0) continue;
        for (const auto& point : group.traces[i]) {
            add_scaled(grad, log_prob_gradient(policy, point.features, point.decision), a / static_cast<double>(n));
        }
    }
    return grad;
}

PolicyState policy_update(PolicyState policy, const RolloutGroup& group, double lr) {
    const auto grad = policy_gradient(policy, group);
    add_scaled(policy.weights, grad, lr);
    return policy;
}

void to_json(nlohmann::json& j, const IterationMetrics& m) {
    j = nlohmann::json{{"iteration", m.iteration},     {"mean_reward", m.mean_reward},
                       {"mean_tc", m.mean_tc},         {"f1", m.f1},
                       {"em", m.em},                   {"bank_size", m.bank_size},
                       {"baseline_size", m.baseline_size}, {"bank_updated", m.bank_updated}};
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

}  // namespace

TrainReport train(const TrainConfig& cfg, const World& world, Summarizer& summarizer, const TrainHooks& hooks) {
    cfg.validate();
    if (world.queries.empty()) throw std::invalid_argument("train: world has no queries");

    TrainReport report;
    report.policy = PolicyState::with_prior(cfg.budget_prior);
    report.bank.cadence = cfg.cadence;
    report.few_shot = FewShotPool(cfg.few_shot_capacity, cfg.few_shot_threshold);
    const AgentSettings settings = cfg.agent_settings();
    std::vector<ScoredTrajectory> window;

    int iteration = 0;
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_queries);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_order(world.queries.size(), derive_seed(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch)));
        for (std::size_t start = 0; start < order.size(); start += batch) {
            if (cfg.max_iterations > 0 && iteration >= cfg.max_iterations) break;
            ++iteration;
            const std::size_t count = std::min(batch, order.size() - start);

            const PolicyState policy = report.policy;
            const ExperienceBank bank = cfg.use_experience ? report.bank : ExperienceBank{};
            const BaselineTable baselines = report.baselines;

            std::vector<std::string> prompts(count);
            for (std::size_t b = 0; b < count; ++b) {
                const Query& q = world.queries[order[start + b]];
                std::optional<std::string> example;
                if (cfg.use_few_shot) {
                    example = sample_few_shot(report.few_shot,
                                              derive_seed(cfg.seed, "few-shot:" + q.id, static_cast<std::uint64_t>(iteration)));
                }
                prompts[b] = assemble_prompt(kInstructions, bank, example, q);
            }

            std::vector<RolloutGroup> groups(count);
            parallel_for(count, cfg.threads, [&](std::size_t b) {
                const Query& q = world.queries[order[start + b]];
                groups[b] = rollout_group(policy, world.kb, prompts[b], q, cfg.group_size, settings, baselines,
                                          cfg.reward, cfg.seed, static_cast<std::uint64_t>(iteration));
            });

            WeightMatrix grad{};
            IterationMetrics m;
            m.iteration = iteration;
            std::size_t n_traj = 0;
            for (const auto& g : groups) {
                apply_baseline_observations(report.baselines, g, cfg.reward);
                add_scaled(grad, policy_gradient(policy, g), 1.0 / static_cast<double>(count));
                for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
                    const auto& b = g.breakdowns[i];
                    m.mean_reward += b.total;
                    m.mean_tc += static_cast<double>(b.tool_calls);
                    m.f1 += b.f1;
                    m.em += b.em;
                    ++n_traj;
                    if (b.total >= cfg.few_shot_threshold) {
                        report.few_shot.offer(trajectory_digest(g.trajectories[i]), b.total);
                    }
                    window.push_back({g.trajectories[i], b});
                }
                if (hooks.on_group) hooks.on_group(iteration, g);
            }
            add_scaled(report.policy.weights, grad, cfg.learning_rate);

            if (iteration % cfg.cadence == 0) {
                if (cfg.use_experience) {
                    const auto [good, bad] = contrastive_summaries(window, cfg.reward);
                    try {
                        report.bank = maybe_update(report.bank, iteration, good, bad, summarizer);
                        report.bank_update_steps.push_back(iteration);
                        m.bank_updated = true;
                    } catch (const SummarizerUnavailable& e) {
                        report.skipped_updates.push_back(iteration);
                        if (hooks.on_warning) {
                            hooks.on_warning("experience update skipped at iteration " + std::to_string(iteration) +
                                             ": " + e.what());
                        }
                    }
                }
                window.clear();
            }

            const double n = static_cast<double>(n_traj);
            m.mean_reward /= n;
            m.mean_tc /= n;
            m.f1 /= n;
            m.em /= n;
            m.bank_size = report.bank.size();
            m.baseline_size = report.baselines.size();
            report.metrics.push_back(m);
            if (hooks.on_iteration) hooks.on_iteration(m);

            if (cfg.checkpoint_every > 0 && iteration % cfg.checkpoint_every == 0) {
                report.checkpoints.push_back({iteration, report.policy, report.bank, report.baselines});
            }
        }
        if (cfg.max_iterations > 0 && iteration >= cfg.max_iterations) break;
    }
    report.iterations = iteration;
    if (report.checkpoints.empty() || report.checkpoints.back().iteration != iteration) {
        report.checkpoints.push_back({iteration, report.policy, report.bank, report.baselines});
    }
    return report;
}

std::optional<double> delta_pct(double tc_em1, double tc_em0) {
    if (tc_em0 == 0.0) return std::nullopt;
    return 100.0 * (tc_em0 - tc_em1) / tc_em0;
}

EvalRecord score_for_eval(const Trajectory& traj, const Query& q) {
    EvalRecord r;
    r.query_id = traj.query_id;
    const std::string answer = traj.final_answer.value_or("");
    r.f1 = token_f1(answer, q.gold_answers);
    r.em = traj.final_answer ? exact_match(answer, q.gold_answers) : 0;
    r.tool_calls = tool_calls(traj);
    r.tokens = traj.token_count;
    return r;
}

Metrics compute_metrics(const std::vector<EvalRecord>& records) {
    Metrics m;
    m.count = records.size();
    double tc1 = 0.0;
    double tc0 = 0.0;
    for (const auto& r : records) {
        m.f1_mean += r.f1;
        m.em_mean += r.em;
        m.tc_mean += static_cast<double>(r.tool_calls);
        m.tokens_total += r.tokens;
        if (r.em == 1) {
            tc1 += static_cast<double>(r.tool_calls);
            ++m.count_em1;
        } else {
            tc0 += static_cast<double>(r.tool_calls);
            ++m.count_em0;
        }
    }
    if (m.count > 0) {
        const double n = static_cast<double>(m.count);
        m.f1_mean /= n;
        m.em_mean /= n;
        m.tc_mean /= n;
    }
    if (m.count_em1 > 0) m.tc_em1 = tc1 / static_cast<double>(m.count_em1);
    if (m.count_em0 > 0) m.tc_em0 = tc0 / static_cast<double>(m.count_em0);
    if (m.count_em0 > 0) m.delta_pct = delta_pct(m.tc_em1, m.tc_em0);
    return m;
}

EvalResult evaluate(const PolicyState& policy, const World& world, const TrainConfig& cfg, bool with_experience,
                    const ExperienceBank& bank) {
    const auto started = std::chrono::steady_clock::now();
    const AgentSettings settings = cfg.agent_settings();
    const ExperienceBank empty;
    const ExperienceBank& used = with_experience ? bank : empty;

    EvalResult result;
    result.trajectories.resize(world.queries.size());
    parallel_for(world.queries.size(), cfg.threads, [&](std::size_t i) {
        const Query& q = world.queries[i];
        Rng rng(derive_seed(cfg.seed, "eval:" + q.id, 0));
        result.trajectories[i] = rollout(policy, world.kb, AgentContext::start(q, assemble_prompt(kInstructions, used, std::nullopt, q)),
                                         settings, rng, DecisionMode::Greedy);
    });
    for (std::size_t i = 0; i < world.queries.size(); ++i) {
        result.records.push_back(score_for_eval(result.trajectories[i], world.queries[i]));
    }
    result.metrics = compute_metrics(result.records);
    result.metrics.wall_time = std::chrono::steady_clock::now() - started;
    return result;
}

}  // namespace searchlab
