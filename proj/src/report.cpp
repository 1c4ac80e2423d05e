#include "searchlab/report.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "searchlab/jsonl.hpp"
#include "searchlab/remote_summarizer.hpp"

namespace searchlab {

namespace {

std::string_view mode_name(SummarizerSettings::Mode m) {
    return m == SummarizerSettings::Mode::Remote ? "remote" : "rule_based";
}

nlohmann::json summarizer_to_json(const SummarizerSettings& s) {
    return {{"mode", mode_name(s.mode)}, {"endpoint", s.endpoint}, {"timeout_ms", s.timeout.count()}};
}

bool same_kind(const nlohmann::json& value, const nlohmann::json& reference) {
    if (reference.is_number_float()) return value.is_number();
    if (reference.is_number_unsigned()) return value.is_number_unsigned();
    if (reference.is_number_integer()) return value.is_number_integer();
    if (reference.is_boolean()) return value.is_boolean();
    if (reference.is_string()) return value.is_string();
    if (reference.is_array()) return value.is_array();
    if (reference.is_object()) return value.is_object();
    return true;
}

// Rejects unknown keys and values whose JSON kind differs from the default.
void check_section(const nlohmann::json& given, const nlohmann::json& defaults, const std::string& section) {
    if (!given.is_object()) throw std::invalid_argument(section + " must be an object");
    for (const auto& [key, value] : given.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("unknown field " + section + "." + key);
        if (!same_kind(value, defaults.at(key))) {
            throw std::invalid_argument(fmt::format("{}.{} has the wrong type (expected {}, got {})", section, key,
                                                    defaults.at(key).type_name(), value.type_name()));
        }
    }
}

std::string fnum(double v, int precision = 4) { return fmt::format("{:.{}f}", v, precision); }

std::string fopt(const std::optional<double>& v, int precision = 2) { return v ? fnum(*v, precision) : "n/a"; }

std::string join_ints(const std::vector<int>& xs) {
    if (xs.empty()) return "none";
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + std::to_string(xs[i]);
    return out;
}

}  // namespace

void RunConfig::validate() const {
    world.validate();
    train.validate();
    reward.validate();
    if (summarizer.mode == SummarizerSettings::Mode::Remote && summarizer.endpoint.empty()) {
        throw std::invalid_argument("summarizer.endpoint must be set when summarizer.mode is remote");
    }
    if (summarizer.timeout.count() <= 0) throw std::invalid_argument("summarizer.timeout_ms must be > 0");
    if (output_dir.empty()) throw std::invalid_argument("output_dir must not be empty");
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    const nlohmann::json defaults = run_config_to_json(cfg);
    check_section(j, defaults, "config");
    try {
        if (j.contains("world")) {
            check_section(j.at("world"), defaults.at("world"), "world");
            if (j.at("world").contains("hop_distribution")) {
                for (const auto& item : j.at("world").at("hop_distribution")) {
                    if (!item.is_object() || !item.contains("hops") || !item.contains("weight") ||
                        !item.at("hops").is_number_integer() || !item.at("weight").is_number()) {
                        throw std::invalid_argument("world.hop_distribution entries must be {\"hops\": int, \"weight\": number}");
                    }
                }
            }
            cfg.world = j.at("world").get<WorldConfig>();
        }
        if (j.contains("train")) {
            check_section(j.at("train"), defaults.at("train"), "train");
            j.at("train").get_to(cfg.train);
        }
        if (j.contains("reward")) {
            check_section(j.at("reward"), defaults.at("reward"), "reward");
            cfg.reward = j.at("reward").get<RewardConfig>();
        }
        if (j.contains("summarizer")) {
            const auto& s = j.at("summarizer");
            check_section(s, defaults.at("summarizer"), "summarizer");
            if (s.contains("mode")) {
                const auto mode = s.at("mode").get<std::string>();
                if (mode == "rule_based") {
                    cfg.summarizer.mode = SummarizerSettings::Mode::RuleBased;
                } else if (mode == "remote") {
                    cfg.summarizer.mode = SummarizerSettings::Mode::Remote;
                } else {
                    throw std::invalid_argument("summarizer.mode must be rule_based or remote, got " + mode);
                }
            }
            if (s.contains("endpoint")) cfg.summarizer.endpoint = s.at("endpoint").get<std::string>();
            if (s.contains("timeout_ms")) cfg.summarizer.timeout = std::chrono::milliseconds(s.at("timeout_ms").get<long long>());
        }
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("invalid config: ") + e.what());
    }
    cfg.train.reward = cfg.reward;
    return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    return {{"world", cfg.world},
            {"train", cfg.train},
            {"reward", cfg.reward},
            {"summarizer", summarizer_to_json(cfg.summarizer)},
            {"output_dir", cfg.output_dir.string()}};
}

void apply_override(nlohmann::json& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw std::invalid_argument("override must look like section.field=value: " + std::string(assignment));
    }
    const std::string path(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
        value = raw;
    }
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw std::invalid_argument("override has an empty path segment: " + path);
        if (!node->is_object()) throw std::invalid_argument("override path does not name an object: " + path);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = nlohmann::json::object();
        start = dot + 1;
    }
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    if (const char* endpoint = std::getenv(kSummarizerEndpointEnv); endpoint != nullptr && *endpoint != '\0') {
        doc["summarizer"]["endpoint"] = endpoint;
    }
    for (const auto& o : overrides) apply_override(doc, o);
    RunConfig cfg = run_config_from_json(doc);
    cfg.validate();
    return cfg;
}

std::unique_ptr<Summarizer> make_summarizer(const SummarizerSettings& settings) {
    if (settings.mode == SummarizerSettings::Mode::Remote) {
        return std::make_unique<RemoteSummarizer>(RemoteSummarizerConfig{settings.endpoint, settings.timeout});
    }
    return std::make_unique<RuleBasedSummarizer>();
}

std::string Table::csv() const {
    auto line = [](const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
            if (!quote) {
                out += cells[i];
                continue;
            }
            out += '"';
            for (char c : cells[i]) {
                if (c == '"') out += '"';
                out += c;
            }
            out += '"';
        }
        return out + '\n';
    };
    std::string out = line(header);
    for (const auto& r : rows) out += line(r);
    return out;
}

std::string Table::aligned() const {
    std::vector<std::size_t> width(header.size(), 0);
    auto measure = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size() && i < width.size(); ++i) width[i] = std::max(width[i], cells[i].size());
    };
    measure(header);
    for (const auto& r : rows) measure(r);
    auto line = [&](const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t i = 0; i < cells.size() && i < width.size(); ++i) {
            if (i) out += "  ";
            out += i == 0 ? fmt::format("{:<{}}", cells[i], width[i]) : fmt::format("{:>{}}", cells[i], width[i]);
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out + '\n';
    };
    std::string out = line(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + '\n';
    for (const auto& r : rows) out += line(r);
    return out;
}

std::vector<std::string> metrics_row(std::string_view label, const Metrics& m) {
    return {std::string(label), std::to_string(m.count), fnum(m.f1_mean), fnum(m.em_mean), fnum(m.tc_mean),
            fnum(m.tc_em1), fnum(m.tc_em0), fopt(m.delta_pct), std::to_string(m.tokens_total)};
}

Table metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
    Table t;
    t.header = kMetricsHeader;
    for (const auto& [label, m] : rows) t.rows.push_back(metrics_row(label, m));
    return t;
}

Metrics average_metrics(const std::vector<Metrics>& runs) {
    Metrics m;
    if (runs.empty()) return m;
    const double n = static_cast<double>(runs.size());
    std::size_t tokens = 0;
    for (const auto& r : runs) {
        m.f1_mean += r.f1_mean / n;
        m.em_mean += r.em_mean / n;
        m.tc_mean += r.tc_mean / n;
        m.tc_em1 += r.tc_em1 / n;
        m.tc_em0 += r.tc_em0 / n;
        m.count += r.count;
        m.count_em1 += r.count_em1;
        m.count_em0 += r.count_em0;
        tokens += r.tokens_total;
        m.wall_time += r.wall_time;
    }
    m.count /= runs.size();
    m.count_em1 /= runs.size();
    m.count_em0 /= runs.size();
    m.tokens_total = tokens / runs.size();
    m.delta_pct = delta_pct(m.tc_em1, m.tc_em0);
    return m;
}

void write_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
    std::filesystem::create_directories(dir);
    {
        jsonl::Writer w(dir / "policy.jsonl");
        nlohmann::json j = ck.policy;
        j["record"] = "policy";
        j["iteration"] = ck.iteration;
        w.write(j);
    }
    jsonl::write_all(dir / "bank.jsonl", bank_records(ck.bank));
    jsonl::write_all(dir / "baselines.jsonl", baseline_records(ck.baselines));
}

PolicyState load_policy(const std::filesystem::path& path) {
    for (const auto& r : jsonl::read_all(path)) {
        if (r.value("record", "") == "policy") return r.get<PolicyState>();
    }
    throw std::invalid_argument("no policy record in " + path.string());
}

ExperienceBank load_bank(const std::filesystem::path& path) { return bank_from_records(jsonl::read_all(path)); }

std::string render_run_report(const RunConfig& cfg, const TrainReport& train, const EvalResult& eval) {
    std::string out;
    out += "Run report\n==========\n\n";
    auto shown = run_config_to_json(cfg);
    shown.erase("output_dir");
    shown["train"].erase("threads");
    out += "config: " + shown.dump() + "\n\n";
    out += "Training\n--------\n";
    out += fmt::format("iterations: {}\n", train.iterations);
    out += fmt::format("experience updates at: {}\n", join_ints(train.bank_update_steps));
    out += fmt::format("skipped experience updates: {}\n", join_ints(train.skipped_updates));
    out += fmt::format("baseline table entries: {}\n", train.baselines.size());
    out += fmt::format("few-shot pool size: {}\n", train.few_shot.size());
    if (!train.metrics.empty()) {
        const auto& last = train.metrics.back();
        out += fmt::format("last iteration: mean reward {:.4f}, mean TC {:.4f}, F1 {:.4f}, EM {:.4f}\n",
                           last.mean_reward, last.mean_tc, last.f1, last.em);
    }
    out += fmt::format("\nExperience bank (last update step {})\n", train.bank.last_update_step);
    if (train.bank.empty()) out += "(empty)\n";
    for (auto c : {GuidelineCategory::SuccessStrategies, GuidelineCategory::PitfallsToAvoid,
                   GuidelineCategory::ReasoningGuidelines}) {
        const auto& list = train.bank.entries(c);
        if (list.empty()) continue;
        out += fmt::format("## {}\n", category_title(c));
        for (const auto& g : list) out += "- " + g + "\n";
    }
    const bool with_exp = cfg.train.experience_in_inference;
    out += fmt::format("\nEvaluation (greedy, experience in prompt: {})\n", with_exp ? "yes" : "no");
    out += metrics_table({{"eval", eval.metrics}}).aligned();
    out += fmt::format("\nTC(EM=1) over {} queries, TC(EM=0) over {} queries.\n", eval.metrics.count_em1,
                       eval.metrics.count_em0);
    return out;
}

RunResult execute_run(const RunConfig& cfg, Summarizer& summarizer, const std::optional<std::filesystem::path>& output_dir,
                      std::function<void(const std::string&)> on_warning) {
    cfg.validate();
    TrainConfig tcfg = cfg.train;
    tcfg.reward = cfg.reward;

    RunResult result;
    result.world = generate_world(cfg.world);

    std::optional<jsonl::Writer> train_log;
    std::optional<jsonl::Writer> metrics_log;
    if (output_dir) {
        std::filesystem::create_directories(*output_dir);
        save_world(result.world, *output_dir / "world.jsonl");
        train_log.emplace(*output_dir / "train_trajectories.jsonl");
        metrics_log.emplace(*output_dir / "metrics.jsonl");
    }

    TrainHooks hooks;
    hooks.on_group = [&](int, const RolloutGroup& g) {
        if (!train_log) return;
        for (const auto& t : g.trajectories) train_log->write(t);
    };
    hooks.on_iteration = [&](const IterationMetrics& m) {
        if (metrics_log) metrics_log->write(m);
    };
    hooks.on_warning = std::move(on_warning);

    result.train = train(tcfg, result.world, summarizer, hooks);
    result.eval = evaluate(result.train.policy, result.world, tcfg, tcfg.experience_in_inference, result.train.bank);
    result.report_text = render_run_report(cfg, result.train, result.eval);
    result.report_csv = metrics_table({{"eval", result.eval.metrics}}).csv();

    if (output_dir) {
        jsonl::write_all(*output_dir / "eval_trajectories.jsonl", result.eval.trajectories);
        for (const auto& ck : result.train.checkpoints) {
            write_checkpoint(*output_dir / "checkpoints" / fmt::format("iter_{:04d}", ck.iteration), ck);
        }
        std::ofstream(*output_dir / "report.txt", std::ios::binary) << result.report_text;
        std::ofstream(*output_dir / "report.csv", std::ios::binary) << result.report_csv;
    }
    return result;
}

const std::vector<AblationVariant>& ablation_variants() {
    static const std::vector<AblationVariant> variants = {
        {"Full model", [](TrainConfig&) {}},
        {"w/o Exp", [](TrainConfig& c) { c.use_experience = false; }},
        {"w/o Few-shot", [](TrainConfig& c) { c.use_few_shot = false; }},
        {"w/o Adaptive Rewards", [](TrainConfig& c) { c.reward.w_beta = 0.0; }},
        {"w/o Exp & Few-shot",
         [](TrainConfig& c) {
             c.use_experience = false;
             c.use_few_shot = false;
         }},
        {"Only GRPO",
         [](TrainConfig& c) {
             c.use_experience = false;
             c.use_few_shot = false;
             c.reward.w_beta = 0.0;
         }},
    };
    return variants;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const World& world, const std::vector<std::uint64_t>& seeds,
                                      Summarizer& summarizer) {
    if (seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
    std::vector<AblationRow> rows;
    for (const auto& variant : ablation_variants()) {
        AblationRow row;
        row.variant = variant.name;
        for (auto seed : seeds) {
            TrainConfig t = cfg.train;
            t.reward = cfg.reward;
            t.seed = seed;
            variant.apply(t);
            const auto report = train(t, world, summarizer);
            const bool with_exp = t.use_experience && t.experience_in_inference;
            row.per_seed.push_back(evaluate(report.policy, world, t, with_exp, report.bank).metrics);
        }
        row.mean = average_metrics(row.per_seed);
        rows.push_back(std::move(row));
    }
    return rows;
}

Table ablation_table(const std::vector<AblationRow>& rows) {
    Table t;
    t.header = {"variant", "f1", "f1_change_pct", "em", "em_change_pct", "tc", "tc_em1", "tc_em0", "delta_pct"};
    const Metrics* full = rows.empty() ? nullptr : &rows.front().mean;
    auto change = [](double v, double ref) -> std::string {
        if (ref == 0.0) return "n/a";
        return fmt::format("{:+.1f}", 100.0 * (v - ref) / ref);
    };
    for (const auto& r : rows) {
        const auto& m = r.mean;
        t.rows.push_back({r.variant, fnum(m.f1_mean), change(m.f1_mean, full->f1_mean), fnum(m.em_mean),
                          change(m.em_mean, full->em_mean), fnum(m.tc_mean), fnum(m.tc_em1), fnum(m.tc_em0),
                          fopt(m.delta_pct)});
    }
    return t;
}

AnalyzeReport analyze(const std::vector<Trajectory>& log, const World& world,
                      const std::map<std::string, double>& judge_labels) {
    AnalyzeReport report;
    std::set<std::string> unknown;
    std::vector<EvalRecord> records;
    double judge_sum = 0.0;
    std::size_t judged = 0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& traj = log[i];
        const Query* q = world.find_query(traj.query_id);
        if (q == nullptr) {
            if (unknown.insert(traj.query_id).second) report.unknown_ids.push_back(traj.query_id);
            continue;
        }
        AnalyzeRow row;
        row.line = i + 1;
        row.query_id = traj.query_id;
        row.hops = q->required_hops;
        row.record = score_for_eval(traj, *q);
        if (auto it = judge_labels.find(traj.query_id); it != judge_labels.end()) {
            row.judge = it->second;
            judge_sum += it->second;
            ++judged;
        }
        records.push_back(row.record);
        report.rows.push_back(std::move(row));
    }
    report.aggregate = compute_metrics(records);
    if (judged > 0) report.judge_mean = judge_sum / static_cast<double>(judged);
    return report;
}

AnalyzeReport analyze_file(const std::filesystem::path& log_path, const World& world,
                           const std::map<std::string, double>& judge_labels) {
    std::vector<Trajectory> log;
    for (const auto& r : jsonl::read_all(log_path)) log.push_back(r.get<Trajectory>());
    return analyze(log, world, judge_labels);
}

std::map<std::string, double> load_judge_labels(const std::filesystem::path& path) {
    std::map<std::string, double> labels;
    for (const auto& r : jsonl::read_all(path)) {
        const double label = r.at("label").get<double>();
        if (label < 0.0 || label > 1.0) throw std::invalid_argument("judge label out of [0, 1] in " + path.string());
        labels[r.at("query_id").get<std::string>()] = label;
    }
    return labels;
}

Table per_query_table(const AnalyzeReport& report) {
    Table t;
    t.header = {"line", "query_id", "hops", "f1", "em", "tc", "tokens"};
    const bool judged = report.judge_mean.has_value();
    if (judged) t.header.push_back("judge");
    for (const auto& r : report.rows) {
        std::vector<std::string> cells = {std::to_string(r.line),           r.query_id,
                                          std::to_string(r.hops),           fnum(r.record.f1),
                                          std::to_string(r.record.em),      std::to_string(r.record.tool_calls),
                                          std::to_string(r.record.tokens)};
        if (judged) cells.push_back(r.judge ? fnum(*r.judge) : "n/a");
        t.rows.push_back(std::move(cells));
    }
    return t;
}

Table aggregate_table(const AnalyzeReport& report) {
    Table t = metrics_table({{"aggregate", report.aggregate}});
    if (report.judge_mean) {
        t.header.push_back("judge_mean");
        t.rows.front().push_back(fnum(*report.judge_mean));
    }
    return t;
}

}  // namespace searchlab
