#pragma once
// Run configuration, experiment orchestration and tabular reporting.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchlab/experience.hpp"
#include "searchlab/reward.hpp"
#include "searchlab/synth_env.hpp"
#include "searchlab/trainer.hpp"

namespace searchlab {

struct SummarizerSettings {
    enum class Mode { RuleBased, Remote };
    Mode mode = Mode::RuleBased;
    std::string endpoint;
    std::chrono::milliseconds timeout{10000};
};

struct RunConfig {
    WorldConfig world;
    TrainConfig train;  // train.reward mirrors `reward`
    RewardConfig reward;
    SummarizerSettings summarizer;
    std::filesystem::path output_dir = "out";

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

// Sections: world, train, reward, summarizer {mode, endpoint, timeout_ms},
// output_dir. Unknown fields and mistyped values are rejected by name.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

// Applies "dotted.path=value" to a config document. The value is parsed as
// JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

// Reads a config file, then applies the summarizer endpoint environment
// variable (when set), then the overrides in order. Validates the result.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

std::unique_ptr<Summarizer> make_summarizer(const SummarizerSettings& settings);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const;
    std::string aligned() const;
};

inline const std::vector<std::string> kMetricsHeader = {"setting", "count", "f1", "em", "tc", "tc_em1", "tc_em0",
                                                        "delta_pct", "tokens_total"};

std::vector<std::string> metrics_row(std::string_view label, const Metrics& m);
Table metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows);

// Field-wise mean over seeds; delta_pct is recomputed from the averaged tool
// counts and tokens_total is the integer mean.
Metrics average_metrics(const std::vector<Metrics>& runs);

struct RunResult {
    World world;
    TrainReport train;
    EvalResult eval;
    std::string report_text;
    std::string report_csv;
};

// Generates the world, trains, and evaluates the final policy. When
// output_dir is set, writes world.jsonl, train_trajectories.jsonl,
// metrics.jsonl, eval_trajectories.jsonl, report.csv, report.txt and
// checkpoints/. Wall time is left out of the report files.
RunResult execute_run(const RunConfig& cfg, Summarizer& summarizer, const std::optional<std::filesystem::path>& output_dir,
                      std::function<void(const std::string&)> on_warning = {});

std::string render_run_report(const RunConfig& cfg, const TrainReport& train, const EvalResult& eval);

void write_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck);
PolicyState load_policy(const std::filesystem::path& path);
ExperienceBank load_bank(const std::filesystem::path& path);

struct AblationVariant {
    std::string name;
    std::function<void(TrainConfig&)> apply;
};

// Full model, w/o Exp, w/o Few-shot, w/o Adaptive Rewards, w/o Exp & Few-shot,
// Only GRPO.
const std::vector<AblationVariant>& ablation_variants();

struct AblationRow {
    std::string variant;
    Metrics mean;
    std::vector<Metrics> per_seed;
};

// Trains and evaluates every variant for every seed on the same world.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const World& world, const std::vector<std::uint64_t>& seeds,
                                      Summarizer& summarizer);

Table ablation_table(const std::vector<AblationRow>& rows);

struct AnalyzeRow {
    std::size_t line = 0;
    std::string query_id;
    int hops = 0;
    EvalRecord record;
    std::optional<double> judge;
};

struct AnalyzeReport {
    std::vector<AnalyzeRow> rows;
    Metrics aggregate;
    std::optional<double> judge_mean;
    std::vector<std::string> unknown_ids;

    bool ok() const { return unknown_ids.empty(); }
};

// Recomputes F1, EM and TC from a trajectory log against the world's gold
// answers. Judge labels (query_id -> score in [0, 1]) are averaged when given.
AnalyzeReport analyze(const std::vector<Trajectory>& log, const World& world,
                      const std::map<std::string, double>& judge_labels = {});
AnalyzeReport analyze_file(const std::filesystem::path& log_path, const World& world,
                           const std::map<std::string, double>& judge_labels = {});

std::map<std::string, double> load_judge_labels(const std::filesystem::path& path);

Table per_query_table(const AnalyzeReport& report);
Table aggregate_table(const AnalyzeReport& report);

}  // namespace searchlab
