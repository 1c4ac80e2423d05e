// Command-line front end: run, evaluate, ablate, analyze, gen-world.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "searchlab/jsonl.hpp"
#include "searchlab/report.hpp"

namespace sl = searchlab;

namespace {

struct CommonArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::string output_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("config", args.config, "Run configuration file (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", args.overrides, "Override a field, e.g. --set train.epochs=4 (repeatable)");
    cmd->add_option("--output-dir", args.output_dir, "Override output_dir");
}

sl::RunConfig load(const CommonArgs& args) {
    auto overrides = args.overrides;
    if (!args.output_dir.empty()) overrides.push_back("output_dir=\"" + args.output_dir + "\"");
    return sl::load_run_config(args.config, overrides);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

sl::World world_for(const sl::RunConfig& cfg, const std::string& world_path) {
    if (!world_path.empty()) return sl::load_world(world_path);
    return sl::generate_world(cfg.world);
}

int cmd_run(const CommonArgs& args) {
    const auto cfg = load(args);
    auto summarizer = sl::make_summarizer(cfg.summarizer);
    const auto started = std::chrono::steady_clock::now();
    const auto result = sl::execute_run(cfg, *summarizer, cfg.output_dir, warn);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    std::cout << result.report_text;
    std::cout << fmt::format("\nwall time: {:.2f} s (evaluation {:.3f} s)\nartifacts: {}\n", elapsed.count(),
                             std::chrono::duration<double>(result.eval.metrics.wall_time).count(),
                             cfg.output_dir.string());
    return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& policy_path, const std::string& bank_path,
                 const std::string& world_path, const std::string& experience) {
    const auto cfg = load(args);
    const auto world = world_for(cfg, world_path);
    sl::TrainConfig tcfg = cfg.train;
    tcfg.reward = cfg.reward;
    const sl::PolicyState policy =
        policy_path.empty() ? sl::PolicyState::with_prior(tcfg.budget_prior) : sl::load_policy(policy_path);
    const sl::ExperienceBank bank = bank_path.empty() ? sl::ExperienceBank{} : sl::load_bank(bank_path);
    bool with_exp = tcfg.experience_in_inference;
    if (experience == "on") with_exp = true;
    if (experience == "off") with_exp = false;

    const auto result = sl::evaluate(policy, world, tcfg, with_exp, bank);
    const auto table = sl::metrics_table({{with_exp ? "with_experience" : "without_experience", result.metrics}});
    std::cout << table.aligned();
    std::cout << fmt::format("wall time: {:.3f} s\n", std::chrono::duration<double>(result.metrics.wall_time).count());
    const auto dir = cfg.output_dir / "evaluate";
    std::filesystem::create_directories(dir);
    sl::jsonl::write_all(dir / "eval_trajectories.jsonl", result.trajectories);
    write_text(dir / "metrics.csv", table.csv());
    write_text(dir / "metrics.txt", table.aligned());
    return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text, std::uint64_t fallback) {
    if (text.empty()) return {fallback};
    std::vector<std::uint64_t> seeds;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto dash = item.find('-');
        if (dash != std::string::npos) {
            const auto lo = std::stoull(item.substr(0, dash));
            const auto hi = std::stoull(item.substr(dash + 1));
            for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
        } else {
            seeds.push_back(std::stoull(item));
        }
    }
    return seeds;
}

int cmd_ablate(const CommonArgs& args, const std::string& seeds_text) {
    const auto cfg = load(args);
    const auto world = sl::generate_world(cfg.world);
    const auto seeds = parse_seeds(seeds_text, cfg.train.seed);
    auto summarizer = sl::make_summarizer(cfg.summarizer);
    const auto rows = sl::run_ablation(cfg, world, seeds, *summarizer);
    const auto table = sl::ablation_table(rows);
    std::cout << fmt::format("Ablation over {} seed(s), {} queries\n\n", seeds.size(), world.queries.size());
    std::cout << table.aligned();
    write_text(cfg.output_dir / "ablation.csv", table.csv());
    write_text(cfg.output_dir / "ablation.txt", table.aligned());
    return 0;
}

int cmd_analyze(const CommonArgs& args, const std::string& log_path, const std::string& world_path,
                const std::string& judge_path) {
    const auto cfg = load(args);
    const std::filesystem::path wpath = world_path.empty() ? cfg.output_dir / "world.jsonl" : std::filesystem::path(world_path);
    const auto world = sl::load_world(wpath);
    const auto labels = judge_path.empty() ? std::map<std::string, double>{} : sl::load_judge_labels(judge_path);
    const auto report = sl::analyze_file(log_path, world, labels);
    if (!report.ok()) {
        std::cerr << "error: log contains query ids not present in " << wpath.string() << ":";
        for (const auto& id : report.unknown_ids) std::cerr << ' ' << id;
        std::cerr << '\n';
        return 2;
    }
    const auto per_query = sl::per_query_table(report);
    const auto aggregate = sl::aggregate_table(report);
    std::cout << "Per trajectory\n\n" << per_query.aligned() << "\nAggregate\n\n" << aggregate.aligned();
    write_text(cfg.output_dir / "analysis_per_query.csv", per_query.csv());
    write_text(cfg.output_dir / "analysis_aggregate.csv", aggregate.csv());
    return 0;
}

int cmd_gen_world(const CommonArgs& args) {
    const auto cfg = load(args);
    const auto world = sl::generate_world(cfg.world);
    std::filesystem::create_directories(cfg.output_dir);
    const auto path = cfg.output_dir / "world.jsonl";
    sl::save_world(world, path);
    std::map<int, int> by_hops;
    for (const auto& q : world.queries) ++by_hops[q.required_hops];
    std::cout << fmt::format("wrote {} ({} facts, {} queries)\n", path.string(), world.kb.facts().size(),
                             world.queries.size());
    for (const auto& [hops, count] : by_hops) std::cout << fmt::format("  hops={}: {}\n", hops, count);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale experiments for search agents trained with adaptive rewards and experience memory"};
    app.require_subcommand(1);

    CommonArgs run_args, eval_args, ablate_args, analyze_args, world_args;

    auto* run = app.add_subcommand("run", "Train, evaluate and write all artifacts to output_dir");
    add_common(run, run_args);

    auto* eval = app.add_subcommand("evaluate", "Evaluate a policy checkpoint with greedy decisions");
    add_common(eval, eval_args);
    std::string policy_path, bank_path, eval_world, experience = "config";
    eval->add_option("--policy", policy_path, "policy.jsonl checkpoint (default: untrained policy)");
    eval->add_option("--bank", bank_path, "bank.jsonl checkpoint (default: empty bank)");
    eval->add_option("--world", eval_world, "world.jsonl (default: generate from config)");
    eval->add_option("--experience", experience, "Experience in the prompt: on, off, or config")
        ->check(CLI::IsMember({"on", "off", "config"}));

    auto* ablate = app.add_subcommand("ablate", "Run the six-variant ablation matrix");
    add_common(ablate, ablate_args);
    std::string seeds;
    ablate->add_option("--seeds", seeds, "Training seeds, e.g. 1-5 or 1,3,7 (default: train.seed)");

    auto* analyze = app.add_subcommand("analyze", "Recompute metrics from a trajectory log");
    add_common(analyze, analyze_args);
    std::string log_path, analyze_world, judge_path;
    analyze->add_option("--log", log_path, "Trajectory log (JSONL)")->required()->check(CLI::ExistingFile);
    analyze->add_option("--world", analyze_world, "world.jsonl (default: <output_dir>/world.jsonl)");
    analyze->add_option("--judge-labels", judge_path, "JSONL of {query_id, label} from an external judge");

    auto* gen = app.add_subcommand("gen-world", "Generate and save the world described by the config");
    add_common(gen, world_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (eval->parsed()) return cmd_evaluate(eval_args, policy_path, bank_path, eval_world, experience);
        if (ablate->parsed()) return cmd_ablate(ablate_args, seeds);
        if (analyze->parsed()) return cmd_analyze(analyze_args, log_path, analyze_world, judge_path);
        if (gen->parsed()) return cmd_gen_world(world_args);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const sl::InfeasibleConfig& e) {
        std::cerr << "infeasible world config: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
