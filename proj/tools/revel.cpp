// revel command-line front end: run, eval, export, baselines.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "revel/config.hpp"
#include "revel/evaluators.hpp"
#include "revel/evolution.hpp"
#include "revel/executor.hpp"
#include "revel/export.hpp"
#include "revel/llm.hpp"
#include "revel/prompts.hpp"
#include "revel/runlog.hpp"

using namespace revel;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument(fmt::format("cannot open '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Config file (optional) overlaid with key=value overrides. Prints errors and returns nullopt.
std::optional<RunConfig> resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
    RawConfig raw;
    try {
        if (!path.empty()) raw = load_config_file(path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0) throw ConfigError(fmt::format("override '{}' is not key=value", kv));
            auto key = kv.substr(0, eq);
            key.erase(key.find_last_not_of(" \t") + 1);
            auto value = kv.substr(eq + 1);
            value.erase(0, value.find_first_not_of(" \t"));
            raw[key] = value;
        }
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return std::nullopt;
    }
    auto result = validate_config(raw);
    for (const auto& err : result.errors) fmt::print(stderr, "config error: {}\n", err);
    return result.config;
}

std::string metric_name(Problem p) { return p == Problem::bpp ? "excess bins %" : "optimality gap %"; }

std::string instance_name(const Instance& inst, std::size_t i) {
    const auto& name = std::visit([](const auto& x) -> const std::string& { return x.name; }, inst);
    return name.empty() ? fmt::format("instance-{}", i) : name;
}

void print_record(const FitnessRecord& rec, std::span<const Instance> instances, Problem problem) {
    fmt::print("{:<20} {:>14} {:>18}  {}\n", "instance", problem == Problem::bpp ? "bins" : "tour length",
               metric_name(problem), "verdict");
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const bool ok = rec.verdicts[i] == Verdict::ok;
        fmt::print("{:<20} {:>14} {:>18}  {}\n", instance_name(instances[i], i),
                   ok ? fmt::format("{:.4f}", rec.objective_values[i]) : "-",
                   ok ? fmt::format("{:.2f}", rec.per_instance_costs[i] * 100.0) : "-", to_string(rec.verdicts[i]));
    }
    if (rec.all_ok())
        fmt::print("mean {}: {:.2f}\n", metric_name(problem), rec.fitness * 100.0);
    else
        fmt::print("fitness: penalty ({:g})\n", rec.fitness);
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& summary_path,
            const std::string& resume_path) {
    const auto cfg = resolve_config(config_path, overrides);
    if (!cfg) return kExitUsage;
    try {
        auto instances = make_instances(*cfg);
        auto llm = make_llm_client(*cfg);
        RunLog log(cfg->log_path, default_run_id(*cfg), cfg->log_timestamps);
        std::optional<Checkpoint> resume;
        if (!resume_path.empty()) resume = load_checkpoint(resume_path);
        Engine engine(*cfg, *llm, make_session_factory(executor_options(*cfg)), instances, &log);
        const auto result = engine.run(resume);

        fmt::print("best candidate: {} (origin {}, generation {})\n", result.best.id, to_string(result.best.origin),
                   result.best.generation_created);
        fmt::print("{}\n", source_text(result.best.body));
        print_record(result.best_record, instances, cfg->problem);
        fmt::print("| {:<8} | {:<18} | {:>10} |\n", "method", metric_name(cfg->problem), "value");
        fmt::print("| {:<8} | {:<18} | {:>10.2f} |\n", "revel", metric_name(cfg->problem),
                   result.best_record.fitness * 100.0);
        fmt::print("run log: {} ({} generations, {} evaluations, {} tokens)\n", cfg->log_path, result.reports.size(),
                   engine.evaluations(), engine.tokens());

        if (!summary_path.empty()) {
            nlohmann::json summary{{"best", candidate_to_json(result.best)},
                                   {"record", record_to_json(result.best_record)},
                                   {"metric", metric_name(cfg->problem)},
                                   {"metric_percent", result.best_record.fitness * 100.0},
                                   {"generations", result.reports.size()},
                                   {"tokens", engine.tokens()}};
            std::ofstream out(summary_path, std::ios::trunc);
            if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", summary_path));
            out << summary.dump(2) << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitFailure;
    }
}

int cmd_eval(const std::string& candidate, const std::string& config_path, const std::vector<std::string>& overrides) {
    const auto cfg = resolve_config(config_path, overrides);
    if (!cfg) return kExitUsage;
    try {
        CandidateBody body = candidate.starts_with("builtin:") ? body_from_code(candidate)
                                                              : CandidateBody::guest(read_file(candidate));
        if (auto p = builtin_problem(body); p && *p != cfg->problem)
            throw std::invalid_argument(fmt::format("builtin targets {} but problem is {}", to_string(*p),
                                                    to_string(cfg->problem)));
        const auto cand = make_candidate(std::move(body), Origin::init);
        const auto instances = make_instances(*cfg);
        const auto rec = fitness(cand, make_session_factory(executor_options(*cfg)), instances,
                                 std::chrono::duration<double>(cfg->timeout_seconds));
        fmt::print("candidate: {}\n", cand.id);
        print_record(rec, instances, cfg->problem);
        return rec.all_ok() ? 0 : kExitFailure;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitFailure;
    }
}

int cmd_export(const std::string& log_path, const std::string& what, const std::string& out_path) {
    try {
        const auto kind = export_kind_from_string(what);
        std::ifstream in(log_path);
        if (!in) throw std::invalid_argument(fmt::format("cannot open '{}'", log_path));
        const auto csv = export_csv(read_run_log(in), kind);
        if (out_path.empty() || out_path == "-") {
            fmt::print("{}", csv);
        } else {
            std::ofstream out(out_path, std::ios::trunc);
            if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", out_path));
            out << csv;
        }
        return 0;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitFailure;
    }
}

int cmd_baselines(const std::string& config_path, const std::vector<std::string>& overrides) {
    const auto cfg = resolve_config(config_path, overrides);
    if (!cfg) return kExitUsage;
    try {
        const auto instances = make_instances(*cfg);
        const auto sessions = make_session_factory(executor_options(*cfg));
        fmt::print("| {:<22} | {:>18} |\n", "method", metric_name(cfg->problem));
        fmt::print("|{:-<24}|{:->20}|\n", "", "");
        for (const auto& info : registered_builtins()) {
            if (info.problem != cfg->problem) continue;
            const auto rec = fitness(make_candidate(CandidateBody::builtin(info.name), Origin::init), sessions, instances);
            fmt::print("| {:<22} | {:>18.2f} |\n", info.name, rec.fitness * 100.0);
        }
        if (cfg->problem == Problem::tsp) {
            double sum = 0.0;
            for (const auto& inst : instances) {
                const auto& t = std::get<TspInstance>(inst);
                const double len = tour_length(two_opt(nearest_neighbour(t), t), t);
                sum += optimality_gap(len, *t.reference_cost);
            }
            fmt::print("| {:<22} | {:>18.2f} |\n", "nearest_neighbour+2opt", sum / static_cast<double>(instances.size()));
        }
        return 0;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"revel: evolve heuristics through grouped LLM reflection sessions"};
    app.require_subcommand(1);

    std::string config_path, summary_path, resume_path, candidate, log_path, what, out_path;
    std::vector<std::string> overrides;

    auto* run = app.add_subcommand("run", "run the evolution loop");
    run->add_option("-c,--config", config_path, "config file (key = value)")->required();
    run->add_option("-s,--set", overrides, "override a config key: key=value");
    run->add_option("--summary", summary_path, "write the final summary as JSON");
    run->add_option("--resume", resume_path, "continue from a checkpoint file");

    auto* eval = app.add_subcommand("eval", "evaluate one candidate on the configured instances");
    eval->add_option("candidate", candidate, "builtin:NAME [k=v] or a guest source file")->required();
    eval->add_option("-c,--config", config_path, "config file");
    eval->add_option("-s,--set", overrides, "override a config key: key=value");

    auto* exp = app.add_subcommand("export", "export CSV from a run log");
    exp->add_option("log", log_path, "run log (JSON lines)")->required();
    exp->add_option("what", what, "trajectory, turns or groups")->required();
    exp->add_option("-o,--out", out_path, "output file (default stdout)");

    auto* base = app.add_subcommand("baselines", "classical baseline table on the configured instances");
    base->add_option("-c,--config", config_path, "config file");
    base->add_option("-s,--set", overrides, "override a config key: key=value");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, overrides, summary_path, resume_path);
    if (eval->parsed()) return cmd_eval(candidate, config_path, overrides);
    if (exp->parsed()) return cmd_export(log_path, what, out_path);
    return cmd_baselines(config_path, overrides);
}
