#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revel/config.hpp"
#include "revel/core.hpp"
#include "revel/evaluators.hpp"
#include "revel/grouping.hpp"
#include "revel/llm.hpp"
#include "revel/reflection.hpp"
#include "revel/runlog.hpp"

namespace revel {

/// Raised when a run cannot start: no valid initial candidate at all.
class FatalRunError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Instance set selected by the config: instances_file, tsplib_file, or a seeded generator.
std::vector<Instance> make_instances(const RunConfig& config);

/// Executor settings from the config; guest_runner is split on whitespace into argv.
ExecutorOptions executor_options(const RunConfig& config);

/// Run id derived from the seed, so equal configs produce equal logs.
std::string default_run_id(const RunConfig& config);

/// Independent 64-bit seed for (base, generation, stream).
std::uint64_t derive_seed(std::uint64_t base, int generation, int stream);

struct TurnSummary {
    int turn = 0;
    Decision decision = Decision::exploit;
    ParseStatus parse_status = ParseStatus::ok;
    bool reminder = false;
    std::optional<CandidateId> candidate_id;
    std::optional<double> fitness;
};

struct GroupReport {
    ReflectionGroup group;
    std::vector<TurnSummary> turns;
    std::vector<CandidateId> produced;  // ok candidates from the session
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct GenerationReport {
    int generation = 0;
    std::vector<std::pair<CandidateId, double>> population;  // after selection
    Partition partition;
    bool grouping_degraded = false;
    std::vector<GroupReport> groups;
    std::vector<CandidateId> new_candidates;  // tilde-H after dedup
    std::vector<CandidateId> selected;
    std::vector<CandidateId> dropped;
    double best_so_far = kPenaltyFitness;
    CandidateId best_id;
    long tokens_used = 0;  // LLM tokens spent in this generation
};

struct RunResult {
    HeuristicCandidate best;
    FitnessRecord best_record;
    std::vector<GenerationReport> reports;
    Population final_population;
    long init_tokens = 0;
};

struct Checkpoint {
    int generation = 0;  // last completed generation
    std::uint64_t seed = 0;
    Population population;
    HeuristicCandidate best;
    FitnessRecord best_record;
    long tokens = 0;
};

nlohmann::json candidate_to_json(const HeuristicCandidate& candidate);
HeuristicCandidate candidate_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const FitnessRecord& record);
FitnessRecord record_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Runs the generation loop over one instance set. Fitness is cached by candidate id;
/// the evaluation is deterministic so a candidate is never simulated twice.
class Engine {
public:
    Engine(RunConfig config, LlmClient& llm, SessionFactory sessions, std::vector<Instance> instances,
           RunLog* log = nullptr);

    /// Cached fitness; emits candidate_evaluated on first evaluation.
    const FitnessRecord& evaluate(const HeuristicCandidate& candidate);

    /// N candidates from the model, deduplicated, padded with builtins. Throws FatalRunError
    /// when neither the model nor the registry yields a candidate.
    Population initialize_population();

    /// One generation from `population` (generation index = population.generation + 1).
    std::pair<Population, GenerationReport> step_generation(const Population& population);

    /// Full run, optionally continuing from a checkpoint.
    RunResult run(const std::optional<Checkpoint>& resume = std::nullopt);

    const RunConfig& config() const { return config_; }
    std::size_t evaluations() const { return cache_.size(); }
    long tokens() const { return tokens_; }

private:
    void track_best(const HeuristicCandidate& candidate, const FitnessRecord& record);

    RunConfig config_;
    LlmClient& llm_;
    SessionFactory sessions_;
    std::vector<Instance> instances_;
    RunLog* log_;
    std::map<CandidateId, FitnessRecord> cache_;
    std::optional<std::pair<HeuristicCandidate, FitnessRecord>> best_;
    long tokens_ = 0;
};

/// Builtin bodies for the problem, in padding order: registry defaults first,
/// then parameter variants of the parameterised builtins.
std::vector<CandidateBody> builtin_padding(Problem problem, std::size_t count);

}  // namespace revel
