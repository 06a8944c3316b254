#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "revel/core.hpp"
#include "revel/grouping.hpp"
#include "revel/llm.hpp"
#include "revel/prompts.hpp"

namespace revel {

enum class EntryKind {
    task,              // problem task box
    group_reflection,  // initial diagnostics of the group
    reminder,          // injected current-best reminder
    think,             // THINK template
    decision,          // model reasoning ending in a tag
    exploit_context,   // summary of the exploit targets
    act,               // explore / exploit template
    candidate,         // model output block
    format_retry,      // request to fix a malformed reply
    observation        // evaluation result of the submitted candidate
};

std::string_view to_string(EntryKind k);

struct TranscriptEntry {
    Role role = Role::user;
    EntryKind kind = EntryKind::task;
    int turn = 0;
    std::string content;
};

/// Consecutive entries of the same role are joined with a blank line so the
/// chat alternates between engine and model.
std::vector<ChatMessage> to_chat_messages(const std::vector<TranscriptEntry>& transcript);

using Evaluated = std::pair<HeuristicCandidate, FitnessRecord>;
using CandidateEvaluator = std::function<FitnessRecord(const HeuristicCandidate&)>;

struct MemberDiagnostics {
    CandidateId id;
    double fitness = 0.0;
    std::vector<double> costs;
    double delta_vs_population_best = 0.0;
    double delta_vs_group_best = 0.0;
};

struct GroupStats {
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
};

struct SessionState {
    Problem problem = Problem::bpp;
    ReflectionGroup group;
    std::vector<Evaluated> members;  // group members with their records
    std::vector<MemberDiagnostics> diagnostics;
    GroupStats stats;
    double population_best = kPenaltyFitness;
    int generation = 0;
    int group_index = 0;
    int turn = 0;
    std::vector<TranscriptEntry> transcript;
    std::vector<Evaluated> feedback;  // F_t: pairs evaluated in this session
    std::optional<CandidateId> last_submitted;
    double previous_best = kPenaltyFitness;  // best fitness known before the latest turn
    std::mt19937_64 rng;
    long prompt_tokens = 0;
    long completion_tokens = 0;

    /// Best fitness over the group members and F_t.
    const Evaluated& best() const;
};

/// Seeds diagnostics and the transcript (task box + group reflection).
/// Throws std::invalid_argument when a group member has no record.
SessionState init_feedback(const ReflectionGroup& group, const std::map<CandidateId, Evaluated>& known,
                           double population_best, Problem problem, int generation, std::uint64_t seed,
                           int group_index = 0);

/// Text of the group-reflection message.
std::string render_group_reflection(const SessionState& state);

/// THINK template; the state's diagnostics travel in their own transcript entries.
std::string render_think_prompt(const SessionState& state);

std::string render_reminder(const SessionState& state);
std::string render_observation(const Evaluated& evaluated, double best_before, double best_after);

enum class ParseStatus { ok, decision_defaulted, candidate_missing, decision_defaulted_candidate_missing };

std::string_view to_string(ParseStatus s);

struct TurnOutcome {
    int turn = 0;
    Decision decision = Decision::exploit;
    bool reminder_injected = false;
    std::optional<HeuristicCandidate> candidate;
    std::optional<FitnessRecord> record;
    std::string reasoning_text;
    ParseStatus parse_status = ParseStatus::ok;
    std::vector<std::string> parse_errors;
};

struct ReflectionOptions {
    int max_turns = 6;
    double reminder_probability = 0.3;
    int max_retries = 2;
};

/// One observe -> reason -> act turn. Model misbehavior never throws: it is
/// recorded in the outcome and the turn still counts.
TurnOutcome run_turn(SessionState& state, LlmClient& llm, const CandidateEvaluator& evaluate,
                     const ReflectionOptions& options);

struct SessionResult {
    SessionState state;
    std::vector<TurnOutcome> turns;
    std::vector<Evaluated> candidates;  // generated in-session with ok fitness
};

SessionResult run_session(SessionState state, LlmClient& llm, const CandidateEvaluator& evaluate,
                          const ReflectionOptions& options);

/// One-line description of a candidate for reminders and logs.
std::string candidate_summary(const HeuristicCandidate& candidate);

}  // namespace revel
