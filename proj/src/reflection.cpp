#include "revel/reflection.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace revel {

std::string_view to_string(EntryKind k) {
    switch (k) {
        case EntryKind::task: return "task";
        case EntryKind::group_reflection: return "group_reflection";
        case EntryKind::reminder: return "reminder";
        case EntryKind::think: return "think";
        case EntryKind::decision: return "decision";
        case EntryKind::exploit_context: return "exploit_context";
        case EntryKind::act: return "act";
        case EntryKind::candidate: return "candidate";
        case EntryKind::format_retry: return "format_retry";
        case EntryKind::observation: return "observation";
    }
    return "unknown";
}

std::string_view to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::ok: return "ok";
        case ParseStatus::decision_defaulted: return "decision_defaulted";
        case ParseStatus::candidate_missing: return "candidate_missing";
        case ParseStatus::decision_defaulted_candidate_missing: return "decision_defaulted_candidate_missing";
    }
    return "unknown";
}

std::vector<ChatMessage> to_chat_messages(const std::vector<TranscriptEntry>& transcript) {
    std::vector<ChatMessage> out;
    for (const auto& e : transcript) {
        if (!out.empty() && out.back().role == e.role) {
            out.back().content += "\n\n";
            out.back().content += e.content;
        } else {
            out.push_back({e.role, e.content});
        }
    }
    return out;
}

const Evaluated& SessionState::best() const {
    const Evaluated* best = nullptr;
    auto consider = [&](const Evaluated& e) {
        if (!best || e.second.fitness < best->second.fitness) best = &e;
    };
    for (const auto& m : members) consider(m);
    for (const auto& f : feedback) consider(f);
    if (!best) throw std::logic_error("session without members");
    return *best;
}

std::string candidate_summary(const HeuristicCandidate& candidate) {
    std::string what;
    if (candidate.body.is_builtin()) {
        const auto& b = candidate.body.as_builtin();
        what = "builtin:" + b.name;
        for (const auto& [k, v] : b.params) what += fmt::format(" {}={}", k, v);
    } else {
        const auto& src = candidate.body.as_guest().source;
        what = fmt::format("python source, {} lines", std::count(src.begin(), src.end(), '\n') + 1);
    }
    std::string note = candidate.algorithm_note.substr(0, candidate.algorithm_note.find('\n'));
    if (note.size() > 120) note = note.substr(0, 117) + "...";
    return note.empty() ? fmt::format("{} [{}]", candidate.id.substr(0, 8), what)
                        : fmt::format("{} [{}] {}", candidate.id.substr(0, 8), what, note);
}

namespace {

std::string format_costs(const std::vector<double>& costs) {
    std::string out = "[";
    for (std::size_t i = 0; i < costs.size(); ++i) out += fmt::format("{}{:.6g}", i ? ", " : "", costs[i]);
    return out + "]";
}

std::string code_of(const HeuristicCandidate& c) {
    if (c.body.is_guest()) return c.body.as_guest().source;
    const auto& b = c.body.as_builtin();
    std::string marker = "builtin:" + b.name;
    for (const auto& [k, v] : b.params) marker += fmt::format(" {}={}", k, v);
    return marker;
}

}  // namespace

SessionState init_feedback(const ReflectionGroup& group, const std::map<CandidateId, Evaluated>& known,
                           double population_best, Problem problem, int generation, std::uint64_t seed,
                           int group_index) {
    if (group.members.empty()) throw std::invalid_argument("empty reflection group");
    SessionState s;
    s.problem = problem;
    s.group = group;
    s.population_best = population_best;
    s.generation = generation;
    s.group_index = group_index;
    s.rng.seed(seed);
    for (const auto& id : group.members) {
        const auto it = known.find(id);
        if (it == known.end()) throw std::invalid_argument(fmt::format("group member {} has no fitness record", id));
        s.members.push_back(it->second);
    }

    double group_best = kPenaltyFitness, sum = 0.0, worst = -kPenaltyFitness;
    for (const auto& [c, r] : s.members) {
        group_best = std::min(group_best, r.fitness);
        worst = std::max(worst, r.fitness);
        sum += r.fitness;
    }
    s.stats = {group_best, sum / static_cast<double>(s.members.size()), worst};
    for (const auto& [c, r] : s.members)
        s.diagnostics.push_back({c.id, r.fitness, r.per_instance_costs, r.fitness - population_best, r.fitness - group_best});
    s.previous_best = group_best;

    s.transcript.push_back({Role::user, EntryKind::task, 0, std::string(task_prompt(problem))});
    s.transcript.push_back({Role::user, EntryKind::group_reflection, 0, render_group_reflection(s)});
    return s;
}

std::string render_group_reflection(const SessionState& state) {
    std::string out = "GROUP REFLECTION\n";
    out += fmt::format("group kind: {}, members: {}\n", to_string(state.group.kind), state.members.size());
    out += fmt::format("fitness min / mean / max: {:.6g} / {:.6g} / {:.6g}\n", state.stats.min, state.stats.mean,
                       state.stats.max);
    out += fmt::format("population best fitness: {:.6g}\n", state.population_best);
    for (std::size_t i = 0; i < state.members.size(); ++i) {
        const auto& [c, r] = state.members[i];
        const auto& d = state.diagnostics[i];
        out += fmt::format("\n### heuristic {} ({})\n", i + 1, candidate_summary(c));
        out += fmt::format("fitness: {:.6g}\n", d.fitness);
        out += fmt::format("per-instance costs: {}\n", format_costs(d.costs));
        out += fmt::format("delta vs population best: {:+.6g}\n", d.delta_vs_population_best);
        out += fmt::format("delta vs group best: {:+.6g}\n", d.delta_vs_group_best);
        out += fmt::format("code:\n{}\n", code_of(c));
    }
    return out;
}

std::string render_think_prompt(const SessionState&) { return std::string(prompts::kThinkPrompt); }

std::string render_reminder(const SessionState& state) {
    const auto& [c, r] = state.best();
    return fmt::format("REMINDER: the current best fitness is {:.6g} ({}). Population best is {:.6g}.", r.fitness,
                       candidate_summary(c), state.population_best);
}

std::string render_observation(const Evaluated& evaluated, double best_before, double best_after) {
    const auto& [c, r] = evaluated;
    std::string verdicts;
    for (std::size_t i = 0; i < r.verdicts.size(); ++i) verdicts += fmt::format("{}{}", i ? ", " : "", to_string(r.verdicts[i]));
    std::string out = "<observation>\n";
    out += fmt::format("candidate: {}\n", candidate_summary(c));
    out += fmt::format("fitness: {:.6g}\n", r.fitness);
    out += fmt::format("per-instance costs: {}\n", format_costs(r.per_instance_costs));
    out += fmt::format("verdicts: [{}]\n", verdicts);
    out += fmt::format("best before: {:.6g}, best now: {:.6g}, delta: {:+.6g}\n", best_before, best_after,
                       r.fitness - best_before);
    out += "</observation>";
    return out;
}

namespace {

std::string exploit_context(const SessionState& state) {
    const auto& [best, rec] = state.best();
    std::string out = fmt::format("EXPLOIT TARGETS\nbest so far (fitness {:.6g}): {}\ncode:\n{}\n", rec.fitness,
                                  candidate_summary(best), code_of(best));
    if (state.last_submitted && *state.last_submitted != best.id) {
        for (const auto& [c, r] : state.feedback)
            if (c.id == *state.last_submitted) {
                out += fmt::format("last submitted (fitness {:.6g}): {}\ncode:\n{}\n", r.fitness, candidate_summary(c),
                                   code_of(c));
                break;
            }
    }
    return out;
}

struct Asked {
    std::string text;
    bool ok = false;
};

// Sends the transcript and appends the model reply; LlmError counts as an empty reply.
Asked ask(SessionState& state, LlmClient& llm, EntryKind kind, int turn, int attempt) {
    Asked a;
    const CallContext context{kind == EntryKind::decision ? "think" : "act", state.generation, state.group_index, turn,
                              attempt};
    try {
        const auto reply = llm.complete(to_chat_messages(state.transcript), context);
        state.prompt_tokens += reply.prompt_tokens;
        state.completion_tokens += reply.completion_tokens;
        a.text = reply.text;
        a.ok = true;
    } catch (const LlmError&) {
        a.text = {};
    }
    state.transcript.push_back({Role::assistant, kind, turn, a.text});
    return a;
}

}  // namespace

TurnOutcome run_turn(SessionState& state, LlmClient& llm, const CandidateEvaluator& evaluate,
                     const ReflectionOptions& options) {
    if (state.turn >= options.max_turns) throw std::logic_error("turn budget exhausted");
    TurnOutcome out;
    const int t = state.turn + 1;
    out.turn = t;

    std::bernoulli_distribution remind(std::clamp(options.reminder_probability, 0.0, 1.0));
    if (remind(state.rng)) {
        state.transcript.push_back({Role::user, EntryKind::reminder, t, render_reminder(state)});
        out.reminder_injected = true;
    }

    state.transcript.push_back({Role::user, EntryKind::think, t, render_think_prompt(state)});
    std::optional<Decision> decision;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        if (attempt > 0)
            state.transcript.push_back({Role::user, EntryKind::format_retry, t,
                                        "Your reply must end with exactly one of the tags <explore> or <exploit>."});
        const auto reply = ask(state, llm, EntryKind::decision, t, attempt);
        out.reasoning_text = reply.text;
        decision = parse_decision(reply.text);
        if (decision) break;
        out.parse_errors.push_back(reply.ok ? "decision tag missing or ambiguous" : "llm request failed");
    }
    const bool defaulted = !decision;
    out.decision = decision.value_or(Decision::exploit);

    if (out.decision == Decision::exploit)
        state.transcript.push_back({Role::user, EntryKind::exploit_context, t, exploit_context(state)});
    state.transcript.push_back({Role::user, EntryKind::act, t,
                                out.decision == Decision::explore ? render_explore_prompt() : render_exploit_prompt()});

    for (int attempt = 0; attempt <= options.max_retries && !out.candidate; ++attempt) {
        if (attempt > 0)
            state.transcript.push_back(
                {Role::user, EntryKind::format_retry, t,
                 fmt::format("Your previous output was invalid ({}). Output exactly one <{}> block containing both "
                             "<algorithm> and <code>, nothing else.",
                             out.parse_errors.back(), to_string(out.decision))});
        const auto reply = ask(state, llm, EntryKind::candidate, t, attempt);
        if (!reply.ok) {
            out.parse_errors.push_back("llm request failed");
            continue;
        }
        try {
            auto parsed = parse_candidate(reply.text, out.decision);
            auto body = body_from_code(parsed.code);
            std::vector<CandidateId> parents;
            if (out.decision == Decision::exploit) {
                parents.push_back(state.best().first.id);
            } else {
                parents = state.group.members;
            }
            out.candidate = make_candidate(std::move(body),
                                           out.decision == Decision::explore ? Origin::explore : Origin::exploit,
                                           std::move(parents), state.generation, std::move(parsed.algorithm_note));
        } catch (const std::invalid_argument& e) {
            out.parse_errors.push_back(e.what());
        }
    }

    if (out.candidate) {
        const double before = state.best().second.fitness;
        auto record = evaluate(*out.candidate);
        state.feedback.emplace_back(*out.candidate, record);
        state.last_submitted = out.candidate->id;
        const double after = state.best().second.fitness;
        state.transcript.push_back(
            {Role::user, EntryKind::observation, t, render_observation(state.feedback.back(), before, after)});
        state.previous_best = after;
        out.record = std::move(record);
    }

    if (defaulted && !out.candidate) out.parse_status = ParseStatus::decision_defaulted_candidate_missing;
    else if (defaulted) out.parse_status = ParseStatus::decision_defaulted;
    else if (!out.candidate) out.parse_status = ParseStatus::candidate_missing;
    state.turn = t;
    return out;
}

SessionResult run_session(SessionState state, LlmClient& llm, const CandidateEvaluator& evaluate,
                          const ReflectionOptions& options) {
    SessionResult result;
    while (state.turn < options.max_turns) result.turns.push_back(run_turn(state, llm, evaluate, options));
    for (const auto& e : state.feedback)
        if (e.second.all_ok()) result.candidates.push_back(e);
    result.state = std::move(state);
    return result;
}

}  // namespace revel
