#include "revel/evolution.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "revel/executor.hpp"
#include "revel/prompts.hpp"
#include "revel/similarity.hpp"

namespace revel {

using json = nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument(fmt::format("cannot open '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json body_to_json(const CandidateBody& body) {
    if (body.is_guest()) return {{"type", "guest"}, {"source", body.as_guest().source}};
    const auto& b = body.as_builtin();
    return {{"type", "builtin"}, {"name", b.name}, {"params", b.params}};
}

json config_to_json(const RunConfig& c) {
    return {
        {"max_turns", c.max_turns},
        {"num_candidates_to_initialize", c.num_candidates_to_initialize},
        {"epochs", c.epochs},
        {"top_k", c.top_k},
        {"reminder_probability", c.reminder_probability},
        {"num_clusters", c.num_clusters},
        {"num_elements", c.num_elements},
        {"alpha", c.alpha},
        {"beta", c.beta},
        {"delta", c.delta},
        {"groups_per_crossover", c.groups_per_crossover},
        {"timeout_seconds", c.timeout_seconds},
        {"problem", to_string(c.problem)},
        {"seed", c.seed},
        {"instance_seed", c.instance_seed},
        {"llm_backend", c.llm_backend == LlmBackend::mock ? "mock" : "remote"},
    };
}

json ids_json(const std::vector<std::vector<CandidateId>>& clusters) {
    json out = json::array();
    for (const auto& c : clusters) out.push_back(c);
    return out;
}

json transcript_json(const std::vector<TranscriptEntry>& entries, int turn) {
    json out = json::array();
    for (const auto& e : entries)
        if (e.turn == turn) out.push_back({{"role", to_string(e.role)}, {"kind", to_string(e.kind)}, {"content", e.content}});
    return out;
}

bool better(const std::pair<HeuristicCandidate, FitnessRecord>& a,
            const std::pair<HeuristicCandidate, FitnessRecord>& b) {
    if (a.second.fitness != b.second.fitness) return a.second.fitness < b.second.fitness;
    if (a.first.generation_created != b.first.generation_created)
        return a.first.generation_created < b.first.generation_created;
    return a.first.id < b.first.id;
}

}  // namespace

std::vector<Instance> make_instances(const RunConfig& config) {
    std::vector<Instance> out;
    if (!config.instances_file.empty()) {
        out = parse_instances_json(read_file(config.instances_file));
        for (const auto& inst : out)
            if (problem_of(inst) != config.problem)
                throw std::invalid_argument(fmt::format("instances_file holds {} instances but problem is {}",
                                                        to_string(problem_of(inst)), to_string(config.problem)));
        return out;
    }
    if (!config.tsplib_file.empty()) {
        if (config.problem != Problem::tsp) throw std::invalid_argument("tsplib_file requires problem = tsp");
        auto inst = parse_tsplib(read_file(config.tsplib_file));
        if (config.tsplib_reference_cost) inst.reference_cost = *config.tsplib_reference_cost;
        if (!inst.reference_cost) inst.reference_cost = tour_length(two_opt(nearest_neighbour(inst), inst), inst);
        out.emplace_back(std::move(inst));
        return out;
    }
    const auto seed = static_cast<std::uint64_t>(config.instance_seed);
    if (config.problem == Problem::bpp) {
        for (auto& b : generate_bpp_instances(config.bpp_items, config.bpp_capacity, config.instance_count, seed,
                                              config.bpp_max_item_fraction))
            out.emplace_back(std::move(b));
    } else {
        for (auto& t : generate_tsp_instances(config.tsp_nodes, config.instance_count, seed)) out.emplace_back(std::move(t));
    }
    return out;
}

ExecutorOptions executor_options(const RunConfig& config) {
    ExecutorOptions options;
    options.timeout_seconds = config.timeout_seconds;
    options.guest_command.clear();
    std::istringstream words(config.guest_runner);
    for (std::string w; words >> w;) options.guest_command.push_back(w);
    if (options.guest_command.empty()) throw std::invalid_argument("guest_runner is empty");
    return options;
}

std::string default_run_id(const RunConfig& config) {
    return fmt::format("run-{:016x}", derive_seed(config.seed, -1, 0));
}

std::uint64_t derive_seed(std::uint64_t base, int generation, int stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(generation), static_cast<std::uint32_t>(stream)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

// --- Serialization ------------------------------------------------------------

json candidate_to_json(const HeuristicCandidate& c) {
    return {{"id", c.id},
            {"body", body_to_json(c.body)},
            {"origin", to_string(c.origin)},
            {"parents", c.parent_ids},
            {"generation_created", c.generation_created},
            {"algorithm_note", c.algorithm_note}};
}

HeuristicCandidate candidate_from_json(const json& j) {
    const auto& b = j.at("body");
    CandidateBody body = b.at("type") == "builtin"
                             ? CandidateBody::builtin(b.at("name").get<std::string>(),
                                                      b.value("params", std::map<std::string, double>{}))
                             : CandidateBody::guest(b.at("source").get<std::string>());
    auto c = make_candidate(std::move(body), origin_from_string(j.at("origin").get<std::string>()),
                            j.value("parents", std::vector<CandidateId>{}), j.value("generation_created", 0),
                            j.value("algorithm_note", std::string{}));
    if (j.contains("id") && j["id"].get<std::string>() != c.id)
        throw std::invalid_argument(fmt::format("candidate id {} does not match its body", j["id"].get<std::string>()));
    return c;
}

json record_to_json(const FitnessRecord& r) {
    json verdicts = json::array();
    for (auto v : r.verdicts) verdicts.push_back(to_string(v));
    return {{"candidate_id", r.candidate_id},
            {"fitness", r.fitness},
            {"per_instance_costs", r.per_instance_costs},
            {"objective_values", r.objective_values},
            {"verdicts", verdicts}};
}

FitnessRecord record_from_json(const json& j) {
    FitnessRecord r;
    r.candidate_id = j.at("candidate_id").get<std::string>();
    r.fitness = j.at("fitness").get<double>();
    r.per_instance_costs = j.at("per_instance_costs").get<std::vector<double>>();
    r.objective_values = j.value("objective_values", std::vector<double>{});
    for (const auto& v : j.at("verdicts")) r.verdicts.push_back(verdict_from_string(v.get<std::string>()));
    return r;
}

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
    json members = json::array();
    for (const auto& [c, r] : cp.population.members)
        members.push_back({{"candidate", candidate_to_json(c)}, {"record", record_to_json(r)}});
    const json doc{{"generation", cp.generation},
                   {"seed", cp.seed},
                   {"tokens", cp.tokens},
                   {"population", members},
                   {"best", {{"candidate", candidate_to_json(cp.best)}, {"record", record_to_json(cp.best_record)}}}};
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error(fmt::format("cannot write checkpoint '{}'", tmp));
        out << doc.dump(2) << '\n';
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error(fmt::format("cannot move checkpoint into '{}'", path));
}

Checkpoint load_checkpoint(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw std::invalid_argument(fmt::format("checkpoint '{}' is not valid JSON: {}", path, e.what()));
    }
    try {
        Population pop;
        pop.generation = doc.at("generation").get<int>();
        for (const auto& m : doc.at("population"))
            pop.members.emplace_back(candidate_from_json(m.at("candidate")), record_from_json(m.at("record")));
        return Checkpoint{pop.generation,
                          doc.at("seed").get<std::uint64_t>(),
                          pop,
                          candidate_from_json(doc.at("best").at("candidate")),
                          record_from_json(doc.at("best").at("record")),
                          doc.value("tokens", 0L)};
    } catch (const json::exception& e) {
        throw std::invalid_argument(fmt::format("checkpoint '{}' is malformed: {}", path, e.what()));
    }
}

// --- Engine -------------------------------------------------------------------

std::vector<CandidateBody> builtin_padding(Problem problem, std::size_t count) {
    std::vector<CandidateBody> out;
    std::vector<const BuiltinInfo*> tunable;
    for (const auto& info : registered_builtins()) {
        if (info.problem != problem) continue;
        out.push_back(CandidateBody::builtin(info.name));
        if (!info.param_defaults.empty()) tunable.push_back(&info);
    }
    static constexpr std::array<double, 8> kScales{0.5, 2.0, 0.25, 4.0, 0.125, 8.0, 0.75, 1.5};
    for (double scale : kScales) {
        if (out.size() >= count) break;
        for (const auto* info : tunable) {
            std::map<std::string, double> params;
            for (const auto& [k, v] : info->param_defaults) params[k] = v * scale;
            out.push_back(CandidateBody::builtin(info->name, std::move(params)));
        }
    }
    if (out.size() > count) out.erase(out.begin() + static_cast<std::ptrdiff_t>(count), out.end());
    return out;
}

Engine::Engine(RunConfig config, LlmClient& llm, SessionFactory sessions, std::vector<Instance> instances, RunLog* log)
    : config_(std::move(config)), llm_(llm), sessions_(std::move(sessions)), instances_(std::move(instances)), log_(log) {
    if (instances_.empty()) throw std::invalid_argument("engine needs at least one instance");
    for (const auto& inst : instances_)
        if (problem_of(inst) != config_.problem) throw std::invalid_argument("instance problem does not match config");
}

void Engine::track_best(const HeuristicCandidate& candidate, const FitnessRecord& record) {
    if (!best_ || better({candidate, record}, *best_)) best_.emplace(candidate, record);
}

const FitnessRecord& Engine::evaluate(const HeuristicCandidate& candidate) {
    if (const auto it = cache_.find(candidate.id); it != cache_.end()) return it->second;
    auto record = fitness(candidate, sessions_, instances_, std::chrono::duration<double>(config_.timeout_seconds));
    const auto& stored = cache_.emplace(candidate.id, std::move(record)).first->second;
    if (log_) {
        json payload = candidate_to_json(candidate);
        payload["record"] = record_to_json(stored);
        log_->emit(EventKind::candidate_evaluated, std::move(payload));
    }
    return stored;
}

Population Engine::initialize_population() {
    const auto n = static_cast<std::size_t>(config_.num_candidates_to_initialize);
    const int max_calls = 2 * config_.num_candidates_to_initialize;
    Population pop;
    std::vector<ChatMessage> messages{{Role::user, render_initialization_prompt(config_.problem)}};

    for (int call = 0; call < max_calls && pop.members.size() < n; ++call) {
        std::string text;
        try {
            const auto reply = llm_.complete(messages, CallContext{"init", 0, -1, call, 0});
            tokens_ += reply.prompt_tokens + reply.completion_tokens;
            text = reply.text;
        } catch (const LlmError&) {
        }
        messages.push_back({Role::assistant, text});

        std::string rejection;
        try {
            auto parsed = parse_candidate(text, Decision::explore);
            auto body = body_from_code(parsed.code);
            if (auto p = builtin_problem(body); p && *p != config_.problem)
                throw std::invalid_argument(fmt::format("builtin targets {}", to_string(*p)));
            auto cand = make_candidate(std::move(body), Origin::init, {}, 0, std::move(parsed.algorithm_note));
            if (pop.contains(cand.id)) throw std::invalid_argument("duplicate of an earlier candidate");
            const auto& rec = evaluate(cand);
            if (!rec.all_ok()) throw std::invalid_argument(fmt::format("evaluation failed ({})", to_string(rec.verdicts.front())));
            track_best(cand, rec);
            pop.members.emplace_back(std::move(cand), rec);
        } catch (const std::invalid_argument& e) {
            rejection = e.what();
        }
        messages.push_back({Role::user, rejection.empty()
                                            ? std::string("Generate another heuristic that differs from all previous "
                                                          "ones, in the same output format.")
                                            : fmt::format("That output was rejected ({}). Generate a different "
                                                          "heuristic in the same output format.",
                                                          rejection)});
    }

    for (auto& body : builtin_padding(config_.problem, n + pop.members.size())) {
        if (pop.members.size() >= n) break;
        auto cand = make_candidate(std::move(body), Origin::init, {}, 0, "registered builtin");
        if (pop.contains(cand.id)) continue;
        const auto& rec = evaluate(cand);
        if (!rec.all_ok()) continue;
        track_best(cand, rec);
        pop.members.emplace_back(std::move(cand), rec);
    }
    if (pop.members.empty()) throw FatalRunError("no valid initial candidate and no applicable builtin");
    pop.generation = 0;
    return pop;
}

std::pair<Population, GenerationReport> Engine::step_generation(const Population& population) {
    const int g = population.generation + 1;
    const long tokens_before = tokens_;
    GenerationReport report;
    report.generation = g;

    std::map<CandidateId, Evaluated> known;
    std::map<CandidateId, double> fitness_of;
    for (const auto& m : population.members) {
        known.emplace(m.first.id, m);
        fitness_of[m.first.id] = m.second.fitness;
        track_best(m.first, m.second);
    }
    const double population_best = population.best_fitness().value_or(kPenaltyFitness);

    // Grouping.
    std::vector<ReflectionGroup> groups;
    json partition_event;
    try {
        const auto sim = build_matrices(population.members, config_.alpha, config_.beta);
        const int m_target = std::min(static_cast<int>(sim.ids.size()), 2 * config_.num_clusters);
        const auto over = over_partition(sim.dissimilarity, sim.ids, config_.delta, m_target);
        std::vector<ClusterCandidate> shown;
        for (const auto& id : sim.ids) shown.push_back({id, source_text(known.at(id).first.body), fitness_of.at(id)});
        const auto refined = llm_refine_partition(over, shown, llm_, g);
        tokens_ += refined.prompt_tokens + refined.completion_tokens;
        report.partition = refined.partition;
        const auto entropies = partition_entropies(report.partition, sim);
        groups = build_reflection_groups(report.partition, entropies, fitness_of,
                                         {config_.num_elements, config_.groups_per_crossover}, derive_seed(config_.seed, g, 1));
        partition_event = {{"generation", g},
                           {"provenance", to_string(report.partition.provenance)},
                           {"clusters", ids_json(report.partition.clusters)},
                           {"over_partition", ids_json(over.clusters)},
                           {"entropies", entropies},
                           {"excluded", sim.excluded},
                           {"violation", refined.violation},
                           {"degraded", false}};
    } catch (const std::invalid_argument& e) {
        report.grouping_degraded = true;
        partition_event = {{"reason", e.what()}};
    } catch (const DegenerateSimilarity& e) {
        report.grouping_degraded = true;
        partition_event = {{"reason", e.what()}};
    }
    if (report.grouping_degraded) {
        std::vector<CandidateId> all;
        for (const auto& m : population.members)
            if (m.second.all_ok()) all.push_back(m.first.id);
        if (all.empty())
            for (const auto& m : population.members) all.push_back(m.first.id);
        report.partition = {{all}, PartitionProvenance::fallback};
        groups = {ReflectionGroup{all, GroupKind::homogeneous, {0}}};
        partition_event["generation"] = g;
        partition_event["provenance"] = to_string(PartitionProvenance::fallback);
        partition_event["clusters"] = ids_json(report.partition.clusters);
        partition_event["degraded"] = true;
    }
    if (log_) log_->emit(EventKind::partition, partition_event);

    // Reflection sessions.
    const ReflectionOptions options{config_.max_turns, config_.reminder_probability, 2};
    std::vector<Evaluated> produced;
    std::set<CandidateId> seen;
    for (const auto& m : population.members) seen.insert(m.first.id);
    auto evaluate_in_session = [&](const HeuristicCandidate& c) {
        auto rec = evaluate(c);
        track_best(c, rec);
        return rec;
    };

    for (std::size_t j = 0; j < groups.size(); ++j) {
        const int gi = static_cast<int>(j);
        auto state = init_feedback(groups[j], known, population_best, config_.problem, g,
                                   derive_seed(config_.seed, g, 100 + gi), gi);
        if (log_)
            log_->emit(EventKind::group, {{"generation", g},
                                          {"group", gi},
                                          {"kind", to_string(groups[j].kind)},
                                          {"members", groups[j].members},
                                          {"source_clusters", groups[j].source_clusters},
                                          {"transcript", transcript_json(state.transcript, 0)}});
        auto result = run_session(std::move(state), llm_, evaluate_in_session, options);
        GroupReport gr;
        gr.group = groups[j];
        gr.prompt_tokens = result.state.prompt_tokens;
        gr.completion_tokens = result.state.completion_tokens;
        tokens_ += gr.prompt_tokens + gr.completion_tokens;
        for (const auto& t : result.turns) {
            TurnSummary ts{t.turn, t.decision, t.parse_status, t.reminder_injected, std::nullopt, std::nullopt};
            if (t.candidate) ts.candidate_id = t.candidate->id;
            if (t.record) ts.fitness = t.record->fitness;
            gr.turns.push_back(ts);
            if (!log_) continue;
            if (t.reminder_injected) {
                std::string text;
                for (const auto& e : result.state.transcript)
                    if (e.turn == t.turn && e.kind == EntryKind::reminder) text = e.content;
                log_->emit(EventKind::reminder, {{"generation", g}, {"group", gi}, {"turn", t.turn}, {"text", text}});
            }
            log_->emit(EventKind::turn, {{"generation", g},
                                         {"group", gi},
                                         {"turn", t.turn},
                                         {"decision", to_string(t.decision)},
                                         {"parse_status", to_string(t.parse_status)},
                                         {"parse_errors", t.parse_errors},
                                         {"reminder", t.reminder_injected},
                                         {"candidate_id", ts.candidate_id ? json(*ts.candidate_id) : json(nullptr)},
                                         {"fitness", ts.fitness ? json(*ts.fitness) : json(nullptr)},
                                         {"transcript", transcript_json(result.state.transcript, t.turn)}});
        }
        for (auto& c : result.candidates) {
            gr.produced.push_back(c.first.id);
            if (seen.insert(c.first.id).second) {
                report.new_candidates.push_back(c.first.id);
                produced.push_back(std::move(c));
            }
        }
        report.groups.push_back(std::move(gr));
    }

    // Elitist selection over the previous population and the new candidates.
    std::vector<Evaluated> pool = population.members;
    pool.insert(pool.end(), produced.begin(), produced.end());
    std::stable_sort(pool.begin(), pool.end(), better);
    const auto keep = std::min(pool.size(), static_cast<std::size_t>(config_.top_k));
    Population next;
    next.generation = g;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (i < keep) {
            report.selected.push_back(pool[i].first.id);
            next.members.push_back(pool[i]);
            report.population.emplace_back(pool[i].first.id, pool[i].second.fitness);
        } else {
            report.dropped.push_back(pool[i].first.id);
        }
    }
    report.best_so_far = best_->second.fitness;
    report.best_id = best_->first.id;
    report.tokens_used = tokens_ - tokens_before;

    if (log_) {
        log_->emit(EventKind::selection, {{"generation", g},
                                          {"pool_size", pool.size()},
                                          {"selected", report.selected},
                                          {"dropped", report.dropped}});
        json members = json::array();
        for (const auto& [id, f] : report.population) members.push_back({{"id", id}, {"fitness", f}});
        log_->emit(EventKind::generation_summary, {{"generation", g},
                                                   {"best_fitness", report.best_so_far},
                                                   {"best_id", report.best_id},
                                                   {"population_best", next.best_fitness().value_or(kPenaltyFitness)},
                                                   {"population", members},
                                                   {"new_candidates", report.new_candidates},
                                                   {"groups", report.groups.size()},
                                                   {"degraded", report.grouping_degraded},
                                                   {"tokens", report.tokens_used},
                                                   {"cumulative_tokens", tokens_}});
    }
    return {std::move(next), std::move(report)};
}

RunResult Engine::run(const std::optional<Checkpoint>& resume) {
    if (log_) {
        log_->emit(EventKind::run_start, {{"config", config_to_json(config_)}, {"resumed", resume.has_value()}});
        json names = json::array();
        for (const auto& inst : instances_) {
            if (const auto* b = std::get_if<BppInstance>(&inst))
                names.push_back({{"name", b->name}, {"items", b->items.size()}, {"capacity", b->capacity},
                                 {"lower_bound", bpp_lower_bound(*b)}});
            else {
                const auto& t = std::get<TspInstance>(inst);
                names.push_back({{"name", t.name}, {"nodes", t.size()},
                                 {"reference_cost", t.reference_cost ? json(*t.reference_cost) : json(nullptr)}});
            }
        }
        log_->emit(EventKind::instance_set,
                   {{"problem", to_string(config_.problem)}, {"count", instances_.size()}, {"instances", names}});
    }

    std::vector<GenerationReport> reports;
    Population pop;
    if (resume) {
        if (resume->seed != config_.seed) throw std::invalid_argument("checkpoint seed does not match config seed");
        pop = resume->population;
        tokens_ = resume->tokens;
        auto restore = [&](const HeuristicCandidate& c, const FitnessRecord& r) {
            if (!cache_.emplace(c.id, r).second || !log_) return;
            json payload = candidate_to_json(c);
            payload["record"] = record_to_json(r);
            payload["restored"] = true;
            log_->emit(EventKind::candidate_evaluated, std::move(payload));
        };
        for (const auto& [c, r] : pop.members) restore(c, r);
        restore(resume->best, resume->best_record);
        track_best(resume->best, resume->best_record);
    } else {
        pop = initialize_population();
    }
    const long init_tokens = tokens_;

    while (pop.generation < config_.epochs) {
        auto [next, report] = step_generation(pop);
        pop = std::move(next);
        reports.push_back(std::move(report));
        if (!config_.checkpoint_path.empty())
            save_checkpoint({pop.generation, config_.seed, pop, best_->first, best_->second, tokens_},
                            config_.checkpoint_path);
    }

    RunResult result{best_->first, best_->second, std::move(reports), std::move(pop), init_tokens};
    if (log_)
        log_->emit(EventKind::run_end, {{"best_id", result.best.id},
                                        {"best_fitness", result.best_record.fitness},
                                        {"best", candidate_to_json(result.best)},
                                        {"generations", result.reports.size()},
                                        {"evaluations", cache_.size()},
                                        {"tokens", tokens_}});
    return result;
}

}  // namespace revel
