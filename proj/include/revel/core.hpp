#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace revel {

enum class Problem { tsp, bpp };

std::string_view to_string(Problem p);
Problem problem_from_string(std::string_view s);

/// Fitness assigned to any candidate with at least one failed instance.
inline constexpr double kPenaltyFitness = 1.0e9;

enum class Origin { init, explore, exploit, refinement };

std::string_view to_string(Origin o);
Origin origin_from_string(std::string_view s);

enum class Verdict { ok, timeout, crash, malformed_output, infeasible };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

using CandidateId = std::string;

struct BuiltinBody {
    std::string name;
    std::map<std::string, double> params;

    bool operator==(const BuiltinBody&) const = default;
};

struct GuestBody {
    std::string source;

    bool operator==(const GuestBody&) const = default;
};

/// Either a registered native heuristic or guest source text.
class CandidateBody {
public:
    static CandidateBody builtin(std::string name, std::map<std::string, double> params = {});
    static CandidateBody guest(std::string source);

    bool is_builtin() const { return std::holds_alternative<BuiltinBody>(value_); }
    bool is_guest() const { return std::holds_alternative<GuestBody>(value_); }
    const BuiltinBody& as_builtin() const { return std::get<BuiltinBody>(value_); }
    const GuestBody& as_guest() const { return std::get<GuestBody>(value_); }

    bool operator==(const CandidateBody&) const = default;

private:
    explicit CandidateBody(std::variant<BuiltinBody, GuestBody> v) : value_(std::move(v)) {}
    std::variant<BuiltinBody, GuestBody> value_;
};

/// Strips trailing whitespace per line and normalizes CRLF / CR to LF.
std::string normalize_source(std::string_view source);

/// Stable 128-bit content hash of the normalized body, as 32 hex chars.
CandidateId candidate_key(const CandidateBody& body);

struct HeuristicCandidate {
    CandidateId id;
    CandidateBody body;
    Origin origin = Origin::init;
    std::vector<CandidateId> parent_ids;
    int generation_created = 0;
    std::string algorithm_note;
};

/// Builds a candidate with id = candidate_key(body).
/// Throws std::invalid_argument if parents are empty for a non-init origin or
/// present for an init origin.
HeuristicCandidate make_candidate(CandidateBody body, Origin origin,
                                  std::vector<CandidateId> parent_ids = {},
                                  int generation_created = 0, std::string algorithm_note = {});

struct FitnessRecord {
    CandidateId candidate_id;
    // Decimal metric per instance: excess-bins fraction (BPP) or optimality gap (TSP).
    std::vector<double> per_instance_costs;
    // Raw objective per instance: bins used (BPP) or tour length (TSP).
    std::vector<double> objective_values;
    double fitness = kPenaltyFitness;
    std::vector<Verdict> verdicts;

    bool all_ok() const;
};

struct Population {
    std::vector<std::pair<HeuristicCandidate, FitnessRecord>> members;
    int generation = 0;

    bool contains(const CandidateId& id) const;
    const std::pair<HeuristicCandidate, FitnessRecord>* find(const CandidateId& id) const;
    std::optional<double> best_fitness() const;
};

}  // namespace revel
