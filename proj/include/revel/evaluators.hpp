#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "revel/core.hpp"
#include "revel/executor.hpp"
#include "revel/matrix.hpp"

namespace revel {

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point&) const = default;
};

enum class DistanceRule {
    euclidean,  // exact Euclidean distance
    tsplib_nint  // nearest-integer Euclidean (TSPLIB EUC_2D)
};

struct TspInstance {
    std::vector<Point> coords;
    std::optional<double> reference_cost;
    DistanceRule rule = DistanceRule::euclidean;
    std::string name;

    std::size_t size() const { return coords.size(); }
    double distance(std::size_t i, std::size_t j) const;
    SquareMatrix distance_matrix() const;
};

struct BppInstance {
    int capacity = 0;
    std::vector<int> items;
    std::string name;
};

using Instance = std::variant<TspInstance, BppInstance>;

Problem problem_of(const Instance& instance);

/// Throws std::invalid_argument if the instance breaks its invariants.
void validate_instance(const TspInstance& instance);
void validate_instance(const BppInstance& instance);

/// Result of simulating one candidate on one instance.
/// cost is the raw objective (tour length, or number of bins) and is present iff verdict is ok.
struct EvalOutcome {
    Verdict verdict = Verdict::ok;
    std::optional<double> cost;
    // TSP: the tour. BPP: the bin index chosen for each item.
    std::vector<int> trace;
    std::string message;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0) : std::runtime_error(what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// --- TSP -------------------------------------------------------------------

/// n nodes uniform on the unit square; reference_cost from two_opt(nearest_neighbour).
std::vector<TspInstance> generate_tsp_instances(int n, int count, std::uint64_t seed);

/// Reads a TSPLIB file with a NODE_COORD_SECTION and EDGE_WEIGHT_TYPE EUC_2D.
TspInstance parse_tsplib(std::string_view text);

/// Closed-tour length. Throws std::invalid_argument unless perm is a permutation of 0..n-1.
double tour_length(std::span<const int> perm, const TspInstance& instance);

/// Exact optimum by enumeration with node 0 fixed first. Refuses n > 10.
std::pair<std::vector<int>, double> brute_force_tsp(const TspInstance& instance);

std::vector<int> nearest_neighbour(const TspInstance& instance, int start = 0);

/// First-improvement 2-opt until no improving reversal exists.
std::vector<int> two_opt(std::vector<int> perm, const TspInstance& instance);

/// Constructs a tour by calling the candidate's next-node rule from start_node.
/// budget caps the whole instance; each call is additionally bounded by the session timeout.
EvalOutcome evaluate_tsp(ExecutorSession& session, const TspInstance& instance, int start_node = 0,
                         std::optional<std::chrono::duration<double>> budget = {});

// --- Online BPP -------------------------------------------------------------

/// count instances of T items with sizes uniform on [1, floor(max_fraction * C)].
std::vector<BppInstance> generate_bpp_instances(int items, int capacity, int count, std::uint64_t seed,
                                                double max_fraction = 0.6);

/// Volume lower bound ceil(sum / C).
long long bpp_lower_bound(const BppInstance& instance);

/// Simulates online packing: items in order; if no open bin fits, a new bin is
/// opened without consulting the candidate; otherwise the argmax-scored feasible
/// bin (lowest index on ties) receives the item.
EvalOutcome evaluate_bpp_online(ExecutorSession& session, const BppInstance& instance,
                                std::optional<std::chrono::duration<double>> budget = {});

// --- Metrics ----------------------------------------------------------------

/// (B - LB) / LB * 100. Throws std::invalid_argument if LB < 1.
double excess_fraction(long long bins, long long lower_bound);

/// (L - L_ref) / L_ref * 100. Throws std::invalid_argument if L_ref <= 0.
double optimality_gap(double length, double reference);

// --- Fitness ----------------------------------------------------------------

/// Opens an executor session for a candidate body.
using SessionFactory = std::function<ExecutorSession(const CandidateBody&, Problem)>;

SessionFactory make_session_factory(ExecutorOptions options);

/// Mean decimal metric over all instances; any failed instance forces kPenaltyFitness.
/// Throws std::invalid_argument for an empty or mixed-problem instance list.
FitnessRecord fitness(const HeuristicCandidate& candidate, const SessionFactory& sessions,
                      std::span<const Instance> instances,
                      std::optional<std::chrono::duration<double>> per_instance_budget = {});

// --- Instance files -----------------------------------------------------------

/// JSON: one object or an array of objects {problem, capacity?, items? | coords?, reference_cost?}.
std::vector<Instance> parse_instances_json(std::string_view text);
std::string instances_to_json(std::span<const Instance> instances);

}  // namespace revel
