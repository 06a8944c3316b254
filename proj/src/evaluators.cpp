#include "revel/evaluators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace revel {

using json = nlohmann::json;

double TspInstance::distance(std::size_t i, std::size_t j) const {
    const double dx = coords[i].x - coords[j].x;
    const double dy = coords[i].y - coords[j].y;
    const double d = std::sqrt(dx * dx + dy * dy);
    return rule == DistanceRule::tsplib_nint ? std::floor(d + 0.5) : d;
}

SquareMatrix TspInstance::distance_matrix() const {
    SquareMatrix m(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i)
        for (std::size_t j = 0; j < coords.size(); ++j) m(i, j) = distance(i, j);
    return m;
}

Problem problem_of(const Instance& instance) {
    return std::holds_alternative<TspInstance>(instance) ? Problem::tsp : Problem::bpp;
}

void validate_instance(const TspInstance& instance) {
    if (instance.coords.size() < 3) throw std::invalid_argument("TSP instance needs at least 3 nodes");
    for (const auto& p : instance.coords)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("TSP coordinate is not finite");
    if (instance.reference_cost && !(*instance.reference_cost > 0))
        throw std::invalid_argument("TSP reference_cost must be positive");
}

void validate_instance(const BppInstance& instance) {
    if (instance.capacity < 1) throw std::invalid_argument("BPP capacity must be positive");
    if (instance.items.empty()) throw std::invalid_argument("BPP instance has no items");
    for (int s : instance.items)
        if (s < 1 || s > instance.capacity)
            throw std::invalid_argument(fmt::format("BPP item size {} outside [1, {}]", s, instance.capacity));
}

// --- TSP -------------------------------------------------------------------

double tour_length(std::span<const int> perm, const TspInstance& instance) {
    const auto n = instance.size();
    if (perm.size() != n) throw std::invalid_argument(fmt::format("tour has {} nodes, instance has {}", perm.size(), n));
    std::vector<char> seen(n, 0);
    for (int v : perm) {
        if (v < 0 || static_cast<std::size_t>(v) >= n || seen[v])
            throw std::invalid_argument("tour is not a permutation of the instance nodes");
        seen[v] = 1;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) total += instance.distance(perm[k], perm[(k + 1) % n]);
    return total;
}

std::pair<std::vector<int>, double> brute_force_tsp(const TspInstance& instance) {
    const auto n = instance.size();
    if (n > 10) throw std::invalid_argument(fmt::format("brute_force_tsp refuses n = {} > 10", n));
    validate_instance(instance);
    const auto d = instance.distance_matrix();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t k = 0; k < n; ++k) c += d(perm[k], perm[(k + 1) % n]);
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin() + 1, perm.end()));
    return {best, best_cost};
}

std::vector<int> nearest_neighbour(const TspInstance& instance, int start) {
    const auto n = instance.size();
    if (start < 0 || static_cast<std::size_t>(start) >= n) throw std::invalid_argument("start node out of range");
    std::vector<char> visited(n, 0);
    std::vector<int> tour{start};
    visited[start] = 1;
    int current = start;
    for (std::size_t step = 1; step < n; ++step) {
        int best = -1;
        double best_d = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (visited[j]) continue;
            const double dj = instance.distance(current, j);
            if (best < 0 || dj < best_d) {
                best = static_cast<int>(j);
                best_d = dj;
            }
        }
        visited[best] = 1;
        tour.push_back(best);
        current = best;
    }
    return tour;
}

std::vector<int> two_opt(std::vector<int> perm, const TspInstance& instance) {
    (void)tour_length(perm, instance);
    const auto n = perm.size();
    if (n < 4) return perm;
    const auto d = instance.distance_matrix();
    constexpr double kEps = 1e-10;
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t i = 0; i + 2 < n; ++i) {
            for (std::size_t j = i + 2; j < n; ++j) {
                if (i == 0 && j == n - 1) continue;
                const int a = perm[i], b = perm[i + 1], c = perm[j], e = perm[(j + 1) % n];
                const double delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
                if (delta < -kEps) {
                    std::reverse(perm.begin() + static_cast<long>(i) + 1, perm.begin() + static_cast<long>(j) + 1);
                    improved = true;
                }
            }
        }
    }
    return perm;
}

std::vector<TspInstance> generate_tsp_instances(int n, int count, std::uint64_t seed) {
    if (n < 3) throw std::invalid_argument("TSP instances need n >= 3");
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<TspInstance> out;
    out.reserve(count);
    for (int k = 0; k < count; ++k) {
        TspInstance inst;
        inst.name = fmt::format("tsp{}-s{}-{}", n, seed, k);
        inst.coords.reserve(n);
        for (int i = 0; i < n; ++i) {
            const double x = unit(rng);
            const double y = unit(rng);
            inst.coords.push_back({x, y});
        }
        inst.reference_cost = tour_length(two_opt(nearest_neighbour(inst, 0), inst), inst);
        out.push_back(std::move(inst));
    }
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::optional<double> to_double(std::string_view s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

TspInstance parse_tsplib(std::string_view text) {
    TspInstance inst;
    inst.rule = DistanceRule::tsplib_nint;
    std::optional<std::size_t> dimension;
    std::optional<std::string> weight_type;
    bool in_coords = false;

    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line == "EOF") break;

        if (in_coords) {
            auto fields = split_ws(line);
            if (!fields.empty() && std::isalpha(static_cast<unsigned char>(fields[0][0]))) {
                in_coords = false;  // next section keyword
            } else {
                if (fields.size() != 3)
                    throw ParseError(fmt::format("line {}: malformed coordinate line '{}'", line_no, line), line_no);
                auto x = to_double(fields[1]);
                auto y = to_double(fields[2]);
                if (!to_double(fields[0]) || !x || !y)
                    throw ParseError(fmt::format("line {}: malformed coordinate line '{}'", line_no, line), line_no);
                inst.coords.push_back({*x, *y});
                continue;
            }
        }

        if (line.starts_with("NODE_COORD_SECTION")) {
            if (!weight_type) throw ParseError(fmt::format("line {}: NODE_COORD_SECTION before EDGE_WEIGHT_TYPE", line_no), line_no);
            in_coords = true;
            continue;
        }
        auto colon = line.find(':');
        std::string_view key = trim(colon == std::string_view::npos ? line : line.substr(0, colon));
        std::string_view value = colon == std::string_view::npos ? std::string_view{} : trim(line.substr(colon + 1));

        if (key == "NAME") {
            inst.name = std::string(value);
        } else if (key == "TYPE") {
            if (value != "TSP") throw ParseError(fmt::format("line {}: unsupported problem TYPE '{}'", line_no, value), line_no);
        } else if (key == "DIMENSION") {
            auto d = to_double(value);
            if (!d || *d < 3 || *d != std::floor(*d))
                throw ParseError(fmt::format("line {}: invalid DIMENSION '{}'", line_no, value), line_no);
            dimension = static_cast<std::size_t>(*d);
        } else if (key == "EDGE_WEIGHT_TYPE") {
            if (value != "EUC_2D")
                throw ParseError(fmt::format("line {}: unsupported EDGE_WEIGHT_TYPE '{}' (only EUC_2D)", line_no, value),
                                 line_no);
            weight_type = std::string(value);
        } else if (key.ends_with("_SECTION")) {
            throw ParseError(fmt::format("line {}: unsupported section '{}'", line_no, key), line_no);
        }
        // Other header keys (COMMENT, DISPLAY_DATA_TYPE, ...) are ignored.
    }
    if (!weight_type) throw ParseError("missing EDGE_WEIGHT_TYPE");
    if (dimension && *dimension != inst.coords.size())
        throw ParseError(fmt::format("DIMENSION is {} but {} coordinates were read", *dimension, inst.coords.size()));
    if (inst.coords.size() < 3) throw ParseError("fewer than 3 coordinates");
    return inst;
}

EvalOutcome evaluate_tsp(ExecutorSession& session, const TspInstance& instance, int start_node,
                         std::optional<std::chrono::duration<double>> budget) {
    validate_instance(instance);
    const int n = static_cast<int>(instance.size());
    if (start_node < 0 || start_node >= n) throw std::invalid_argument("start node out of range");
    std::optional<Clock::time_point> deadline;
    if (budget) deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(*budget);

    const SquareMatrix matrix = instance.distance_matrix();
    NextNodeCall call{start_node, start_node, {}, &matrix};
    for (int i = 0; i < n; ++i)
        if (i != start_node) call.unvisited.push_back(i);

    EvalOutcome out;
    out.trace.push_back(start_node);
    while (!call.unvisited.empty()) {
        auto r = session.call(call, deadline);
        if (!r.ok()) return {r.verdict, std::nullopt, std::move(out.trace), r.message};
        auto it = std::lower_bound(call.unvisited.begin(), call.unvisited.end(), r.value);
        if (it == call.unvisited.end() || *it != r.value)
            return {Verdict::malformed_output, std::nullopt, std::move(out.trace),
                    fmt::format("returned node {} is not unvisited", r.value)};
        call.unvisited.erase(it);
        out.trace.push_back(r.value);
        call.current = r.value;
    }
    out.cost = tour_length(out.trace, instance);
    return out;
}

// --- Online BPP -------------------------------------------------------------

std::vector<BppInstance> generate_bpp_instances(int items, int capacity, int count, std::uint64_t seed,
                                                double max_fraction) {
    if (items < 1) throw std::invalid_argument("items must be >= 1");
    if (capacity < 2) throw std::invalid_argument("capacity must be >= 2");
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    const int max_size = static_cast<int>(std::floor(max_fraction * capacity));
    if (max_size < 1 || max_size > capacity) throw std::invalid_argument("max_fraction yields no valid item size");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> size(1, max_size);
    std::vector<BppInstance> out;
    out.reserve(count);
    for (int k = 0; k < count; ++k) {
        BppInstance inst{capacity, {}, fmt::format("bpp{}-c{}-s{}-{}", items, capacity, seed, k)};
        inst.items.reserve(items);
        for (int i = 0; i < items; ++i) inst.items.push_back(size(rng));
        out.push_back(std::move(inst));
    }
    return out;
}

long long bpp_lower_bound(const BppInstance& instance) {
    if (instance.capacity < 1) throw std::invalid_argument("BPP capacity must be positive");
    long long sum = 0;
    for (int s : instance.items) sum += s;
    return (sum + instance.capacity - 1) / instance.capacity;
}

EvalOutcome evaluate_bpp_online(ExecutorSession& session, const BppInstance& instance,
                                std::optional<std::chrono::duration<double>> budget) {
    validate_instance(instance);
    std::optional<Clock::time_point> deadline;
    if (budget) deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(*budget);

    std::vector<int> residual;  // per open bin
    std::vector<int> feasible;  // indices into residual
    ScoreCall call;
    EvalOutcome out;
    out.trace.reserve(instance.items.size());
    for (int item : instance.items) {
        feasible.clear();
        call.bins.clear();
        for (std::size_t b = 0; b < residual.size(); ++b) {
            if (residual[b] >= item) {
                feasible.push_back(static_cast<int>(b));
                call.bins.push_back(residual[b]);
            }
        }
        int chosen;
        if (feasible.empty()) {
            residual.push_back(instance.capacity);
            chosen = static_cast<int>(residual.size()) - 1;
        } else {
            call.item = item;
            auto r = session.call(call, deadline);
            if (!r.ok()) return {r.verdict, std::nullopt, std::move(out.trace), r.message};
            std::size_t best = 0;
            for (std::size_t k = 1; k < r.value.size(); ++k)
                if (r.value[k] > r.value[best]) best = k;
            chosen = feasible[best];
        }
        residual[chosen] -= item;
        out.trace.push_back(chosen);
    }
    out.cost = static_cast<double>(residual.size());
    return out;
}

// --- Metrics ----------------------------------------------------------------

double excess_fraction(long long bins, long long lower_bound) {
    if (lower_bound < 1) throw std::invalid_argument("lower bound must be >= 1");
    return static_cast<double>(bins - lower_bound) / static_cast<double>(lower_bound) * 100.0;
}

double optimality_gap(double length, double reference) {
    if (!(reference > 0)) throw std::invalid_argument("reference length must be > 0");
    return (length - reference) / reference * 100.0;
}

// --- Fitness ----------------------------------------------------------------

SessionFactory make_session_factory(ExecutorOptions options) {
    return [options = std::move(options)](const CandidateBody& body, Problem problem) {
        return load(body, problem, options);
    };
}

FitnessRecord fitness(const HeuristicCandidate& candidate, const SessionFactory& sessions,
                      std::span<const Instance> instances,
                      std::optional<std::chrono::duration<double>> per_instance_budget) {
    if (instances.empty()) throw std::invalid_argument("fitness needs at least one instance");
    const Problem problem = problem_of(instances.front());
    for (const auto& inst : instances)
        if (problem_of(inst) != problem) throw std::invalid_argument("instances mix problem types");

    FitnessRecord rec;
    rec.candidate_id = candidate.id;
    const auto m = instances.size();
    auto fail_all = [&](Verdict v) {
        rec.verdicts.assign(m, v);
        rec.per_instance_costs.assign(m, kPenaltyFitness);
        rec.objective_values.assign(m, kPenaltyFitness);
        rec.fitness = kPenaltyFitness;
        return rec;
    };

    std::optional<ExecutorSession> session;
    try {
        session.emplace(sessions(candidate.body, problem));
    } catch (const std::invalid_argument&) {
        // Builtin for the other problem or unknown name: not runnable here.
        return fail_all(Verdict::malformed_output);
    }
    if (session->state() == SessionStatus::failed) return fail_all(session->failure_verdict());

    bool all_ok = true;
    for (const auto& inst : instances) {
        EvalOutcome outcome;
        double metric = kPenaltyFitness;
        if (const auto* tsp = std::get_if<TspInstance>(&inst)) {
            if (!tsp->reference_cost) throw std::invalid_argument("TSP instance lacks a reference cost");
            outcome = evaluate_tsp(*session, *tsp, 0, per_instance_budget);
            if (outcome.verdict == Verdict::ok) metric = *outcome.cost / *tsp->reference_cost - 1.0;
        } else {
            const auto& bpp = std::get<BppInstance>(inst);
            outcome = evaluate_bpp_online(*session, bpp, per_instance_budget);
            if (outcome.verdict == Verdict::ok)
                metric = excess_fraction(static_cast<long long>(*outcome.cost), bpp_lower_bound(bpp)) / 100.0;
        }
        rec.verdicts.push_back(outcome.verdict);
        rec.per_instance_costs.push_back(metric);
        rec.objective_values.push_back(outcome.cost.value_or(kPenaltyFitness));
        all_ok = all_ok && outcome.verdict == Verdict::ok;
    }
    session->close();

    if (all_ok) {
        rec.fitness = std::accumulate(rec.per_instance_costs.begin(), rec.per_instance_costs.end(), 0.0) /
                      static_cast<double>(m);
    } else {
        rec.fitness = kPenaltyFitness;
    }
    return rec;
}

// --- Instance files -----------------------------------------------------------

namespace {

Instance instance_from_json(const json& j) {
    if (!j.is_object() || !j.contains("problem") || !j["problem"].is_string())
        throw ParseError("instance object needs a string 'problem' field");
    const Problem p = problem_from_string(j["problem"].get<std::string>());
    if (p == Problem::bpp) {
        BppInstance b;
        if (!j.contains("capacity") || !j["capacity"].is_number_integer()) throw ParseError("bpp instance needs integer 'capacity'");
        if (!j.contains("items") || !j["items"].is_array()) throw ParseError("bpp instance needs an 'items' array");
        b.capacity = j["capacity"].get<int>();
        for (const auto& s : j["items"]) {
            if (!s.is_number_integer()) throw ParseError("bpp item sizes must be integers");
            b.items.push_back(s.get<int>());
        }
        if (j.contains("name")) b.name = j["name"].get<std::string>();
        try {
            validate_instance(b);
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what());
        }
        return b;
    }
    TspInstance t;
    if (!j.contains("coords") || !j["coords"].is_array()) throw ParseError("tsp instance needs a 'coords' array");
    for (const auto& c : j["coords"]) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number())
            throw ParseError("tsp coords must be [x, y] pairs");
        t.coords.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    if (j.contains("reference_cost") && !j["reference_cost"].is_null()) t.reference_cost = j["reference_cost"].get<double>();
    if (j.contains("distance")) {
        const auto rule = j["distance"].get<std::string>();
        if (rule == "tsplib_nint") t.rule = DistanceRule::tsplib_nint;
        else if (rule != "euclidean") throw ParseError(fmt::format("unknown distance rule '{}'", rule));
    }
    if (j.contains("name")) t.name = j["name"].get<std::string>();
    try {
        validate_instance(t);
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
    return t;
}

}  // namespace

std::vector<Instance> parse_instances_json(std::string_view text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ParseError("instance file is not valid JSON");
    std::vector<Instance> out;
    if (doc.is_array()) {
        for (const auto& j : doc) out.push_back(instance_from_json(j));
    } else {
        out.push_back(instance_from_json(doc));
    }
    if (out.empty()) throw ParseError("instance file contains no instances");
    return out;
}

std::string instances_to_json(std::span<const Instance> instances) {
    json arr = json::array();
    for (const auto& inst : instances) {
        json j;
        if (const auto* t = std::get_if<TspInstance>(&inst)) {
            j["problem"] = "tsp";
            json coords = json::array();
            for (const auto& p : t->coords) coords.push_back({p.x, p.y});
            j["coords"] = std::move(coords);
            if (t->reference_cost) j["reference_cost"] = *t->reference_cost;
            j["distance"] = t->rule == DistanceRule::tsplib_nint ? "tsplib_nint" : "euclidean";
            if (!t->name.empty()) j["name"] = t->name;
        } else {
            const auto& b = std::get<BppInstance>(inst);
            j["problem"] = "bpp";
            j["capacity"] = b.capacity;
            j["items"] = b.items;
            if (!b.name.empty()) j["name"] = b.name;
        }
        arr.push_back(std::move(j));
    }
    return arr.dump(2);
}

}  // namespace revel
