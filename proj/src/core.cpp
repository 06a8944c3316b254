#include "revel/core.hpp"

#include <sodium.h>

#include <algorithm>
#include <array>

#include <fmt/format.h>

namespace revel {

std::string_view to_string(Problem p) {
    switch (p) {
        case Problem::tsp: return "tsp";
        case Problem::bpp: return "bpp";
    }
    return "?";
}

Problem problem_from_string(std::string_view s) {
    if (s == "tsp") return Problem::tsp;
    if (s == "bpp") return Problem::bpp;
    throw std::invalid_argument(fmt::format("unknown problem '{}' (expected tsp or bpp)", s));
}

std::string_view to_string(Origin o) {
    switch (o) {
        case Origin::init: return "init";
        case Origin::explore: return "explore";
        case Origin::exploit: return "exploit";
        case Origin::refinement: return "refinement";
    }
    return "?";
}

Origin origin_from_string(std::string_view s) {
    if (s == "init") return Origin::init;
    if (s == "explore") return Origin::explore;
    if (s == "exploit") return Origin::exploit;
    if (s == "refinement") return Origin::refinement;
    throw std::invalid_argument(fmt::format("unknown origin '{}'", s));
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::ok: return "ok";
        case Verdict::timeout: return "timeout";
        case Verdict::crash: return "crash";
        case Verdict::malformed_output: return "malformed_output";
        case Verdict::infeasible: return "infeasible";
    }
    return "?";
}

Verdict verdict_from_string(std::string_view s) {
    if (s == "ok") return Verdict::ok;
    if (s == "timeout") return Verdict::timeout;
    if (s == "crash") return Verdict::crash;
    if (s == "malformed_output") return Verdict::malformed_output;
    if (s == "infeasible") return Verdict::infeasible;
    throw std::invalid_argument(fmt::format("unknown verdict '{}'", s));
}

CandidateBody CandidateBody::builtin(std::string name, std::map<std::string, double> params) {
    if (name.empty()) throw std::invalid_argument("builtin name must be non-empty");
    return CandidateBody(BuiltinBody{std::move(name), std::move(params)});
}

CandidateBody CandidateBody::guest(std::string source) {
    if (source.empty()) throw std::invalid_argument("guest source must be non-empty");
    return CandidateBody(GuestBody{std::move(source)});
}

std::string normalize_source(std::string_view source) {
    std::string out;
    out.reserve(source.size());
    std::string line;
    auto flush = [&](bool newline) {
        auto end = line.find_last_not_of(" \t\f\v");
        out.append(line, 0, end == std::string::npos ? 0 : end + 1);
        if (newline) out.push_back('\n');
        line.clear();
    };
    for (std::size_t i = 0; i < source.size(); ++i) {
        char c = source[i];
        if (c == '\r') {
            if (i + 1 < source.size() && source[i + 1] == '\n') ++i;
            flush(true);
        } else if (c == '\n') {
            flush(true);
        } else {
            line.push_back(c);
        }
    }
    flush(false);
    return out;
}

namespace {

std::string canonical_bytes(const CandidateBody& body) {
    std::string s;
    if (body.is_builtin()) {
        const auto& b = body.as_builtin();
        s = "builtin";
        s.push_back('\0');
        s += b.name;
        for (const auto& [k, v] : b.params) {
            s.push_back('\0');
            s += fmt::format("{}={}", k, v);
        }
    } else {
        s = "guest";
        s.push_back('\0');
        s += normalize_source(body.as_guest().source);
    }
    return s;
}

}  // namespace

CandidateId candidate_key(const CandidateBody& body) {
    static const int init = sodium_init();
    (void)init;
    const std::string bytes = canonical_bytes(body);
    std::array<unsigned char, 16> digest{};
    crypto_generichash(digest.data(), digest.size(),
                       reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), nullptr, 0);
    std::string hex;
    hex.reserve(32);
    for (unsigned char b : digest) hex += fmt::format("{:02x}", b);
    return hex;
}

HeuristicCandidate make_candidate(CandidateBody body, Origin origin, std::vector<CandidateId> parent_ids,
                                  int generation_created, std::string algorithm_note) {
    if ((origin == Origin::init) != parent_ids.empty())
        throw std::invalid_argument("parent_ids must be empty iff origin is init");
    if (generation_created < 0) throw std::invalid_argument("generation_created must be >= 0");
    HeuristicCandidate c{candidate_key(body), std::move(body), origin, std::move(parent_ids),
                         generation_created, std::move(algorithm_note)};
    return c;
}

bool FitnessRecord::all_ok() const {
    return !verdicts.empty() &&
           std::all_of(verdicts.begin(), verdicts.end(), [](Verdict v) { return v == Verdict::ok; });
}

bool Population::contains(const CandidateId& id) const { return find(id) != nullptr; }

const std::pair<HeuristicCandidate, FitnessRecord>* Population::find(const CandidateId& id) const {
    for (const auto& m : members)
        if (m.first.id == id) return &m;
    return nullptr;
}

std::optional<double> Population::best_fitness() const {
    std::optional<double> best;
    for (const auto& m : members)
        if (!best || m.second.fitness < *best) best = m.second.fitness;
    return best;
}

}  // namespace revel
