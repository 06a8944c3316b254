#include "revel/similarity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_set>

#include <fmt/format.h>

#include "revel/executor.hpp"

namespace revel {

std::vector<std::vector<double>> profiles_from_costs(const std::vector<std::vector<double>>& costs) {
    if (costs.empty()) throw std::invalid_argument("no cost vectors");
    const auto m = costs.front().size();
    if (m == 0) throw std::invalid_argument("cost vectors are empty");
    for (const auto& row : costs)
        if (row.size() != m) throw std::invalid_argument("cost vectors differ in length");

    auto shifted = costs;
    for (std::size_t i = 0; i < m; ++i) {
        double best = shifted[0][i];
        for (const auto& row : shifted) best = std::min(best, row[i]);
        if (best <= 0.0) {
            const double shift = kProfileEpsilon - best;
            for (auto& row : shifted) row[i] += shift;
        }
    }
    std::vector<double> best(m);
    for (std::size_t i = 0; i < m; ++i) {
        best[i] = shifted[0][i];
        for (const auto& row : shifted) best[i] = std::min(best[i], row[i]);
    }
    std::vector<std::vector<double>> z(shifted.size(), std::vector<double>(m));
    for (std::size_t h = 0; h < shifted.size(); ++h)
        for (std::size_t i = 0; i < m; ++i) z[h][i] = (shifted[h][i] - best[i]) / best[i];
    return z;
}

std::vector<PerformanceProfile> performance_profiles(std::span<const FitnessRecord> records) {
    if (records.empty()) throw std::invalid_argument("performance_profiles needs at least one record");
    std::vector<std::vector<double>> costs;
    costs.reserve(records.size());
    for (const auto& r : records) {
        if (!r.all_ok()) throw std::invalid_argument(fmt::format("record {} has failed instances", r.candidate_id));
        costs.push_back(r.objective_values);
    }
    auto z = profiles_from_costs(costs);
    std::vector<PerformanceProfile> out;
    out.reserve(records.size());
    for (std::size_t h = 0; h < records.size(); ++h) out.push_back({records[h].candidate_id, std::move(z[h])});
    return out;
}

double sim_perf(std::span<const double> z_i, std::span<const double> z_j) {
    if (z_i.size() != z_j.size()) throw std::invalid_argument("profile lengths differ");
    double dot = 0, ni = 0, nj = 0;
    for (std::size_t k = 0; k < z_i.size(); ++k) {
        dot += z_i[k] * z_j[k];
        ni += z_i[k] * z_i[k];
        nj += z_j[k] * z_j[k];
    }
    if (ni == 0.0 && nj == 0.0) return 1.0;
    if (ni == 0.0 || nj == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(ni) * std::sqrt(nj)), 0.0, 1.0);
}

std::vector<std::string> tokenize_source(std::string_view s) {
    static const std::vector<std::string_view> kMultiOps = {"**=", "//=", ">>=", "<<=", "**", "//", "==", "!=", "<=",
                                                            ">=", "+=", "-=", "*=", "/=", "%=", "->", "<<", ">>", ":="};
    std::vector<std::string> out;
    std::size_t i = 0;
    auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '#') {
            while (i < s.size() && s[i] != '\n') ++i;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && is_ident(s[j])) ++j;
            out.emplace_back(s.substr(i, j - i));
            i = j;
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t j = i;
            while (j < s.size() && (is_ident(s[j]) || s[j] == '.' ||
                                    ((s[j] == '+' || s[j] == '-') && (s[j - 1] == 'e' || s[j - 1] == 'E'))))
                ++j;
            out.emplace_back(s.substr(i, j - i));
            i = j;
        } else if (c == '"' || c == '\'') {
            std::size_t j = i + 1;
            while (j < s.size() && s[j] != c && s[j] != '\n') {
                if (s[j] == '\\') ++j;
                ++j;
            }
            j = std::min(j + 1, s.size());
            out.emplace_back(s.substr(i, j - i));
            i = j;
        } else {
            bool matched = false;
            for (auto op : kMultiOps) {
                if (s.substr(i, op.size()) == op) {
                    out.emplace_back(op);
                    i += op.size();
                    matched = true;
                    break;
                }
            }
            if (!matched) out.emplace_back(1, s[i++]);
        }
    }
    return out;
}

bool is_code_keyword(std::string_view token) {
    static const std::unordered_set<std::string_view> kKeywords = {
        // control flow and structure
        "False", "None", "True", "and", "as", "assert", "break", "class", "continue", "def", "del", "elif", "else",
        "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal", "not", "or",
        "pass", "raise", "return", "try", "while", "with", "yield",
        // numeric building blocks of the heuristics
        "np", "min", "max", "range", "len", "sum", "abs", "sorted", "argmin", "argmax", "where", "exp", "log", "sqrt",
        // operators
        "+", "-", "*", "/", "//", "%", "**", "<", ">", "<=", ">=", "==", "!=", "=", "+=", "-=", "*=", "/=", "&", "|"};
    return kKeywords.contains(token);
}

namespace {

using NGramCounts = std::map<std::vector<std::string_view>, int>;

NGramCounts ngrams(std::span<const std::string> tokens, std::size_t n) {
    NGramCounts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::vector<std::string_view> g;
        g.reserve(n);
        for (std::size_t k = 0; k < n; ++k) g.emplace_back(tokens[i + k]);
        ++counts[g];
    }
    return counts;
}

double brevity_penalty(std::size_t ref_len, std::size_t hyp_len) {
    if (hyp_len == 0) return 0.0;
    if (hyp_len >= ref_len) return 1.0;
    return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
}

}  // namespace

double token_bleu(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
    if (reference.empty() && hypothesis.empty()) return 1.0;
    if (reference.empty() || hypothesis.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto hyp = ngrams(hypothesis, n);
        const auto ref = ngrams(reference, n);
        long matched = 0, total = 0;
        for (const auto& [g, c] : hyp) {
            total += c;
            if (auto it = ref.find(g); it != ref.end()) matched += std::min(c, it->second);
        }
        double p;
        if (n == 1) {
            if (matched == 0) return 0.0;
            p = static_cast<double>(matched) / static_cast<double>(total);
        } else {
            p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
        }
        log_sum += 0.25 * std::log(p);
    }
    return brevity_penalty(reference.size(), hypothesis.size()) * std::exp(log_sum);
}

double keyword_match(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
    if (reference.empty() && hypothesis.empty()) return 1.0;
    if (reference.empty() || hypothesis.empty()) return 0.0;
    std::map<std::string_view, int> ref, hyp;
    for (const auto& t : reference) ++ref[t];
    for (const auto& t : hypothesis) ++hyp[t];
    double matched = 0, total = 0;
    for (const auto& [t, c] : hyp) {
        const double w = is_code_keyword(t) ? 1.0 : 0.2;
        total += w * c;
        if (auto it = ref.find(t); it != ref.end()) matched += w * std::min(c, it->second);
    }
    return brevity_penalty(reference.size(), hypothesis.size()) * (matched / total);
}

double sim_code(std::string_view src_i, std::string_view src_j, const CodeSimilarityOptions& options) {
    const auto a = tokenize_source(src_i);
    const auto b = tokenize_source(src_j);
    double weighted = 0.0, weights = 0.0;
    if (options.ngram_weight > 0) {
        weighted += options.ngram_weight * 0.5 * (token_bleu(a, b) + token_bleu(b, a));
        weights += options.ngram_weight;
    }
    if (options.keyword_weight > 0) {
        weighted += options.keyword_weight * 0.5 * (keyword_match(a, b) + keyword_match(b, a));
        weights += options.keyword_weight;
    }
    if (options.syntax_weight > 0 && options.syntax) {
        const double s = 0.5 * (options.syntax(src_i, src_j) + options.syntax(src_j, src_i));
        weighted += options.syntax_weight * std::clamp(s, 0.0, 1.0);
        weights += options.syntax_weight;
    }
    if (weights <= 0) throw std::invalid_argument("code similarity needs a positive component weight");
    return weighted / weights;
}

double sim_combined(double perf, double code, double alpha, double beta) {
    if (alpha < 0 || beta < 0) throw std::invalid_argument("alpha and beta must be >= 0");
    return alpha * perf + beta * code;
}

SimilarityMatrix build_matrices(std::span<const std::pair<HeuristicCandidate, FitnessRecord>> members, double alpha,
                                double beta, const CodeSimilarityOptions& options) {
    SimilarityMatrix out;
    std::vector<FitnessRecord> records;
    std::vector<std::string> sources;
    for (const auto& [cand, rec] : members) {
        if (!rec.all_ok()) {
            out.excluded.push_back(cand.id);
            continue;
        }
        out.ids.push_back(cand.id);
        records.push_back(rec);
        sources.push_back(source_text(cand.body));
    }
    const auto n = out.ids.size();
    if (n < 2) throw std::invalid_argument("similarity needs at least two candidates with ok fitness");

    const auto profiles = performance_profiles(records);
    out.perf = SquareMatrix(n);
    out.code = SquareMatrix(n);
    out.similarity = SquareMatrix(n);
    double max_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double p = i == j ? 1.0 : sim_perf(profiles[i].z, profiles[j].z);
            const double c = i == j ? 1.0 : sim_code(sources[i], sources[j], options);
            const double w = sim_combined(p, c, alpha, beta);
            out.perf(i, j) = out.perf(j, i) = p;
            out.code(i, j) = out.code(j, i) = c;
            out.similarity(i, j) = out.similarity(j, i) = w;
            max_w = std::max(max_w, w);
        }
    }
    if (max_w <= 0.0) throw DegenerateSimilarity("all pairwise similarities are 0; skip grouping this generation");

    out.normalized = SquareMatrix(n);
    out.dissimilarity = SquareMatrix(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.normalized(i, j) = out.similarity(i, j) / max_w;
            out.dissimilarity(i, j) = std::clamp(1.0 - out.normalized(i, j), 0.0, 1.0);
        }
    }
    return out;
}

std::string matrix_to_csv(const SquareMatrix& m, std::span<const CandidateId> ids) {
    std::string out = "id";
    for (const auto& id : ids) out += "," + id;
    out += "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        out += i < ids.size() ? ids[i] : std::to_string(i);
        for (std::size_t j = 0; j < m.size(); ++j) out += fmt::format(",{}", m(i, j));
        out += "\n";
    }
    return out;
}

}  // namespace revel
