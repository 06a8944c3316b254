#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "revel/core.hpp"
#include "revel/matrix.hpp"

namespace revel {

/// z(h) = (e(h) - e*) / e*, componentwise; e* is the per-instance population minimum.
struct PerformanceProfile {
    CandidateId candidate_id;
    std::vector<double> z;
};

/// Best costs <= 0 are lifted by shifting that instance column so its minimum becomes kProfileEpsilon.
inline constexpr double kProfileEpsilon = 1e-9;

/// Profiles for a cost matrix (one row per candidate). Throws std::invalid_argument
/// on an empty or ragged matrix.
std::vector<std::vector<double>> profiles_from_costs(const std::vector<std::vector<double>>& costs);

/// Profiles from each record's objective_values. Every record must be all-ok.
std::vector<PerformanceProfile> performance_profiles(std::span<const FitnessRecord> records);

/// Cosine similarity of two non-negative profiles, in [0, 1].
/// Both zero vectors give 1; exactly one zero vector gives 0.
double sim_perf(std::span<const double> z_i, std::span<const double> z_j);

/// Optional syntax-level matcher, e.g. an AST subtree match, returning a value in [0, 1].
using SyntaxMatcher = std::function<double(std::string_view, std::string_view)>;

struct CodeSimilarityOptions {
    double ngram_weight = 0.5;
    double keyword_weight = 0.5;
    double syntax_weight = 0.0;
    SyntaxMatcher syntax;  // used only when syntax_weight > 0
};

/// Python-ish lexer: identifiers, numbers, string literals, operators. Drops comments and whitespace.
std::vector<std::string> tokenize_source(std::string_view source);

/// Tokens that get full weight in the keyword-weighted match.
bool is_code_keyword(std::string_view token);

/// Directional token BLEU of hypothesis against reference (n = 1..4, add-one
/// smoothing for n >= 2, brevity penalty). 0 when no unigram matches.
double token_bleu(std::span<const std::string> reference, std::span<const std::string> hypothesis);

/// Directional keyword-weighted unigram precision (keywords 1.0, other tokens 0.2), with brevity penalty.
double keyword_match(std::span<const std::string> reference, std::span<const std::string> hypothesis);

/// Symmetric CodeBLEU-style similarity in [0, 1].
double sim_code(std::string_view src_i, std::string_view src_j, const CodeSimilarityOptions& options = {});

/// alpha * perf + beta * code.
double sim_combined(double perf, double code, double alpha, double beta);

class DegenerateSimilarity : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SimilarityMatrix {
    std::vector<CandidateId> ids;       // row order of every matrix
    std::vector<CandidateId> excluded;  // candidates with failed fitness
    SquareMatrix perf;                  // sim_perf
    SquareMatrix code;                  // sim_code
    SquareMatrix similarity;            // W
    SquareMatrix normalized;            // W / max W
    SquareMatrix dissimilarity;         // D = 1 - normalized
};

/// Similarity graph over the ok members. Throws std::invalid_argument with fewer than
/// two ok members and DegenerateSimilarity when every entry of W is 0.
SimilarityMatrix build_matrices(std::span<const std::pair<HeuristicCandidate, FitnessRecord>> members, double alpha,
                                double beta, const CodeSimilarityOptions& options = {});

/// CSV with a header row of ids; used for debugging dumps.
std::string matrix_to_csv(const SquareMatrix& m, std::span<const CandidateId> ids);

}  // namespace revel
