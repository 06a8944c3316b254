#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "revel/executor.hpp"
#include "revel/similarity.hpp"

using namespace revel;

namespace {

const std::string kBestFitSource =
    "import numpy as np\n\ndef score(item, bins):\n    return -(bins - item).astype(float)\n";
const std::string kFirstFitSource =
    "import numpy as np\n\ndef score(item, bins):\n    return -np.arange(len(bins), dtype=float)\n";

std::pair<HeuristicCandidate, FitnessRecord> member(const std::string& builtin, std::vector<double> objective,
                                                    std::map<std::string, double> params = {}) {
    auto c = make_candidate(CandidateBody::builtin(builtin, std::move(params)), Origin::init);
    FitnessRecord r{c.id, objective, objective, 0.0, std::vector<Verdict>(objective.size(), Verdict::ok)};
    for (double v : objective) r.fitness += v / static_cast<double>(objective.size());
    return {c, r};
}

}  // namespace

TEST(Profiles, DirectDefinition) {
    const auto z = profiles_from_costs({{12, 10}, {10, 10}});
    EXPECT_NEAR(z[0][0], 0.2, 1e-15);
    EXPECT_EQ(z[0][1], 0.0);
    EXPECT_EQ(z[1], (std::vector<double>{0, 0}));
    EXPECT_EQ(profiles_from_costs({{3, 4, 5}})[0], (std::vector<double>{0, 0, 0}));
    EXPECT_THROW(profiles_from_costs({}), std::invalid_argument);
    EXPECT_THROW(profiles_from_costs({{1, 2}, {1}}), std::invalid_argument);
}

TEST(Profiles, EveryColumnHasAZero) {
    const auto z = profiles_from_costs({{3, 9, 4}, {5, 2, 4}, {4, 7, 8}});
    for (std::size_t i = 0; i < 3; ++i) {
        double lo = 1e9;
        for (const auto& row : z) {
            EXPECT_GE(row[i], 0.0);
            lo = std::min(lo, row[i]);
        }
        EXPECT_EQ(lo, 0.0);
    }
}

TEST(Profiles, NonPositiveBestIsShifted) {
    const auto z = profiles_from_costs({{0.0, 1.0}, {0.5, 2.0}});
    EXPECT_EQ(z[0][0], 0.0);
    EXPECT_GT(z[1][0], 0.0);
    for (const auto& row : z)
        for (double v : row) EXPECT_TRUE(std::isfinite(v));
}

TEST(Profiles, FromRecordsUseRawObjective) {
    const auto a = member("first_fit", {12, 10});
    const auto b = member("best_fit", {10, 10});
    std::vector<FitnessRecord> recs{a.second, b.second};
    const auto p = performance_profiles(recs);
    EXPECT_EQ(p[0].candidate_id, a.first.id);
    EXPECT_NEAR(p[0].z[0], 0.2, 1e-15);
}

TEST(SimPerf, CosineAndZeroRules) {
    const std::vector<double> a{0.3, 0.1}, x{1, 0}, y{0, 1}, zero{0, 0}, some{0.2, 0};
    EXPECT_NEAR(sim_perf(a, a), 1.0, 1e-15);
    EXPECT_EQ(sim_perf(x, y), 0.0);
    EXPECT_EQ(sim_perf(zero, some), 0.0);
    EXPECT_EQ(sim_perf(zero, zero), 1.0);
    const std::vector<double> shorter{1};
    EXPECT_THROW(sim_perf(x, shorter), std::invalid_argument);
}

TEST(Tokenizer, PythonishTokens) {
    const auto t = tokenize_source("x = a**2 // b  # comment\ny <= 'str'\n");
    EXPECT_EQ(t, (std::vector<std::string>{"x", "=", "a", "**", "2", "//", "b", "y", "<=", "'str'"}));
    EXPECT_TRUE(is_code_keyword("return"));
    EXPECT_TRUE(is_code_keyword("<="));
    EXPECT_FALSE(is_code_keyword("bins"));
}

TEST(SimCode, SelfSymmetricDisjoint) {
    EXPECT_NEAR(sim_code(kBestFitSource, kBestFitSource), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(sim_code(kBestFitSource, kFirstFitSource), sim_code(kFirstFitSource, kBestFitSource));
    EXPECT_EQ(sim_code("alpha beta gamma", "delta epsilon zeta"), 0.0);
    EXPECT_EQ(sim_code("", "x = 1"), 0.0);
}

TEST(SimCode, PinnedBestFitVersusFirstFit) {
    // Value from an independent token-BLEU / keyword-match calculation on the two strings.
    EXPECT_EQ(source_text(CandidateBody::builtin("best_fit")), kBestFitSource);
    EXPECT_EQ(source_text(CandidateBody::builtin("first_fit")), kFirstFitSource);
    EXPECT_NEAR(sim_code(kBestFitSource, kFirstFitSource), 0.6573464139104503, 1e-12);
}

TEST(SimCode, SyntaxComponentIsRenormalised) {
    CodeSimilarityOptions opts;
    opts.syntax_weight = 1.0;
    opts.syntax = [](std::string_view, std::string_view) { return 1.0; };
    const double base = sim_code(kBestFitSource, kFirstFitSource);
    EXPECT_NEAR(sim_code(kBestFitSource, kFirstFitSource, opts), (base + 1.0) / 2.0, 1e-12);
}

TEST(SimCombined, Weighting) {
    EXPECT_DOUBLE_EQ(sim_combined(1.0, 1.0, 0.5, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(sim_combined(0.3, 0.9, 1.0, 0.0), 0.3);
    EXPECT_DOUBLE_EQ(sim_combined(0.3, 0.9, 0.0, 1.0), 0.9);
}

TEST(Matrices, TwoIdenticalCandidatesGiveZeroDissimilarity) {
    const auto a = member("threshold_fit", {10, 12}, {{"threshold", 4}});
    const auto b = member("threshold_fit", {10, 12}, {{"threshold", 4.5}});
    std::vector<std::pair<HeuristicCandidate, FitnessRecord>> pop{a, b};
    const auto m = build_matrices(pop, 1.0, 0.0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(m.dissimilarity(i, j), 0.0);
}

TEST(Matrices, MatchDirectRecomputation) {
    std::vector<std::pair<HeuristicCandidate, FitnessRecord>> pop{
        member("first_fit", {31, 29, 40}), member("best_fit", {30, 29, 41}), member("worst_fit", {35, 33, 45})};
    const auto m = build_matrices(pop, 0.5, 0.5);
    ASSERT_EQ(m.ids.size(), 3u);

    std::vector<std::vector<double>> z(3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 3; ++k) {
            double best = 1e18;
            for (const auto& p : pop) best = std::min(best, p.second.objective_values[k]);
            z[i].push_back((pop[i].second.objective_values[k] - best) / best);
        }
    SquareMatrix w(3);
    double wmax = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            w(i, j) = 0.5 * oracle::cosine(z[i], z[j]) +
                      0.5 * sim_code(source_text(pop[i].first.body), source_text(pop[j].first.body));
            wmax = std::max(wmax, w(i, j));
        }
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_NEAR(m.similarity(i, j), w(i, j), 1e-12);
            EXPECT_NEAR(m.dissimilarity(i, j), 1.0 - w(i, j) / wmax, 1e-12);
        }
}

TEST(Matrices, ExcludesFailedAndRejectsDegenerate) {
    auto a = member("first_fit", {10});
    auto b = member("best_fit", {11});
    auto bad = member("worst_fit", {12});
    bad.second.verdicts = {Verdict::timeout};
    bad.second.fitness = kPenaltyFitness;
    std::vector<std::pair<HeuristicCandidate, FitnessRecord>> pop{a, b, bad};
    const auto m = build_matrices(pop, 0.5, 0.5);
    EXPECT_EQ(m.ids.size(), 2u);
    ASSERT_EQ(m.excluded.size(), 1u);
    EXPECT_EQ(m.excluded[0], bad.first.id);

    std::vector<std::pair<HeuristicCandidate, FitnessRecord>> one{a, bad};
    EXPECT_THROW(build_matrices(one, 0.5, 0.5), std::invalid_argument);
}

TEST(Matrices, RandomPopulationsKeepInvariants) {
    std::mt19937_64 rng(2024);
    const std::vector<std::string> names{"first_fit", "best_fit", "worst_fit", "threshold_fit"};
    for (int trial = 0; trial < 40; ++trial) {
        std::uniform_int_distribution<int> size(2, 8);
        std::uniform_real_distribution<double> cost(10, 20);
        std::vector<std::pair<HeuristicCandidate, FitnessRecord>> pop;
        const int n = size(rng);
        for (int i = 0; i < n; ++i)
            pop.push_back(member("threshold_fit", {cost(rng), cost(rng), cost(rng)}, {{"threshold", 1.0 + i}}));
        const auto m = build_matrices(pop, 0.5, 0.5);
        for (std::size_t i = 0; i < m.ids.size(); ++i) {
            EXPECT_EQ(m.dissimilarity(i, i), 0.0);
            for (std::size_t j = 0; j < m.ids.size(); ++j) {
                EXPECT_EQ(m.dissimilarity(i, j), m.dissimilarity(j, i));
                EXPECT_GE(m.dissimilarity(i, j), 0.0);
                EXPECT_LE(m.dissimilarity(i, j), 1.0);
            }
        }
    }
}

TEST(Matrices, CsvHasHeader) {
    SquareMatrix m(2, 0.5);
    std::vector<CandidateId> ids{"a", "b"};
    EXPECT_EQ(matrix_to_csv(m, ids).substr(0, 5), "id,a,");
}

TEST(Profiles, CommonScaleLeavesProfilesUnchanged) {
    const std::vector<std::vector<double>> costs{{3, 9, 4}, {5, 2, 4}, {4, 7, 8}};
    auto scaled = costs;
    for (auto& row : scaled)
        for (auto& v : row) v *= 7.5;
    const auto a = profiles_from_costs(costs);
    const auto b = profiles_from_costs(scaled);
    for (std::size_t h = 0; h < a.size(); ++h)
        for (std::size_t i = 0; i < a[h].size(); ++i) EXPECT_NEAR(a[h][i], b[h][i], 1e-12);
}

TEST(SimCode, RandomSourcesSelfOneAndSymmetric) {
    const std::vector<std::string> vocab{"def", "return", "if", "else", "for", "in", "x", "bins", "item", "(", ")",
                                         "+",   "-",      "*",  "<",    "np",  ".", "max", "1",    "0.5",  ":", "\n"};
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::uniform_int_distribution<int> len(1, 40);
    auto random_source = [&] {
        std::string s;
        for (int k = len(rng); k > 0; --k) s += vocab[pick(rng)] + " ";
        return s;
    };
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = random_source();
        const auto b = random_source();
        EXPECT_NEAR(sim_code(a, a), 1.0, 1e-12);
        const double ab = sim_code(a, b);
        EXPECT_EQ(ab, sim_code(b, a));
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0);
    }
}
