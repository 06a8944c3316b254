#include <chrono>

#include <gtest/gtest.h>

#include "revel/executor.hpp"
#include "support.hpp"

using namespace revel;
using revel::testing::guest_options;
using revel::testing::guest_source;

namespace {

SquareMatrix line_matrix(int n) {
    SquareMatrix m(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = std::abs(i - j);
    return m;
}

ExecutorSession load_builtin(const std::string& name, Problem p, std::map<std::string, double> params = {}) {
    return load(CandidateBody::builtin(name, std::move(params)), p, {});
}

}  // namespace

TEST(Builtins, RegistryIsStableAndValidated) {
    const auto& all = registered_builtins();
    ASSERT_GE(all.size(), 6u);
    EXPECT_EQ(all[0].name, "first_fit");
    EXPECT_NE(find_builtin("best_fit"), nullptr);
    EXPECT_EQ(find_builtin("nope"), nullptr);
    EXPECT_THROW(validate_body(CandidateBody::builtin("nope")), std::invalid_argument);
    EXPECT_THROW(validate_body(CandidateBody::builtin("first_fit", {{"x", 1}})), std::invalid_argument);
    EXPECT_THROW(validate_body(CandidateBody::builtin("threshold_fit", {{"threshold", NAN}})), std::invalid_argument);
    EXPECT_EQ(*builtin_problem(CandidateBody::builtin("nearest_neighbour")), Problem::tsp);
    EXPECT_FALSE(builtin_problem(CandidateBody::guest("x")));
}

TEST(Builtins, BinScoringRules) {
    auto ff = load_builtin("first_fit", Problem::bpp);
    auto s = ff.call(ScoreCall{10, {50, 12, 30}});
    ASSERT_TRUE(s.ok());
    EXPECT_EQ(s.value, (std::vector<double>{0, -1, -2}));

    auto bf = load_builtin("best_fit", Problem::bpp);
    s = bf.call(ScoreCall{10, {50, 12, 30}});
    EXPECT_EQ(s.value, (std::vector<double>{-40, -2, -20}));

    auto wf = load_builtin("worst_fit", Problem::bpp);
    s = wf.call(ScoreCall{10, {50, 12, 30}});
    EXPECT_EQ(s.value, (std::vector<double>{40, 2, 20}));

    // Residual 2 lies inside (0, 5) and is pushed down; an exact fit is not.
    auto tf = load_builtin("threshold_fit", Problem::bpp);
    s = tf.call(ScoreCall{10, {50, 12, 10}});
    ASSERT_TRUE(s.ok());
    EXPECT_GT(s.value[2], s.value[0]);
    EXPECT_GT(s.value[0], s.value[1]);
}

TEST(Builtins, NextNodeRules) {
    const auto m = line_matrix(6);
    auto nn = load_builtin("nearest_neighbour", Problem::tsp);
    auto r = nn.call(NextNodeCall{2, 0, {0, 4, 5, 1}, &m});
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.value, 1);

    // With weight 1 the score d(c,j) - d(j,dest) favours nodes far from the destination.
    auto da = load_builtin("destination_aware_nn", Problem::tsp, {{"weight", 1.0}});
    r = da.call(NextNodeCall{2, 0, {1, 5}, &m});
    EXPECT_EQ(r.value, 5);
}

TEST(Builtins, ProblemMismatchAndUnknownThrow) {
    EXPECT_THROW(load(CandidateBody::builtin("first_fit"), Problem::tsp, {}), std::invalid_argument);
    EXPECT_THROW(load(CandidateBody::builtin("missing"), Problem::bpp, {}), std::invalid_argument);
}

TEST(Builtins, SourceTextBakesParameters) {
    const auto src = source_text(CandidateBody::builtin("threshold_fit", {{"threshold", 7}}));
    EXPECT_NE(src.find("def score(item, bins)"), std::string::npos);
    EXPECT_NE(src.find("threshold = 7"), std::string::npos);
    EXPECT_EQ(source_text(CandidateBody::guest("abc")), "abc");
}

TEST(GuestProtocol, ScoresRoundTrip) {
    auto bf = load(CandidateBody::guest(guest_source("best_fit")), Problem::bpp, guest_options());
    ASSERT_EQ(bf.state(), SessionStatus::loaded) << bf.failure_message();
    EXPECT_EQ(bf.backend(), BackendKind::guest);
    auto s = bf.call(ScoreCall{10, {50, 12, 30}});
    ASSERT_TRUE(s.ok()) << s.message;
    EXPECT_EQ(s.value, (std::vector<double>{-40, -2, -20}));
    s = bf.call(ScoreCall{1, {3}});
    EXPECT_EQ(s.value, (std::vector<double>{-2}));
    bf.close();
    EXPECT_EQ(bf.state(), SessionStatus::closed);
    EXPECT_FALSE(bf.call(ScoreCall{1, {3}}).ok());
}

TEST(GuestProtocol, NextNodeRoundTrip) {
    const auto m = line_matrix(5);
    auto g = load(CandidateBody::guest(guest_source("nearest", "select_next_node(a, b, c, d)")), Problem::tsp,
                  guest_options());
    ASSERT_EQ(g.state(), SessionStatus::loaded);
    auto r = g.call(NextNodeCall{4, 0, {0, 1, 2}, &m});
    ASSERT_TRUE(r.ok()) << r.message;
    EXPECT_EQ(r.value, 2);
}

TEST(GuestProtocol, LoadRejectionIsMalformedOutput) {
    auto g = load(CandidateBody::guest("def broken(:\n"), Problem::bpp, guest_options());
    EXPECT_EQ(g.state(), SessionStatus::failed);
    EXPECT_EQ(g.failure_verdict(), Verdict::malformed_output);
    EXPECT_NE(g.failure_message().find("SyntaxError"), std::string::npos);
}

TEST(GuestProtocol, ExitDuringLoadIsCrash) {
    auto g = load(CandidateBody::guest(guest_source("exit_on_load")), Problem::bpp, guest_options());
    EXPECT_EQ(g.state(), SessionStatus::failed);
    EXPECT_EQ(g.failure_verdict(), Verdict::crash);
}

TEST(GuestProtocol, MissingRunnerIsCrash) {
    auto g = load(CandidateBody::guest(guest_source("best_fit")), Problem::bpp, {2.0, {"/nonexistent/guest-runner"}});
    EXPECT_EQ(g.state(), SessionStatus::failed);
    EXPECT_EQ(g.failure_verdict(), Verdict::crash);
}

TEST(GuestProtocol, SleepingGuestIsKilledWithinTimeout) {
    auto g = load(CandidateBody::guest(guest_source("sleep")), Problem::bpp, guest_options(1.0));
    ASSERT_EQ(g.state(), SessionStatus::loaded);
    const auto t0 = std::chrono::steady_clock::now();
    auto s = g.call(ScoreCall{1, {5}});
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(s.verdict, Verdict::timeout);
    EXPECT_LT(elapsed, 2.0);
    EXPECT_EQ(g.state(), SessionStatus::failed);
    EXPECT_EQ(g.call(ScoreCall{1, {5}}).verdict, Verdict::timeout);
}

TEST(GuestProtocol, ExplicitDeadlineShortensTimeout) {
    auto g = load(CandidateBody::guest(guest_source("sleep")), Problem::bpp, guest_options(20.0));
    const auto t0 = std::chrono::steady_clock::now();
    auto s = g.call(ScoreCall{1, {5}}, t0 + std::chrono::milliseconds(300));
    EXPECT_EQ(s.verdict, Verdict::timeout);
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.5);
}

TEST(GuestProtocol, SlowHandshakeTimesOut) {
    auto g = load(CandidateBody::guest(guest_source("slow_load")), Problem::bpp, guest_options(0.5));
    EXPECT_EQ(g.state(), SessionStatus::failed);
    EXPECT_EQ(g.failure_verdict(), Verdict::timeout);
}

TEST(GuestProtocol, CrashAndGarbageAreCrashes) {
    auto c = load(CandidateBody::guest(guest_source("crash")), Problem::bpp, guest_options());
    EXPECT_EQ(c.call(ScoreCall{1, {5}}).verdict, Verdict::crash);
    EXPECT_EQ(c.state(), SessionStatus::failed);

    auto g = load(CandidateBody::guest(guest_source("garbage")), Problem::bpp, guest_options());
    EXPECT_EQ(g.call(ScoreCall{1, {5}}).verdict, Verdict::crash);
}

TEST(GuestProtocol, SoftErrorsAndBadShapesAreMalformed) {
    auto e = load(CandidateBody::guest(guest_source("soft_error")), Problem::bpp, guest_options());
    EXPECT_EQ(e.call(ScoreCall{1, {5}}).verdict, Verdict::malformed_output);

    auto w = load(CandidateBody::guest(guest_source("wrong_length")), Problem::bpp, guest_options());
    EXPECT_EQ(w.call(ScoreCall{1, {5, 6}}).verdict, Verdict::malformed_output);

    auto n = load(CandidateBody::guest(guest_source("nan")), Problem::bpp, guest_options());
    EXPECT_EQ(n.call(ScoreCall{1, {5}}).verdict, Verdict::malformed_output);
}
