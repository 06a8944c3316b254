#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support.hpp"

using namespace revel::testing;

namespace {

struct Outcome {
    int code = -1;
    std::string output;
};

Outcome cli(const std::string& args) {
    const std::string cmd = std::string(REVEL_CLI_PATH) + " " + args + " 2>&1";
    Outcome o;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return o;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) o.output.append(buf, n);
    const int status = ::pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_kind(const std::string& log, const std::string& kind) {
    int n = 0;
    std::istringstream in(log);
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && nlohmann::json::parse(line).at("kind") == kind) ++n;
    return n;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        std::ofstream(dir.file("script.json")) << R"({"entries": [
            {"stage": "think", "response": "<exploit>", "repeat": true},
            {"stage": "act", "response": "<exploit><algorithm>tight</algorithm><code>builtin:best_fit</code></exploit>", "repeat": true}
        ], "fallback": ""})";
        std::ofstream(dir.file("run.conf")) << "# small mock run\n"
                                            << "problem = bpp\n"
                                            << "num_candidates_to_initialize = 4\n"
                                            << "epochs = 3\n"
                                            << "top_k = 4\n"
                                            << "max_turns = 2\n"
                                            << "num_clusters = 2\n"
                                            << "num_elements = 3\n"
                                            << "instance_count = 2\n"
                                            << "bpp_items = 100\n"
                                            << "llm_backend = mock\n"
                                            << "mock_script = \"" << dir.file("script.json") << "\"\n"
                                            << "log_path = \"" << dir.file("run.jsonl") << "\"\n";
    }
    TempDir dir;
};

}  // namespace

TEST_F(CliTest, MissingConfigFails) {
    const auto o = cli("run -c " + dir.file("absent.conf"));
    EXPECT_NE(o.code, 0);
    EXPECT_NE(o.output.find("absent.conf"), std::string::npos);
    EXPECT_NE(cli("").code, 0);
}

TEST_F(CliTest, InvalidValueIsAConfigError) {
    const auto o = cli("run -c " + dir.file("run.conf") + " -s epochs=0");
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.output.find("epochs"), std::string::npos);
}

TEST_F(CliTest, RunWithOverrideWritesOneGeneration) {
    const auto o = cli("run -c " + dir.file("run.conf") + " -s epochs=1 --summary " + dir.file("summary.json"));
    ASSERT_EQ(o.code, 0) << o.output;
    const auto log = slurp(dir.file("run.jsonl"));
    EXPECT_EQ(count_kind(log, "generation_summary"), 1);
    const auto last = log.substr(log.rfind('\n', log.size() - 2) + 1);
    EXPECT_EQ(nlohmann::json::parse(last).at("kind"), "run_end");
    const auto summary = nlohmann::json::parse(slurp(dir.file("summary.json")));
    EXPECT_EQ(summary.at("generations"), 1);
    EXPECT_TRUE(summary.at("best").contains("id"));
    EXPECT_NE(o.output.find("excess bins %"), std::string::npos);
}

TEST_F(CliTest, ExportAfterRun) {
    ASSERT_EQ(cli("run -c " + dir.file("run.conf")).code, 0);
    const auto o = cli("export " + dir.file("run.jsonl") + " trajectory");
    ASSERT_EQ(o.code, 0);
    EXPECT_EQ(std::count(o.output.begin(), o.output.end(), '\n'), 4);
    ASSERT_EQ(cli("export " + dir.file("run.jsonl") + " turns -o " + dir.file("turns.csv")).code, 0);
    EXPECT_TRUE(slurp(dir.file("turns.csv")).starts_with("turn,decision,count\n"));
    EXPECT_NE(cli("export " + dir.file("run.jsonl") + " histogram").code, 0);
}

TEST_F(CliTest, ExportReportsCorruptLine) {
    std::ofstream(dir.file("bad.jsonl")) << R"({"seq": 0, "run_id": "r", "kind": "turn", "payload": {}})" << "\n{\"seq\": 1,";
    const auto o = cli("export " + dir.file("bad.jsonl") + " turns");
    EXPECT_NE(o.code, 0);
    EXPECT_NE(o.output.find("line 2"), std::string::npos);
}

TEST_F(CliTest, EvalBuiltinPrintsPercent) {
    const auto o = cli("eval builtin:first_fit -s instance_count=2 -s bpp_items=200");
    ASSERT_EQ(o.code, 0) << o.output;
    EXPECT_NE(o.output.find("mean excess bins %"), std::string::npos);
    EXPECT_NE(cli("eval builtin:nearest_neighbour -s instance_count=1").code, 0);
}

TEST_F(CliTest, EvalTspBuiltinPrintsGap) {
    const auto o = cli("eval builtin:nearest_neighbour -s problem=tsp -s instance_count=2 -s tsp_nodes=20");
    ASSERT_EQ(o.code, 0) << o.output;
    EXPECT_NE(o.output.find("optimality gap %"), std::string::npos);
}

TEST_F(CliTest, EvalSyntaxErrorShowsMalformedOutput) {
    std::ofstream(dir.file("bad.py")) << "def broken(:\n    pass\n";
    const auto o = cli("eval " + dir.file("bad.py") + " -s instance_count=1 -s bpp_items=50 -s guest_runner=" +
                       std::string(FAKE_GUEST_PATH));
    EXPECT_NE(o.code, 0);
    EXPECT_NE(o.output.find("malformed_output"), std::string::npos);
}

TEST_F(CliTest, BaselinesListBuiltins) {
    const auto o = cli("baselines -s instance_count=2 -s bpp_items=200");
    ASSERT_EQ(o.code, 0) << o.output;
    EXPECT_NE(o.output.find("best_fit"), std::string::npos);
    EXPECT_NE(o.output.find("first_fit"), std::string::npos);
    const auto t = cli("baselines -s problem=tsp -s instance_count=2 -s tsp_nodes=15");
    ASSERT_EQ(t.code, 0) << t.output;
    EXPECT_NE(t.output.find("nearest_neighbour+2opt"), std::string::npos);
}
