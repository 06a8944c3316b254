#include <atomic>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "revel/llm.hpp"
#include "support.hpp"

using namespace revel;

namespace {

std::vector<ChatMessage> ask(const std::string& text) { return {{Role::user, text}}; }

}  // namespace

TEST(MockLlm, SubstringAndCallIndex) {
    auto llm = MockLlm::from_json(R"({"entries": [
        {"match": "alpha", "response": "A"},
        {"match": 2, "response": "third"},
        {"match": ["qq", "zz"], "response": "XY", "repeat": true}
    ], "fallback": "F"})");
    EXPECT_EQ(llm.complete(ask("nothing")).text, "F");
    EXPECT_EQ(llm.complete(ask("say alpha")).text, "A");
    EXPECT_EQ(llm.complete(ask("alpha again")).text, "third");
    EXPECT_EQ(llm.complete(ask("alpha")).text, "F");
    EXPECT_EQ(llm.complete(ask("qq alone")).text, "F");
    EXPECT_EQ(llm.complete(ask("qq and zz")).text, "XY");
    EXPECT_EQ(llm.complete(ask("zz then qq")).text, "XY");
    EXPECT_EQ(llm.calls(), 7);
    EXPECT_EQ(llm.unused_entries(), 0u);
}

TEST(MockLlm, MatchesOnlyTheLastMessage) {
    MockLlm llm({{{"needle"}, std::nullopt, {}, {}, {}, {}, "hit"}}, "miss");
    EXPECT_EQ(llm.complete({{Role::user, "needle"}, {Role::assistant, "ok"}, {Role::user, "other"}}).text, "miss");
    EXPECT_EQ(llm.complete({{Role::user, "other"}, {Role::user, "needle"}}).text, "hit");
}

TEST(MockLlm, ContextFilters) {
    auto llm = MockLlm::from_json(R"([
        {"stage": "act", "generation": 2, "group": 1, "turn": 3, "response": "exact"},
        {"stage": "think", "response": "thinking", "repeat": true}
    ])");
    EXPECT_EQ(llm.complete(ask("q"), {"act", 2, 1, 2, 0}).text, "");
    EXPECT_EQ(llm.complete(ask("q"), {"act", 2, 0, 3, 0}).text, "");
    EXPECT_EQ(llm.complete(ask("q"), {"think", 2, 1, 3, 0}).text, "thinking");
    EXPECT_EQ(llm.complete(ask("q"), {"act", 2, 1, 3, 0}).text, "exact");
    EXPECT_EQ(llm.complete(ask("q"), {"act", 2, 1, 3, 0}).text, "");
}

TEST(MockLlm, TokenEstimate) {
    MockLlm llm({}, std::string(40, 'r'));
    const auto r = llm.complete({{Role::user, std::string(20, 'a')}, {Role::user, std::string(20, 'b')}});
    EXPECT_EQ(r.prompt_tokens, 10);
    EXPECT_EQ(r.completion_tokens, 10);
}

TEST(MockLlm, RejectsMalformedScripts) {
    EXPECT_THROW(MockLlm::from_json("not json"), std::invalid_argument);
    EXPECT_THROW(MockLlm::from_json(R"([{"match": "x"}])"), std::invalid_argument);
    EXPECT_THROW(MockLlm::from_json(R"({"fallback": "x"})"), std::invalid_argument);
    EXPECT_THROW(MockLlm::from_json(R"([{"match": {"a": 1}, "response": "r"}])"), std::invalid_argument);
    EXPECT_THROW(MockLlm::from_file("/nonexistent/script.json"), std::invalid_argument);
}

TEST(MockLlm, FromFile) {
    revel::testing::TempDir dir;
    const auto path = dir.file("script.json");
    std::ofstream(path) << R"({"entries": [], "fallback": "from file"})";
    EXPECT_EQ(MockLlm::from_file(path).complete(ask("x")).text, "from file");
}

class ChatServer : public ::testing::Test {
protected:
    void SetUp() override {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = hits_++;
            last_body_ = req.body;
            last_auth_ = req.get_header_value("Authorization");
            if (n < failures_) {
                res.status = 500;
                return;
            }
            if (bad_body_) {
                res.set_content("{\"nope\": 1}", "application/json");
                return;
            }
            nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "pong"}}}}}},
                                 {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 3}}}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    void TearDown() override {
        server_.stop();
        thread_.join();
    }
    RemoteLlmOptions options() const {
        RemoteLlmOptions o;
        o.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/";
        o.model = "test-model";
        o.api_key = "secret";
        o.timeout_seconds = 5;
        o.max_retries = 2;
        return o;
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
    int failures_ = 0;
    bool bad_body_ = false;
    std::string last_body_, last_auth_;
};

TEST_F(ChatServer, ReturnsContentAndUsage) {
    RemoteLlm llm(options());
    const auto r = llm.complete({{Role::system, "sys"}, {Role::user, "ping"}});
    EXPECT_EQ(r.text, "pong");
    EXPECT_EQ(r.prompt_tokens, 12);
    EXPECT_EQ(r.completion_tokens, 3);
    EXPECT_EQ(last_auth_, "Bearer secret");
    const auto body = nlohmann::json::parse(last_body_);
    EXPECT_EQ(body["model"], "test-model");
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["content"], "ping");
}

TEST_F(ChatServer, RetriesServerErrors) {
    failures_ = 2;
    RemoteLlm llm(options());
    EXPECT_EQ(llm.complete(ask("ping")).text, "pong");
    EXPECT_EQ(hits_.load(), 3);
}

TEST_F(ChatServer, GivesUpAfterRetries) {
    failures_ = 10;
    RemoteLlm llm(options());
    EXPECT_THROW(llm.complete(ask("ping")), LlmError);
    EXPECT_EQ(hits_.load(), 3);
}

TEST_F(ChatServer, MalformedBodyIsAnError) {
    bad_body_ = true;
    RemoteLlm llm(options());
    EXPECT_THROW(llm.complete(ask("ping")), LlmError);
}

TEST(RemoteLlm, UnreachableEndpointIsAnError) {
    RemoteLlmOptions o;
    o.base_url = "http://127.0.0.1:1/v1";
    o.max_retries = 0;
    o.timeout_seconds = 1;
    RemoteLlm llm(o);
    EXPECT_THROW(llm.complete(ask("x")), LlmError);
    o.base_url = "not a url";
    EXPECT_THROW(RemoteLlm(o).complete(ask("x")), LlmError);
}
