#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace revel {

struct RunConfig;

enum class Role { system, user, assistant };

std::string_view to_string(Role r);

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

/// Where a request comes from; lets scripted clients key replies by session and turn.
struct CallContext {
    std::string stage;  // init, cluster, think or act
    int generation = -1;
    int group = -1;
    int turn = -1;
    int attempt = 0;
};

struct LlmReply {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

/// Transport-level failure (network, HTTP status, malformed response body).
class LlmError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual LlmReply complete(const std::vector<ChatMessage>& messages, const CallContext& context = {}) = 0;
};

/// One scripted reply. An entry applies when every condition it sets holds: call
/// index equal to the number of completions served so far, each match substring
/// present in the last message, and stage / generation / group / turn equal to the
/// call context. An entry without conditions applies to any call.
struct MockEntry {
    std::vector<std::string> match;
    std::optional<int> call_index;
    std::optional<std::string> stage;
    std::optional<int> generation;
    std::optional<int> group;
    std::optional<int> turn;
    std::string response;
    bool repeat = false;  // stays available after use
};

/// Deterministic replay: the first unused applicable entry answers each call;
/// the fallback answers when nothing applies.
class MockLlm final : public LlmClient {
public:
    explicit MockLlm(std::vector<MockEntry> entries, std::string fallback = {});

    /// JSON: an array of entries or {"entries": [...], "fallback": "..."}. Entry fields:
    /// "match" (substring, list of substrings, or integer call index), "call",
    /// "stage", "generation", "group", "turn", "response", "repeat".
    static MockLlm from_json(std::string_view text);
    static MockLlm from_file(const std::string& path);

    /// Token counts are estimated as characters / 4.
    LlmReply complete(const std::vector<ChatMessage>& messages, const CallContext& context = {}) override;

    int calls() const { return calls_; }
    std::size_t unused_entries() const;

private:
    std::vector<MockEntry> entries_;
    std::vector<bool> used_;
    std::string fallback_;
    int calls_ = 0;
};

struct RemoteLlmOptions {
    std::string base_url = "https://api.openai.com/v1";
    std::string model;
    std::string api_key;
    double temperature = 0.0;
    double timeout_seconds = 120.0;
    int max_retries = 3;
};

/// Chat-completions HTTP client: POST {base_url}/chat/completions.
class RemoteLlm final : public LlmClient {
public:
    explicit RemoteLlm(RemoteLlmOptions options);
    LlmReply complete(const std::vector<ChatMessage>& messages, const CallContext& context = {}) override;

private:
    RemoteLlmOptions options_;
};

/// Builds the client selected by the config: mock script file or remote endpoint
/// (API key read from the environment variable named in the config).
std::unique_ptr<LlmClient> make_llm_client(const RunConfig& config);

}  // namespace revel
