#include <chrono>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "revel/llm.hpp"

namespace revel {

using json = nlohmann::json;

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // without trailing slash
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw LlmError(fmt::format("invalid LLM base URL '{}'", url));
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

}  // namespace

RemoteLlm::RemoteLlm(RemoteLlmOptions options) : options_(std::move(options)) {}

LlmReply RemoteLlm::complete(const std::vector<ChatMessage>& messages, const CallContext&) {
    const auto url = split_url(options_.base_url);
    httplib::Client client(url.origin);
    const auto secs = static_cast<time_t>(options_.timeout_seconds);
    const auto usecs = static_cast<time_t>((options_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    json body = {{"model", options_.model}, {"temperature", options_.temperature}, {"messages", json::array()}};
    for (const auto& m : messages) body["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});

    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(250) * (1 << (attempt - 1)));
        auto res = client.Post(url.path + "/chat/completions", headers, body.dump(), "application/json");
        if (!res) {
            last_error = fmt::format("request failed: {}", httplib::to_string(res.error()));
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = fmt::format("HTTP {}", res->status);
            continue;
        }
        if (res->status != 200) throw LlmError(fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 500)));
        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() ||
            reply["choices"].empty())
            throw LlmError("chat completion response lacks choices");
        const auto& msg = reply["choices"][0]["message"];
        LlmReply out;
        if (msg.contains("content") && msg["content"].is_string()) out.text = msg["content"].get<std::string>();
        if (reply.contains("usage") && reply["usage"].is_object()) {
            out.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
            out.completion_tokens = reply["usage"].value("completion_tokens", 0L);
        }
        return out;
    }
    throw LlmError(fmt::format("chat completion failed after {} attempts: {}", options_.max_retries + 1, last_error));
}

}  // namespace revel
