#include "revel/llm.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "revel/config.hpp"

namespace revel {

using json = nlohmann::json;

std::string_view to_string(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

MockLlm::MockLlm(std::vector<MockEntry> entries, std::string fallback)
    : entries_(std::move(entries)), used_(entries_.size(), false), fallback_(std::move(fallback)) {}

MockLlm MockLlm::from_json(std::string_view text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw std::invalid_argument("mock script is not valid JSON");
    std::string fallback;
    json list = doc;
    if (doc.is_object()) {
        if (!doc.contains("entries")) throw std::invalid_argument("mock script object needs 'entries'");
        list = doc["entries"];
        if (doc.contains("fallback")) fallback = doc["fallback"].get<std::string>();
    }
    if (!list.is_array()) throw std::invalid_argument("mock script entries must be an array");
    std::vector<MockEntry> entries;
    for (std::size_t k = 0; k < list.size(); ++k) {
        const auto& e = list[k];
        if (!e.is_object() || !e.contains("response") || !e["response"].is_string())
            throw std::invalid_argument(fmt::format("mock entry {} needs a string 'response'", k));
        MockEntry m;
        m.response = e["response"].get<std::string>();
        if (e.contains("match")) {
            const auto& mt = e["match"];
            if (mt.is_string()) m.match.push_back(mt.get<std::string>());
            else if (mt.is_number_integer()) m.call_index = mt.get<int>();
            else if (mt.is_array())
                for (const auto& s : mt) m.match.push_back(s.get<std::string>());
            else throw std::invalid_argument(fmt::format("mock entry {} has an invalid 'match'", k));
        }
        if (e.contains("call")) m.call_index = e["call"].get<int>();
        if (e.contains("stage")) m.stage = e["stage"].get<std::string>();
        if (e.contains("generation")) m.generation = e["generation"].get<int>();
        if (e.contains("group")) m.group = e["group"].get<int>();
        if (e.contains("turn")) m.turn = e["turn"].get<int>();
        if (e.contains("repeat")) m.repeat = e["repeat"].get<bool>();
        entries.push_back(std::move(m));
    }
    return MockLlm(std::move(entries), std::move(fallback));
}

MockLlm MockLlm::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument(fmt::format("cannot open mock script '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

LlmReply MockLlm::complete(const std::vector<ChatMessage>& messages, const CallContext& context) {
    const std::string_view last = messages.empty() ? std::string_view{} : std::string_view(messages.back().content);
    const int index = calls_++;
    long prompt_chars = 0;
    for (const auto& m : messages) prompt_chars += static_cast<long>(m.content.size());
    auto reply = [&](const std::string& text) { return LlmReply{text, prompt_chars / 4, static_cast<long>(text.size()) / 4}; };

    for (std::size_t k = 0; k < entries_.size(); ++k) {
        if (used_[k]) continue;
        const auto& e = entries_[k];
        bool applies = !e.call_index || *e.call_index == index;
        for (const auto& s : e.match)
            if (last.find(s) == std::string_view::npos) applies = false;
        if (e.stage && *e.stage != context.stage) applies = false;
        if (e.generation && *e.generation != context.generation) applies = false;
        if (e.group && *e.group != context.group) applies = false;
        if (e.turn && *e.turn != context.turn) applies = false;
        if (!applies) continue;
        if (!e.repeat) used_[k] = true;
        return reply(e.response);
    }
    return reply(fallback_);
}

std::size_t MockLlm::unused_entries() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < entries_.size(); ++k)
        if (!used_[k] && !entries_[k].repeat) ++n;
    return n;
}

std::unique_ptr<LlmClient> make_llm_client(const RunConfig& config) {
    if (config.llm_backend == LlmBackend::mock) {
        if (config.mock_script.empty()) return std::make_unique<MockLlm>(std::vector<MockEntry>{});
        return std::make_unique<MockLlm>(MockLlm::from_file(config.mock_script));
    }
    RemoteLlmOptions opts;
    opts.base_url = config.llm_base_url;
    opts.model = config.llm_model;
    opts.temperature = config.llm_temperature;
    if (const char* key = std::getenv(config.llm_api_key_env.c_str())) opts.api_key = key;
    if (const char* url = std::getenv("REVEL_LLM_BASE_URL")) opts.base_url = url;
    if (const char* model = std::getenv("REVEL_LLM_MODEL")) opts.model = model;
    return std::make_unique<RemoteLlm>(std::move(opts));
}

}  // namespace revel
