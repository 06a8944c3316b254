#include "revel/runlog.hpp"

#include <array>
#include <chrono>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

namespace revel {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 10> kKinds{{
    {EventKind::run_start, "run_start"},
    {EventKind::instance_set, "instance_set"},
    {EventKind::candidate_evaluated, "candidate_evaluated"},
    {EventKind::partition, "partition"},
    {EventKind::group, "group"},
    {EventKind::turn, "turn"},
    {EventKind::reminder, "reminder"},
    {EventKind::selection, "selection"},
    {EventKind::generation_summary, "generation_summary"},
    {EventKind::run_end, "run_end"},
}};

}  // namespace

std::string_view to_string(EventKind k) {
    for (const auto& [kind, name] : kKinds)
        if (kind == k) return name;
    return "unknown";
}

EventKind event_kind_from_string(std::string_view s) {
    for (const auto& [kind, name] : kKinds)
        if (name == s) return kind;
    throw std::invalid_argument(fmt::format("unknown event kind '{}'", s));
}

RunLog::RunLog(const std::string& path, std::string run_id, bool timestamps)
    : out_(path, std::ios::trunc), run_id_(std::move(run_id)), timestamps_(timestamps) {
    if (!out_) throw std::runtime_error(fmt::format("cannot open run log '{}'", path));
}

void RunLog::emit(EventKind kind, nlohmann::json payload) {
    std::lock_guard lock(mutex_);
    nlohmann::json line;
    line["seq"] = seq_++;
    line["run_id"] = run_id_;
    if (timestamps_) {
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        line["ts"] = std::chrono::duration<double>(now).count();
    }
    line["kind"] = to_string(kind);
    line["payload"] = std::move(payload);
    if (out_.is_open()) out_ << line.dump() << '\n' << std::flush;
}

LogLine parse_log_line(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(fmt::format("not valid JSON: {}", e.what()));
    }
    if (!j.is_object() || !j.contains("seq") || !j.contains("run_id") || !j.contains("kind") || !j.contains("payload"))
        throw std::invalid_argument("missing seq, run_id, kind or payload");
    if (!j["seq"].is_number_integer() || !j["run_id"].is_string() || !j["kind"].is_string())
        throw std::invalid_argument("seq, run_id or kind has the wrong type");
    LogLine out;
    out.seq = j["seq"].get<long long>();
    out.run_id = j["run_id"].get<std::string>();
    out.kind = event_kind_from_string(j["kind"].get<std::string>());
    out.payload = std::move(j["payload"]);
    return out;
}

}  // namespace revel
