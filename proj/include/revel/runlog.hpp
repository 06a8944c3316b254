#pragma once

#include <fstream>
#include <mutex>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace revel {

enum class EventKind {
    run_start,
    instance_set,
    candidate_evaluated,
    partition,
    group,
    turn,
    reminder,
    selection,
    generation_summary,
    run_end
};

std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

/// Append-only line-delimited JSON log. Each line is
/// {"seq", "run_id", ["ts",] "kind", "payload"} and is flushed when written.
/// A default-constructed log discards events but still counts them.
class RunLog {
public:
    RunLog() = default;
    /// Truncates `path`. Throws std::runtime_error if it cannot be opened.
    RunLog(const std::string& path, std::string run_id, bool timestamps);

    void emit(EventKind kind, nlohmann::json payload);

    long long next_seq() const { return seq_; }
    const std::string& run_id() const { return run_id_; }

private:
    std::mutex mutex_;
    std::ofstream out_;
    std::string run_id_;
    bool timestamps_ = false;
    long long seq_ = 0;
};

struct LogLine {
    long long seq = 0;
    std::string run_id;
    EventKind kind = EventKind::run_start;
    nlohmann::json payload;
};

/// Parses one log line; throws std::invalid_argument on a malformed line.
LogLine parse_log_line(std::string_view line);

}  // namespace revel
