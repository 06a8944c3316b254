#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "revel/core.hpp"
#include "revel/matrix.hpp"

namespace revel {

using Clock = std::chrono::steady_clock;

/// score(item, bins): one score per feasible bin, argmax wins.
struct ScoreCall {
    int item = 0;
    std::vector<int> bins;
};

/// select_next_node(current, destination, unvisited, distance_matrix).
struct NextNodeCall {
    int current = 0;
    int destination = 0;
    std::vector<int> unvisited;
    const SquareMatrix* matrix = nullptr;
};

template <typename T>
struct CallResult {
    Verdict verdict = Verdict::ok;
    T value{};
    std::string message;

    bool ok() const { return verdict == Verdict::ok; }
};

enum class SessionStatus { loaded, failed, closed };
enum class BackendKind { builtin, guest };

struct ExecutorOptions {
    double timeout_seconds = 70.0;
    // argv of the guest runner; only used for guest bodies.
    std::vector<std::string> guest_command = {"revel-guest-runner"};
};

struct BuiltinInfo {
    std::string name;
    Problem problem;
    std::string description;
    std::map<std::string, double> param_defaults;
};

/// Registered native heuristics, in a stable order.
const std::vector<BuiltinInfo>& registered_builtins();
const BuiltinInfo* find_builtin(std::string_view name);

/// Throws std::invalid_argument for unknown builtin names or undeclared params.
void validate_body(const CandidateBody& body);

/// Problem a body targets: the registry entry for builtins, nullopt for guest bodies.
std::optional<Problem> builtin_problem(const CandidateBody& body);

/// Python source equivalent to the builtin, with params baked in as constants.
/// Guest bodies return their own source.
std::string source_text(const CandidateBody& body);

class ExecutorBackend;

/// A loaded candidate. Calls are only served in state loaded; a timeout or crash
/// moves the session to failed and every later call fails immediately.
class ExecutorSession {
public:
    ExecutorSession(ExecutorSession&&) noexcept;
    ExecutorSession& operator=(ExecutorSession&&) noexcept;
    ~ExecutorSession();

    const CandidateId& candidate_id() const { return candidate_id_; }
    Problem problem() const { return problem_; }
    BackendKind backend() const { return kind_; }
    SessionStatus state() const { return state_; }
    std::chrono::duration<double> call_timeout() const { return timeout_; }

    /// Verdict that put the session into state failed (ok otherwise).
    Verdict failure_verdict() const { return failure_; }
    const std::string& failure_message() const { return failure_message_; }

    CallResult<std::vector<double>> call(const ScoreCall& request, std::optional<Clock::time_point> deadline = {});
    CallResult<int> call(const NextNodeCall& request, std::optional<Clock::time_point> deadline = {});

    void close();

private:
    friend ExecutorSession load(const CandidateBody&, Problem, const ExecutorOptions&);
    ExecutorSession(CandidateId id, Problem problem, BackendKind kind, std::chrono::duration<double> timeout);

    Clock::time_point effective_deadline(std::optional<Clock::time_point> deadline) const;
    void fail(Verdict v, std::string message);
    template <typename T>
    CallResult<T> refuse() const;

    CandidateId candidate_id_;
    Problem problem_;
    BackendKind kind_;
    std::chrono::duration<double> timeout_;
    SessionStatus state_ = SessionStatus::loaded;
    Verdict failure_ = Verdict::ok;
    std::string failure_message_;
    std::unique_ptr<ExecutorBackend> backend_;
};

/// Binds a builtin or spawns the guest runner and performs the load handshake.
/// Unknown builtins and problem mismatches throw std::invalid_argument; guest
/// handshake failures return a session in state failed.
ExecutorSession load(const CandidateBody& body, Problem problem, const ExecutorOptions& options);

}  // namespace revel
