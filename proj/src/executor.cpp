#include "revel/executor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "guest_process.hpp"

namespace revel {

using json = nlohmann::json;

namespace {

using BinScorer = std::function<std::vector<double>(int, std::span<const int>, const std::map<std::string, double>&)>;
using NodeSelector =
    std::function<int(int, int, std::span<const int>, const SquareMatrix&, const std::map<std::string, double>&)>;

struct BuiltinImpl {
    BuiltinInfo info;
    BinScorer scorer;
    NodeSelector selector;
    std::function<std::string(const std::map<std::string, double>&)> source;
};

constexpr double kGapPenalty = 1.0e6;

const std::vector<BuiltinImpl>& builtin_table() {
    static const std::vector<BuiltinImpl> table = {
        {{"first_fit", Problem::bpp, "Place the item into the lowest-index feasible bin.", {}},
         [](int, std::span<const int> bins, const auto&) {
             std::vector<double> s(bins.size());
             for (std::size_t i = 0; i < bins.size(); ++i) s[i] = -static_cast<double>(i);
             return s;
         },
         nullptr,
         [](const auto&) {
             return std::string("import numpy as np\n\n"
                                "def score(item, bins):\n"
                                "    return -np.arange(len(bins), dtype=float)\n");
         }},
        {{"best_fit", Problem::bpp, "Place the item into the feasible bin with the least residual capacity.", {}},
         [](int item, std::span<const int> bins, const auto&) {
             std::vector<double> s(bins.size());
             for (std::size_t i = 0; i < bins.size(); ++i) s[i] = -static_cast<double>(bins[i] - item);
             return s;
         },
         nullptr,
         [](const auto&) {
             return std::string("import numpy as np\n\n"
                                "def score(item, bins):\n"
                                "    return -(bins - item).astype(float)\n");
         }},
        {{"worst_fit", Problem::bpp, "Place the item into the feasible bin with the most residual capacity.", {}},
         [](int item, std::span<const int> bins, const auto&) {
             std::vector<double> s(bins.size());
             for (std::size_t i = 0; i < bins.size(); ++i) s[i] = static_cast<double>(bins[i] - item);
             return s;
         },
         nullptr,
         [](const auto&) {
             return std::string("import numpy as np\n\n"
                                "def score(item, bins):\n"
                                "    return (bins - item).astype(float)\n");
         }},
        {{"threshold_fit",
          Problem::bpp,
          "Best fit, but avoid leaving a residual gap strictly between 0 and threshold.",
          {{"threshold", 5.0}}},
         [](int item, std::span<const int> bins, const auto& params) {
             const double threshold = params.at("threshold");
             std::vector<double> s(bins.size());
             for (std::size_t i = 0; i < bins.size(); ++i) {
                 const double residual = bins[i] - item;
                 const double penalty = (residual > 0 && residual < threshold) ? kGapPenalty : 0.0;
                 s[i] = -residual - penalty;
             }
             return s;
         },
         nullptr,
         [](const auto& params) {
             return fmt::format(
                 "import numpy as np\n\n"
                 "def score(item, bins):\n"
                 "    residual = (bins - item).astype(float)\n"
                 "    threshold = {}\n"
                 "    penalty = np.where((residual > 0) & (residual < threshold), {}, 0.0)\n"
                 "    return -residual - penalty\n",
                 params.at("threshold"), kGapPenalty);
         }},
        {{"nearest_neighbour", Problem::tsp, "Move to the closest unvisited node.", {}},
         nullptr,
         [](int current, int, std::span<const int> unvisited, const SquareMatrix& d, const auto&) {
             int best = unvisited.front();
             for (int node : unvisited)
                 if (d(current, node) < d(current, best)) best = node;
             return best;
         },
         [](const auto&) {
             return std::string("import numpy as np\n\n"
                                "def select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix):\n"
                                "    distances = [distance_matrix[current_node][node] for node in unvisited_nodes]\n"
                                "    return unvisited_nodes[int(np.argmin(distances))]\n");
         }},
        {{"destination_aware_nn",
          Problem::tsp,
          "Closest unvisited node, discounted by weight times its distance back to the destination.",
          {{"weight", 0.3}}},
         nullptr,
         [](int current, int destination, std::span<const int> unvisited, const SquareMatrix& d, const auto& params) {
             const double w = params.at("weight");
             int best = unvisited.front();
             double best_score = d(current, best) - w * d(best, destination);
             for (int node : unvisited) {
                 const double s = d(current, node) - w * d(node, destination);
                 if (s < best_score) {
                     best = node;
                     best_score = s;
                 }
             }
             return best;
         },
         [](const auto& params) {
             return fmt::format(
                 "import numpy as np\n\n"
                 "def select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix):\n"
                 "    weight = {}\n"
                 "    scores = [distance_matrix[current_node][node] - weight * distance_matrix[node][destination_node]\n"
                 "              for node in unvisited_nodes]\n"
                 "    return unvisited_nodes[int(np.argmin(scores))]\n",
                 params.at("weight"));
         }},
    };
    return table;
}

const BuiltinImpl* find_impl(std::string_view name) {
    for (const auto& b : builtin_table())
        if (b.info.name == name) return &b;
    return nullptr;
}

std::map<std::string, double> resolved_params(const BuiltinImpl& impl, const BuiltinBody& body) {
    auto params = impl.info.param_defaults;
    for (const auto& [k, v] : body.params) params[k] = v;
    return params;
}

}  // namespace

const std::vector<BuiltinInfo>& registered_builtins() {
    static const std::vector<BuiltinInfo> infos = [] {
        std::vector<BuiltinInfo> v;
        for (const auto& b : builtin_table()) v.push_back(b.info);
        return v;
    }();
    return infos;
}

const BuiltinInfo* find_builtin(std::string_view name) {
    const auto* impl = find_impl(name);
    return impl ? &impl->info : nullptr;
}

void validate_body(const CandidateBody& body) {
    if (body.is_guest()) {
        if (body.as_guest().source.empty()) throw std::invalid_argument("guest source must be non-empty");
        return;
    }
    const auto& b = body.as_builtin();
    const auto* impl = find_impl(b.name);
    if (!impl) throw std::invalid_argument(fmt::format("unknown builtin heuristic '{}'", b.name));
    for (const auto& [k, v] : b.params) {
        if (!impl->info.param_defaults.contains(k))
            throw std::invalid_argument(fmt::format("builtin '{}' has no parameter '{}'", b.name, k));
        if (!std::isfinite(v))
            throw std::invalid_argument(fmt::format("builtin '{}' parameter '{}' is not finite", b.name, k));
    }
}

std::optional<Problem> builtin_problem(const CandidateBody& body) {
    if (!body.is_builtin()) return std::nullopt;
    const auto* info = find_builtin(body.as_builtin().name);
    if (!info) return std::nullopt;
    return info->problem;
}

std::string source_text(const CandidateBody& body) {
    if (body.is_guest()) return body.as_guest().source;
    validate_body(body);
    const auto& b = body.as_builtin();
    const auto* impl = find_impl(b.name);
    return impl->source(resolved_params(*impl, b));
}

// ---------------------------------------------------------------------------

class ExecutorBackend {
public:
    virtual ~ExecutorBackend() = default;
    virtual CallResult<std::vector<double>> score(const ScoreCall& request, Clock::time_point deadline) = 0;
    virtual CallResult<int> next(const NextNodeCall& request, Clock::time_point deadline) = 0;
    virtual void close() {}
};

namespace {

class BuiltinBackend final : public ExecutorBackend {
public:
    BuiltinBackend(const BuiltinImpl& impl, std::map<std::string, double> params)
        : impl_(impl), params_(std::move(params)) {}

    CallResult<std::vector<double>> score(const ScoreCall& request, Clock::time_point deadline) override {
        if (Clock::now() > deadline) return {Verdict::timeout, {}, "deadline exceeded"};
        return {Verdict::ok, impl_.scorer(request.item, request.bins, params_), {}};
    }

    CallResult<int> next(const NextNodeCall& request, Clock::time_point deadline) override {
        if (Clock::now() > deadline) return {Verdict::timeout, {}, "deadline exceeded"};
        if (request.unvisited.empty()) return {Verdict::malformed_output, {}, "no unvisited nodes"};
        return {Verdict::ok,
                impl_.selector(request.current, request.destination, request.unvisited, *request.matrix, params_),
                {}};
    }

private:
    const BuiltinImpl& impl_;
    std::map<std::string, double> params_;
};

class GuestBackend final : public ExecutorBackend {
public:
    explicit GuestBackend(const std::vector<std::string>& argv) : process_(argv) {}

    /// Returns ok, or the verdict/message that failed the handshake.
    CallResult<bool> handshake(Problem problem, const std::string& source, Clock::time_point deadline) {
        json req = {{"op", "load"}, {"problem", std::string(to_string(problem))}, {"source", source}};
        auto reply = exchange(req, deadline);
        if (!reply.ok()) return {reply.verdict, false, reply.message};
        const json& r = reply.value;
        if (!r.is_object() || !r.contains("ok") || !r["ok"].is_boolean())
            return {Verdict::crash, false, "handshake reply is not {\"ok\": bool}"};
        if (!r["ok"].get<bool>()) {
            std::string err = r.contains("error") && r["error"].is_string() ? r["error"].get<std::string>() : "load failed";
            return {Verdict::malformed_output, false, err};
        }
        return {Verdict::ok, true, {}};
    }

    CallResult<std::vector<double>> score(const ScoreCall& request, Clock::time_point deadline) override {
        json req = {{"op", "score"}, {"item", request.item}, {"bins", request.bins}};
        auto reply = exchange(req, deadline);
        if (!reply.ok()) return {reply.verdict, {}, reply.message};
        const json& r = reply.value;
        if (auto err = soft_error(r)) return {Verdict::malformed_output, {}, *err};
        if (!r.is_object() || !r.contains("scores") || !r["scores"].is_array())
            return {Verdict::malformed_output, {}, "reply lacks a 'scores' array"};
        std::vector<double> scores;
        scores.reserve(r["scores"].size());
        for (const auto& v : r["scores"]) {
            if (!v.is_number()) return {Verdict::malformed_output, {}, "non-numeric score"};
            scores.push_back(v.get<double>());
        }
        return {Verdict::ok, std::move(scores), {}};
    }

    CallResult<int> next(const NextNodeCall& request, Clock::time_point deadline) override {
        const auto& m = *request.matrix;
        json matrix = json::array();
        for (std::size_t i = 0; i < m.size(); ++i) {
            auto row = m.row(i);
            matrix.push_back(std::vector<double>(row.begin(), row.end()));
        }
        json req = {{"op", "next"},
                    {"current", request.current},
                    {"destination", request.destination},
                    {"unvisited", request.unvisited},
                    {"matrix", std::move(matrix)}};
        auto reply = exchange(req, deadline);
        if (!reply.ok()) return {reply.verdict, {}, reply.message};
        const json& r = reply.value;
        if (auto err = soft_error(r)) return {Verdict::malformed_output, {}, *err};
        if (!r.is_object() || !r.contains("next") || !r["next"].is_number_integer())
            return {Verdict::malformed_output, {}, "reply lacks an integer 'next'"};
        return {Verdict::ok, r["next"].get<int>(), {}};
    }

    void close() override { process_.shutdown(); }
    void kill() { process_.kill(); }

private:
    static std::optional<std::string> soft_error(const json& r) {
        if (r.is_object() && r.contains("ok") && r["ok"].is_boolean() && !r["ok"].get<bool>()) {
            if (r.contains("error") && r["error"].is_string()) return r["error"].get<std::string>();
            return std::string("guest reported an error");
        }
        return std::nullopt;
    }

    CallResult<json> exchange(const json& request, Clock::time_point deadline) {
        using Io = detail::GuestProcess::Io;
        switch (process_.write_line(request.dump(), deadline)) {
            case Io::ok: break;
            case Io::timeout: process_.kill(); return {Verdict::timeout, {}, "timed out writing request"};
            case Io::closed: process_.kill(); return {Verdict::crash, {}, "guest closed the channel"};
        }
        std::string line;
        switch (process_.read_line(line, deadline)) {
            case Io::ok: break;
            case Io::timeout: process_.kill(); return {Verdict::timeout, {}, "timed out waiting for reply"};
            case Io::closed: process_.kill(); return {Verdict::crash, {}, "guest exited or closed the channel"};
        }
        json reply = json::parse(line, nullptr, false);
        if (reply.is_discarded()) {
            process_.kill();
            return {Verdict::crash, {}, fmt::format("non-JSON line from guest: '{}'", line.substr(0, 200))};
        }
        return {Verdict::ok, std::move(reply), {}};
    }

    detail::GuestProcess process_;
};

}  // namespace

// ---------------------------------------------------------------------------

ExecutorSession::ExecutorSession(CandidateId id, Problem problem, BackendKind kind,
                                 std::chrono::duration<double> timeout)
    : candidate_id_(std::move(id)), problem_(problem), kind_(kind), timeout_(timeout) {}

ExecutorSession::ExecutorSession(ExecutorSession&&) noexcept = default;
ExecutorSession& ExecutorSession::operator=(ExecutorSession&&) noexcept = default;

ExecutorSession::~ExecutorSession() { close(); }

void ExecutorSession::close() {
    if (backend_) {
        backend_->close();
        backend_.reset();
    }
    if (state_ == SessionStatus::loaded) state_ = SessionStatus::closed;
}

void ExecutorSession::fail(Verdict v, std::string message) {
    state_ = SessionStatus::failed;
    failure_ = v;
    failure_message_ = std::move(message);
    if (backend_) {
        backend_->close();
        backend_.reset();
    }
}

Clock::time_point ExecutorSession::effective_deadline(std::optional<Clock::time_point> deadline) const {
    auto per_call = Clock::now() + std::chrono::duration_cast<Clock::duration>(timeout_);
    return deadline ? std::min(*deadline, per_call) : per_call;
}

template <typename T>
CallResult<T> ExecutorSession::refuse() const {
    if (state_ == SessionStatus::failed) return {failure_, T{}, "session failed: " + failure_message_};
    return {Verdict::crash, T{}, "session closed"};
}

CallResult<std::vector<double>> ExecutorSession::call(const ScoreCall& request,
                                                      std::optional<Clock::time_point> deadline) {
    if (state_ != SessionStatus::loaded) return refuse<std::vector<double>>();
    if (problem_ != Problem::bpp) return {Verdict::malformed_output, {}, "score call on a TSP session"};
    auto r = backend_->score(request, effective_deadline(deadline));
    if (r.verdict == Verdict::timeout || r.verdict == Verdict::crash) {
        fail(r.verdict, r.message);
        return r;
    }
    if (!r.ok()) return r;
    if (r.value.size() != request.bins.size())
        return {Verdict::malformed_output, {},
                fmt::format("expected {} scores, got {}", request.bins.size(), r.value.size())};
    for (double s : r.value)
        if (!std::isfinite(s)) return {Verdict::malformed_output, {}, "non-finite score"};
    return r;
}

CallResult<int> ExecutorSession::call(const NextNodeCall& request, std::optional<Clock::time_point> deadline) {
    if (state_ != SessionStatus::loaded) return refuse<int>();
    if (problem_ != Problem::tsp) return {Verdict::malformed_output, {}, "next-node call on a BPP session"};
    if (!request.matrix) throw std::invalid_argument("NextNodeCall without a distance matrix");
    auto r = backend_->next(request, effective_deadline(deadline));
    if (r.verdict == Verdict::timeout || r.verdict == Verdict::crash) fail(r.verdict, r.message);
    return r;
}

ExecutorSession load(const CandidateBody& body, Problem problem, const ExecutorOptions& options) {
    validate_body(body);
    const auto id = candidate_key(body);
    const std::chrono::duration<double> timeout(options.timeout_seconds);

    if (body.is_builtin()) {
        const auto& b = body.as_builtin();
        const auto* impl = find_impl(b.name);
        if (impl->info.problem != problem)
            throw std::invalid_argument(
                fmt::format("builtin '{}' solves {}, not {}", b.name, to_string(impl->info.problem), to_string(problem)));
        ExecutorSession s(id, problem, BackendKind::builtin, timeout);
        s.backend_ = std::make_unique<BuiltinBackend>(*impl, resolved_params(*impl, b));
        return s;
    }

    ExecutorSession s(id, problem, BackendKind::guest, timeout);
    std::unique_ptr<GuestBackend> guest;
    try {
        guest = std::make_unique<GuestBackend>(options.guest_command);
    } catch (const std::exception& e) {
        s.fail(Verdict::crash, e.what());
        return s;
    }
    auto hs = guest->handshake(problem, body.as_guest().source,
                               Clock::now() + std::chrono::duration_cast<Clock::duration>(timeout));
    if (!hs.ok()) {
        guest->kill();
        s.fail(hs.verdict, "handshake failed: " + hs.message);
        return s;
    }
    s.backend_ = std::move(guest);
    return s;
}

}  // namespace revel
