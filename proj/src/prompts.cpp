#include "revel/prompts.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "revel/executor.hpp"

namespace revel {

std::string_view to_string(Decision d) { return d == Decision::explore ? "explore" : "exploit"; }

std::string_view task_prompt(Problem problem) {
    return problem == Problem::bpp ? prompts::kBppTaskPrompt : prompts::kTspTaskPrompt;
}

std::string render_explore_prompt() { return std::string(prompts::kExplorePrompt); }
std::string render_exploit_prompt() { return std::string(prompts::kExploitPrompt); }

std::string render_initialization_prompt(Problem problem) {
    return fmt::format("{}\n\n{}", task_prompt(problem), prompts::kExplorePrompt);
}

std::optional<Decision> parse_decision(std::string_view text) {
    const auto explore = text.rfind("<explore>");
    const auto exploit = text.rfind("<exploit>");
    const bool has_explore = explore != std::string_view::npos;
    const bool has_exploit = exploit != std::string_view::npos;
    if (has_explore == has_exploit) return std::nullopt;
    return has_explore ? Decision::explore : Decision::exploit;
}

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) ++n;
    return n;
}

std::string_view between(std::string_view text, std::string_view open, std::string_view close, const char* what) {
    const auto a = text.find(open);
    if (a == std::string_view::npos) throw std::invalid_argument(fmt::format("missing {} in block", open));
    const auto b = text.find(close, a + open.size());
    if (b == std::string_view::npos) throw std::invalid_argument(fmt::format("unterminated {}", what));
    if (count_occurrences(text, open) != 1) throw std::invalid_argument(fmt::format("more than one {}", open));
    return text.substr(a + open.size(), b - a - open.size());
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_fences(std::string_view code) {
    code = trim(code);
    if (code.starts_with("```")) {
        const auto nl = code.find('\n');
        code = nl == std::string_view::npos ? std::string_view{} : code.substr(nl + 1);
        if (const auto end = code.rfind("```"); end != std::string_view::npos) code = code.substr(0, end);
    }
    return std::string(trim(code));
}

}  // namespace

ParsedCandidate parse_candidate(std::string_view text, Decision decision) {
    const std::string open = fmt::format("<{}>", to_string(decision));
    const std::string close = fmt::format("</{}>", to_string(decision));
    const auto opens = count_occurrences(text, open);
    if (opens == 0) throw std::invalid_argument(fmt::format("no {} block", open));
    if (opens > 1) throw std::invalid_argument(fmt::format("expected exactly one {} block, found {}", open, opens));
    const auto block = between(text, open, close, open.c_str());
    ParsedCandidate out;
    out.algorithm_note = std::string(trim(between(block, "<algorithm>", "</algorithm>", "<algorithm>")));
    out.code = strip_fences(between(block, "<code>", "</code>", "<code>"));
    if (out.code.empty()) throw std::invalid_argument("empty <code> block");
    return out;
}

CandidateBody body_from_code(const std::string& code) {
    const std::string_view trimmed = trim(code);
    if (!trimmed.starts_with("builtin:")) return CandidateBody::guest(code);
    if (trimmed.find('\n') != std::string_view::npos)
        throw std::invalid_argument("builtin marker must be a single line");

    std::vector<std::string_view> words;
    std::string_view rest = trimmed.substr(8);
    while (!rest.empty()) {
        rest = trim(rest);
        const auto sp = rest.find_first_of(" \t");
        words.push_back(rest.substr(0, sp));
        rest = sp == std::string_view::npos ? std::string_view{} : rest.substr(sp);
    }
    if (words.empty() || words[0].empty()) throw std::invalid_argument("builtin marker without a name");
    std::map<std::string, double> params;
    for (std::size_t k = 1; k < words.size(); ++k) {
        const auto eq = words[k].find('=');
        if (eq == std::string_view::npos) throw std::invalid_argument(fmt::format("bad builtin parameter '{}'", words[k]));
        const auto value = words[k].substr(eq + 1);
        double v = 0;
        auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc{} || p != value.data() + value.size() || !std::isfinite(v))
            throw std::invalid_argument(fmt::format("bad builtin parameter value '{}'", words[k]));
        params[std::string(words[k].substr(0, eq))] = v;
    }
    auto body = CandidateBody::builtin(std::string(words[0]), std::move(params));
    validate_body(body);
    return body;
}

}  // namespace revel
