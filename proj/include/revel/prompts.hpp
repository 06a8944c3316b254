#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "revel/core.hpp"
#include "revel/prompt_templates.hpp"

namespace revel {

enum class Decision { explore, exploit };

std::string_view to_string(Decision d);

/// The task description box for the problem.
std::string_view task_prompt(Problem problem);

std::string render_explore_prompt();
std::string render_exploit_prompt();

/// First prompt of a run: task box followed by the explore output format.
std::string render_initialization_prompt(Problem problem);

/// Decision tag at the end of a THINK reply. Uses the last tag occurrence;
/// nullopt when neither or both kinds of tag appear.
std::optional<Decision> parse_decision(std::string_view text);

struct ParsedCandidate {
    std::string algorithm_note;
    std::string code;
};

/// Extracts <tag><algorithm>..</algorithm><code>..</code></tag> for the decision's tag.
/// Code fences inside <code> are stripped. Throws std::invalid_argument on zero or
/// several blocks, missing sub-tags, or empty code.
ParsedCandidate parse_candidate(std::string_view text, Decision decision);

/// Turns extracted code into a body. A code block consisting of the single line
/// `builtin:NAME [key=value ...]` names a registered heuristic; anything else is
/// guest source. Throws std::invalid_argument for an invalid builtin marker.
CandidateBody body_from_code(const std::string& code);

}  // namespace revel
