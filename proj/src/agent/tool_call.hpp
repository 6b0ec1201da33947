#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "agent/types.hpp"

namespace agentloop {

// Tool-call wire syntax. A policy output is reasoning prose followed by
// exactly one tag:
//   <generate>PROMPT BODY</generate>   invoke the image tool
//   <terminate/>                       termination action
// The body must be non-empty after trimming and must not contain tag
// delimiters; anything after the closing tag must be whitespace.
inline constexpr std::string_view kGenerateOpen = "<generate>";
inline constexpr std::string_view kGenerateClose = "</generate>";
inline constexpr std::string_view kTerminateTag = "<terminate/>";

struct TerminationSignal {};

struct ParseFailure {
    std::string message;
    std::string span;  // offending fragment
};

using ToolCallParse = std::variant<RefinedPrompt, TerminationSignal, ParseFailure>;

// Deterministic, pure. The returned RefinedPrompt has round=0; the episode
// loop assigns the round.
ToolCallParse parse_tool_call(std::string_view raw);

struct PolicyOutputParse {
    ToolCallParse value;
    std::string reasoning;  // trimmed prose before the tag
};

PolicyOutputParse parse_policy_output(std::string_view raw);

// Inverse of parsing for well-formed prompts:
// parse_tool_call(render_tool_call(p)) yields an equal prompt text.
std::string render_tool_call(const RefinedPrompt& prompt);

std::string render_termination();

}  // namespace agentloop
