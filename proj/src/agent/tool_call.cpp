#include "agent/tool_call.hpp"

#include "util/text.hpp"

namespace agentloop {

namespace {

bool whitespace_only(std::string_view s) {
    return trim(s).empty();
}

ParseFailure failure(std::string message, std::string_view span) {
    std::string_view shown = span.size() > 160 ? span.substr(0, 160) : span;
    return ParseFailure{std::move(message), std::string(shown)};
}

}  // namespace

PolicyOutputParse parse_policy_output(std::string_view raw) {
    const size_t gen_pos = raw.find(kGenerateOpen);
    const size_t term_pos = raw.find(kTerminateTag);

    if (gen_pos == std::string_view::npos && term_pos == std::string_view::npos) {
        return {failure("no tool call found", trim(raw)), std::string(trim(raw))};
    }

    if (term_pos != std::string_view::npos &&
        (gen_pos == std::string_view::npos || term_pos < gen_pos)) {
        std::string reasoning(trim(raw.substr(0, term_pos)));
        std::string_view tail = raw.substr(term_pos + kTerminateTag.size());
        if (!whitespace_only(tail)) {
            return {failure("content after termination marker", trim(tail)), reasoning};
        }
        return {TerminationSignal{}, reasoning};
    }

    std::string reasoning(trim(raw.substr(0, gen_pos)));
    const size_t body_begin = gen_pos + kGenerateOpen.size();
    const size_t close_pos = raw.find(kGenerateClose, body_begin);
    if (close_pos == std::string_view::npos) {
        return {failure("unclosed generate tag", raw.substr(gen_pos)), reasoning};
    }
    std::string_view body = trim(raw.substr(body_begin, close_pos - body_begin));
    if (body.empty()) {
        return {failure("empty generate body", raw.substr(gen_pos, close_pos + kGenerateClose.size() - gen_pos)),
                reasoning};
    }
    if (body.find(kGenerateOpen) != std::string_view::npos ||
        body.find(kGenerateClose) != std::string_view::npos ||
        body.find(kTerminateTag) != std::string_view::npos) {
        return {failure("markup delimiter inside generate body", body), reasoning};
    }
    std::string_view tail = raw.substr(close_pos + kGenerateClose.size());
    if (!whitespace_only(tail)) {
        return {failure("content after generate call", trim(tail)), reasoning};
    }
    RefinedPrompt prompt;
    prompt.text = std::string(body);
    prompt.round = 0;
    prompt.well_formed = true;
    return {std::move(prompt), reasoning};
}

ToolCallParse parse_tool_call(std::string_view raw) {
    return parse_policy_output(raw).value;
}

std::string render_tool_call(const RefinedPrompt& prompt) {
    std::string out;
    out.reserve(prompt.text.size() + kGenerateOpen.size() + kGenerateClose.size());
    out += kGenerateOpen;
    out += prompt.text;
    out += kGenerateClose;
    return out;
}

std::string render_termination() {
    return std::string(kTerminateTag);
}

}  // namespace agentloop
