#include "backends/scripted_teacher.hpp"

#include <algorithm>

#include "agent/tool_call.hpp"
#include "sim/attributes.hpp"
#include "sim/image.hpp"
#include "util/digest.hpp"
#include "util/errors.hpp"
#include "util/text.hpp"

namespace agentloop {

namespace {

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words = {
        "highly",   "detailed", "sharp",    "studio", "lighting",
        "balanced", "framing",  "rich",     "tonal",  "vivid"};
    return words;
}

std::string with_filler(std::string body, int count) {
    const auto& words = filler_words();
    for (int i = 0; i < count; ++i) {
        body += " " + words[static_cast<size_t>(i) % words.size()];
    }
    return body;
}

nlohmann::json last_user_payload(const nlohmann::json& messages) {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->value("role", "") == "user") {
            return nlohmann::json::parse((*it).at("content").get<std::string>());
        }
    }
    throw Error("teacher messages contain no user payload");
}

std::string render_generate(const std::string& body, bool broken) {
    if (broken) return std::string(kGenerateOpen) + body;  // unclosed on purpose
    RefinedPrompt p;
    p.text = body;
    p.well_formed = true;
    return render_tool_call(p);
}

}  // namespace

bool ScriptedTeacher::roll(const std::string& salt, const std::string& payload, double rate) const {
    if (rate <= 0.0) return false;
    return hash_u01(mix_seed({cfg_.seed, fnv1a64(salt), fnv1a64(payload)})) < rate;
}

std::string ScriptedTeacher::complete(const nlohmann::json& messages) {
    const nlohmann::json payload = last_user_payload(messages);
    const std::string payload_str = payload.dump();
    const std::string task = payload.value("task", "");

    if (task == "refine") {
        const std::string query_text = payload.at("query").get<std::string>();
        auto tokens = sim::parse_attribute_tokens(query_text);
        sim::PromptProgram program;
        program.attribute_tokens = tokens;
        program.emphasis.assign(tokens.size(), std::clamp(cfg_.refine_emphasis, 0, sim::kMaxEmphasis));
        std::string body = with_filler(sim::render_prompt_text(program), cfg_.verbosity_words);
        std::string reasoning = "Rewriting the request with explicit attribute emphasis. ";
        return reasoning + render_generate(body, roll("refine-format", payload_str, cfg_.format_error_rate));
    }

    if (task == "judge") {
        std::vector<std::string> criteria;
        for (const auto& c : payload.at("criteria")) criteria.push_back(c.get<std::string>());
        std::vector<std::string> unmet;
        auto image = sim::parse_sim_image(base64_decode(payload.at("image_b64").get<std::string>()));
        if (!image) {
            unmet = criteria;
        } else {
            for (const auto& c : criteria) {
                if (!image->satisfies(c)) unmet.push_back(c);
            }
        }
        bool pass = unmet.empty();
        if (roll("judge-flip", payload_str, cfg_.judge_error_rate)) {
            pass = !pass;
            if (!pass) unmet = {"judged deficient"};
        }
        std::string text = "Reviewing the image against each requirement. ";
        if (pass) {
            text += "All conditions hold. verdict=pass";
        } else {
            text += "unmet: ";
            for (size_t i = 0; i < unmet.size(); ++i) {
                if (i > 0) text += "; ";
                text += unmet[i];
            }
            text += " verdict=fail";
        }
        if (roll("judge-contradict", payload_str, cfg_.inconsistency_rate)) {
            text += pass ? " verdict=fail" : " verdict=pass";
        }
        return text;
    }

    if (task == "reflect") {
        const std::string prior = payload.at("prior_prompt").get<std::string>();
        const std::string judgment = payload.at("judgment").get<std::string>();
        sim::PromptProgram program = sim::parse_prompt_program(prior);
        auto verdict = parse_teacher_verdict(judgment);
        if (verdict && !verdict->pass) {
            for (const auto& d : verdict->deficiencies) {
                auto it = std::find(program.attribute_tokens.begin(), program.attribute_tokens.end(), d);
                if (it == program.attribute_tokens.end()) continue;
                size_t idx = static_cast<size_t>(it - program.attribute_tokens.begin());
                program.emphasis[idx] = std::max(
                    program.emphasis[idx], std::clamp(cfg_.reflect_emphasis, 0, sim::kMaxEmphasis));
            }
        }
        std::string body = with_filler(sim::render_prompt_text(program), cfg_.verbosity_words);
        if (roll("reflect-leak", payload_str, cfg_.hint_leak_rate)) {
            body += " matching the reference image";
        }
        std::string reasoning = "The judgment flags unmet conditions; strengthening them. ";
        return reasoning + render_generate(body, roll("reflect-format", payload_str, cfg_.format_error_rate));
    }

    throw Error("scripted teacher received unknown task: " + task);
}

std::optional<TeacherVerdict> parse_teacher_verdict(const std::string& text) {
    const size_t pass_pos = text.find(kVerdictPass);
    const size_t fail_pos = text.find(kVerdictFail);
    if (pass_pos == std::string::npos && fail_pos == std::string::npos) return std::nullopt;
    TeacherVerdict verdict;
    verdict.pass = pass_pos != std::string::npos &&
                   (fail_pos == std::string::npos || pass_pos < fail_pos);
    if (!verdict.pass) {
        const size_t unmet_pos = text.find("unmet:");
        if (unmet_pos != std::string::npos) {
            size_t end = text.find("verdict=", unmet_pos);
            std::string span = text.substr(unmet_pos + 6, end == std::string::npos
                                                              ? std::string::npos
                                                              : end - (unmet_pos + 6));
            size_t start = 0;
            while (start <= span.size()) {
                size_t sep = span.find(';', start);
                std::string item(trim(span.substr(start, sep == std::string::npos ? std::string::npos
                                                                                  : sep - start)));
                if (!item.empty()) verdict.deficiencies.push_back(std::move(item));
                if (sep == std::string::npos) break;
                start = sep + 1;
            }
        }
        if (verdict.deficiencies.empty()) verdict.deficiencies = {"unspecified deficiency"};
    }
    return verdict;
}

bool has_contradictory_verdicts(const std::string& text) {
    return text.find(kVerdictPass) != std::string::npos &&
           text.find(kVerdictFail) != std::string::npos;
}

}  // namespace agentloop
