#include "sim/image.hpp"

#include <algorithm>

#include <json.hpp>

#include "util/errors.hpp"
#include "util/rng.hpp"
#include "util/text.hpp"

namespace agentloop::sim {

using nlohmann::json;

double SimParams::satisfaction_probability(int emphasis) const {
    double p = p0 + g * static_cast<double>(emphasis);
    return std::clamp(p, 0.0, cap);
}

void PromptProgram::validate() const {
    if (attribute_tokens.size() != emphasis.size()) {
        throw Error("prompt program emphasis length mismatch");
    }
    for (int e : emphasis) {
        if (e < 0 || e > kMaxEmphasis) throw Error("emphasis out of range");
    }
}

PromptProgram parse_prompt_program(const std::string& prompt_text) {
    PromptProgram program;
    program.verbosity = agentloop::word_count(prompt_text);
    for (const auto& word : agentloop::split_words(prompt_text)) {
        std::string_view w = word;
        int marks = 0;
        while (!w.empty() && w.front() == '!') {
            ++marks;
            w.remove_prefix(1);
        }
        const size_t eq = w.find('=');
        if (eq == std::string_view::npos || eq == 0 || eq + 1 >= w.size()) continue;
        std::string token(w);
        int e = std::min(marks, kMaxEmphasis);
        auto it = std::find(program.attribute_tokens.begin(), program.attribute_tokens.end(), token);
        if (it == program.attribute_tokens.end()) {
            program.attribute_tokens.push_back(std::move(token));
            program.emphasis.push_back(e);
        } else {
            // Duplicate mention: strongest emphasis wins.
            size_t idx = static_cast<size_t>(it - program.attribute_tokens.begin());
            program.emphasis[idx] = std::max(program.emphasis[idx], e);
        }
    }
    return program;
}

std::string render_prompt_text(const PromptProgram& program) {
    program.validate();
    std::string text = "a scene with";
    for (size_t i = 0; i < program.attribute_tokens.size(); ++i) {
        text += i == 0 ? " " : " and ";
        text.append(static_cast<size_t>(program.emphasis[i]), '!');
        text += program.attribute_tokens[i];
    }
    return text;
}

bool SimImage::satisfies(const std::string& constraint_token) const {
    for (size_t i = 0; i < attribute_tokens.size(); ++i) {
        if (attribute_tokens[i] == constraint_token) return satisfied[i];
    }
    return false;
}

int SimImage::satisfied_count() const {
    return static_cast<int>(std::count(satisfied.begin(), satisfied.end(), true));
}

SimImage sim_generate(const PromptProgram& program, uint64_t seed, const SimParams& params) {
    program.validate();
    SimImage image;
    image.attribute_tokens = program.attribute_tokens;
    image.seed = seed;
    image.satisfied.resize(program.attribute_tokens.size());
    for (size_t j = 0; j < program.attribute_tokens.size(); ++j) {
        const double p = params.satisfaction_probability(program.emphasis[j]);
        const uint64_t draw = mix_seed({seed, fnv1a64(program.attribute_tokens[j]),
                                        static_cast<uint64_t>(program.emphasis[j])});
        image.satisfied[j] = hash_u01(draw) < p;
    }
    return image;
}

std::string sim_image_bytes(const SimImage& image) {
    json sat = json::array();
    for (bool b : image.satisfied) sat.push_back(b);
    json j{{"attrs", image.attribute_tokens},
           {"kind", "sim-image"},
           {"sat", sat},
           {"seed", image.seed}};
    return j.dump();
}

std::optional<SimImage> parse_sim_image(const std::string& bytes) {
    json j = json::parse(bytes, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (j.value("kind", "") != "sim-image") return std::nullopt;
    SimImage image;
    try {
        for (const auto& a : j.at("attrs")) image.attribute_tokens.push_back(a.get<std::string>());
        for (const auto& s : j.at("sat")) image.satisfied.push_back(s.get<bool>());
        image.seed = j.at("seed").get<uint64_t>();
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (image.attribute_tokens.size() != image.satisfied.size()) return std::nullopt;
    return image;
}

}  // namespace agentloop::sim
