#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace agentloop::sim {

// Satisfaction model: attribute j mentioned with emphasis e is satisfied
// independently with probability clamp(p0 + g*e, 0, cap).
struct SimParams {
    double p0 = 0.35;
    double g = 0.25;
    double cap = 0.98;

    double satisfaction_probability(int emphasis) const;
};

// Structured surrogate for a refined prompt: which attribute tokens it
// mentions and how strongly each is emphasized ('!' marks, 0..2).
struct PromptProgram {
    std::vector<std::string> attribute_tokens;
    std::vector<int> emphasis;
    int verbosity = 0;  // word count of the source text

    void validate() const;
};

inline constexpr int kMaxEmphasis = 2;

PromptProgram parse_prompt_program(const std::string& prompt_text);

// Canonical prompt text for a program: "a scene with !!color=red and ...".
std::string render_prompt_text(const PromptProgram& program);

struct SimImage {
    std::vector<std::string> attribute_tokens;
    std::vector<bool> satisfied;
    uint64_t seed = 0;

    bool satisfies(const std::string& constraint_token) const;
    int satisfied_count() const;
};

// Pure function of (program, seed).
SimImage sim_generate(const PromptProgram& program, uint64_t seed, const SimParams& params);

// Canonical byte serialization; the image digest is the SHA-256 of these
// bytes. Parsing recovers the image state for oracle judging.
std::string sim_image_bytes(const SimImage& image);
std::optional<SimImage> parse_sim_image(const std::string& bytes);

}  // namespace agentloop::sim
