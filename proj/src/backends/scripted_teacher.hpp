#pragma once

#include "backends/backend.hpp"

namespace agentloop {

// Deterministic stand-in for a teacher model. The pipeline sends messages
// whose last user content is a JSON payload with a "task" field:
//   refine  {query}                          -> reasoning + <generate>P1</generate>
//   judge   {query, criteria, image_b64}     -> reasoning + "verdict=pass|fail [unmet: ...]"
//   reflect {query, judgment, prior_prompt, hint_image_b64}
//                                            -> reasoning + <generate>P2</generate>
// Fault injection rates make rejection paths reachable at desk scale.
struct ScriptedTeacherConfig {
    int verbosity_words = 0;        // filler words appended inside prompt bodies
    double format_error_rate = 0.0; // emit an unclosed generate tag
    double judge_error_rate = 0.0;  // verdict contradicts the image state
    double inconsistency_rate = 0.0;// append a second, contradictory verdict marker
    double hint_leak_rate = 0.0;    // mention the reference image in the prompt
    int refine_emphasis = 1;        // emphasis applied to every attribute in P1
    int reflect_emphasis = 2;       // emphasis applied to unmet attributes in P2
    uint64_t seed = 0;
};

class ScriptedTeacher : public TeacherBackend {
  public:
    ScriptedTeacher(std::string name, ScriptedTeacherConfig cfg)
        : name_(std::move(name)), cfg_(cfg) {}

    std::string name() const override { return name_; }
    std::string complete(const nlohmann::json& messages) override;

  private:
    bool roll(const std::string& salt, const std::string& payload, double rate) const;

    std::string name_;
    ScriptedTeacherConfig cfg_;
};

// Marker the judging teacher embeds in its output; the pipeline routes on
// the first occurrence.
inline constexpr std::string_view kVerdictPass = "verdict=pass";
inline constexpr std::string_view kVerdictFail = "verdict=fail";

struct TeacherVerdict {
    bool pass = false;
    std::vector<std::string> deficiencies;
};

// Parses the first verdict marker; nullopt when none is present.
std::optional<TeacherVerdict> parse_teacher_verdict(const std::string& text);

// True when the text carries both pass and fail markers.
bool has_contradictory_verdicts(const std::string& text);

}  // namespace agentloop
