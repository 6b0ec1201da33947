#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace agentloop {

using json = nlohmann::json;

// User task. `constraints` are machine-checkable conditions consumed by
// oracle judges and forwarded to pointwise judges as hints; the policy only
// ever sees `text`.
struct Query {
    std::string id;
    std::string text;
    std::vector<std::string> constraints;

    // Hints handed to the pointwise judge; defaults to constraints.
    std::vector<std::string> hints;

    const std::vector<std::string>& effective_hints() const {
        return hints.empty() ? constraints : hints;
    }

    void validate() const;
    json to_json() const;
    static Query from_json(const json& j);
};

enum class ThoughtKind { reason, judge };

struct ThoughtStep {
    ThoughtKind kind = ThoughtKind::reason;
    std::string text;
    int round = 1;

    json to_json() const;
    static ThoughtStep from_json(const json& j);
};

struct RefinedPrompt {
    std::string text;
    int round = 1;
    bool well_formed = false;

    json to_json() const;
    static RefinedPrompt from_json(const json& j);
};

// Opaque reference to a generated image. `handle` is the lowercase hex
// SHA-256 of the image bytes; the bytes live in an ImageStore.
struct ImageRef {
    std::string handle;
    int round = 1;
    std::map<std::string, std::string> meta;

    json to_json() const;
    static ImageRef from_json(const json& j);
};

struct Verdict {
    bool satisfied = false;
    std::vector<std::string> deficiencies;

    void validate() const;
    json to_json() const;
    static Verdict from_json(const json& j);
};

// One think -> generate -> judge cycle.
struct Round {
    ThoughtStep reason;
    RefinedPrompt prompt;
    ImageRef image;
    ThoughtStep judgment;
    Verdict verdict;

    json to_json() const;
    static Round from_json(const json& j);
};

enum class TokenSource { policy, environment };

// Present on stochastic policy tokens; carries what the trainer needs to
// recompute the action log-probability under a new policy.
struct ActionRecord {
    int action = 0;
    std::vector<double> features;
    bool terminate_masked = false;
    double logprob = 0.0;
};

struct Token {
    std::string text;
    TokenSource source = TokenSource::policy;
    std::optional<ActionRecord> action;

    bool loss_mask() const { return source == TokenSource::policy; }
};

// Full multi-round record of one episode. Environment-sourced tokens are
// tool output (image content, judge feedback); everything else came from
// the policy.
struct Trajectory {
    Query query;
    std::vector<Round> rounds;
    bool terminated = false;
    int n = 0;
    int n_max = 0;
    bool tool_error = false;
    int parse_failures = 0;
    std::vector<Token> token_stream;

    const ImageRef& final_image() const;
    std::string transcript() const;

    // Checks the structural invariants; throws Error on violation.
    // n may be 0 only for tool-error-flagged episodes that never completed
    // a round.
    void validate() const;

    json to_json() const;
    static Trajectory from_json(const json& j);
};

int trajectory_round_count(const Trajectory& t);

}  // namespace agentloop
