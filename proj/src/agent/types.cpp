#include "agent/types.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "util/errors.hpp"

namespace agentloop {

namespace {

std::string thought_kind_name(ThoughtKind k) {
    return k == ThoughtKind::reason ? "reason" : "judge";
}

ThoughtKind thought_kind_from(const std::string& s) {
    if (s == "reason") return ThoughtKind::reason;
    if (s == "judge") return ThoughtKind::judge;
    throw Error("unknown thought kind: " + s);
}

std::vector<std::string> string_list(const json& j) {
    std::vector<std::string> out;
    for (const auto& item : j) out.push_back(item.get<std::string>());
    return out;
}

}  // namespace

void Query::validate() const {
    if (text.empty()) throw Error("query text must be non-empty");
    if (!constraints.empty()) {
        std::set<std::string> seen;
        for (const auto& c : constraints) {
            if (c.empty()) throw Error("query constraint must be non-empty");
            if (!seen.insert(c).second) throw Error("duplicate query constraint: " + c);
        }
    }
}

json Query::to_json() const {
    json j{{"id", id}, {"text", text}, {"constraints", constraints}};
    if (!hints.empty()) j["hints"] = hints;
    return j;
}

Query Query::from_json(const json& j) {
    Query q;
    q.id = j.at("id").get<std::string>();
    q.text = j.at("text").get<std::string>();
    if (j.contains("constraints")) q.constraints = string_list(j.at("constraints"));
    if (j.contains("hints")) q.hints = string_list(j.at("hints"));
    return q;
}

json ThoughtStep::to_json() const {
    return json{{"kind", thought_kind_name(kind)}, {"text", text}, {"round", round}};
}

ThoughtStep ThoughtStep::from_json(const json& j) {
    ThoughtStep t;
    t.kind = thought_kind_from(j.at("kind").get<std::string>());
    t.text = j.at("text").get<std::string>();
    t.round = j.at("round").get<int>();
    return t;
}

json RefinedPrompt::to_json() const {
    return json{{"text", text}, {"round", round}, {"well_formed", well_formed}};
}

RefinedPrompt RefinedPrompt::from_json(const json& j) {
    RefinedPrompt p;
    p.text = j.at("text").get<std::string>();
    p.round = j.at("round").get<int>();
    p.well_formed = j.at("well_formed").get<bool>();
    return p;
}

json ImageRef::to_json() const {
    return json{{"handle", handle}, {"round", round}, {"meta", meta}};
}

ImageRef ImageRef::from_json(const json& j) {
    ImageRef r;
    r.handle = j.at("handle").get<std::string>();
    r.round = j.at("round").get<int>();
    if (j.contains("meta")) {
        for (const auto& [k, v] : j.at("meta").items()) r.meta[k] = v.get<std::string>();
    }
    return r;
}

void Verdict::validate() const {
    if (satisfied && !deficiencies.empty()) {
        throw Error("satisfied verdict must not list deficiencies");
    }
    if (!satisfied && deficiencies.empty()) {
        throw Error("unsatisfied verdict must list at least one deficiency");
    }
}

json Verdict::to_json() const {
    return json{{"satisfied", satisfied}, {"deficiencies", deficiencies}};
}

Verdict Verdict::from_json(const json& j) {
    Verdict v;
    v.satisfied = j.at("satisfied").get<bool>();
    if (j.contains("deficiencies")) v.deficiencies = string_list(j.at("deficiencies"));
    return v;
}

json Round::to_json() const {
    return json{{"reason", reason.to_json()},
                {"prompt", prompt.to_json()},
                {"image", image.to_json()},
                {"judgment", judgment.to_json()},
                {"verdict", verdict.to_json()}};
}

Round Round::from_json(const json& j) {
    Round r;
    r.reason = ThoughtStep::from_json(j.at("reason"));
    r.prompt = RefinedPrompt::from_json(j.at("prompt"));
    r.image = ImageRef::from_json(j.at("image"));
    r.judgment = ThoughtStep::from_json(j.at("judgment"));
    r.verdict = Verdict::from_json(j.at("verdict"));
    return r;
}

const ImageRef& Trajectory::final_image() const {
    if (rounds.empty()) throw Error("trajectory has no rounds");
    return rounds.back().image;
}

std::string Trajectory::transcript() const {
    std::string out;
    for (const auto& tok : token_stream) out += tok.text;
    return out;
}

void Trajectory::validate() const {
    query.validate();
    if (n != static_cast<int>(rounds.size())) {
        throw Error("round count n does not match rounds size");
    }
    if (n_max < 1) throw Error("n_max must be >= 1");
    if (n > n_max) throw Error("trajectory exceeds n_max rounds");
    if (n < 1 && !tool_error) throw Error("complete trajectory must have at least one round");
    if (!terminated && n != n_max && !tool_error) {
        throw Error("unterminated trajectory must be a forced stop or tool error");
    }
    std::set<std::string> handles;
    for (int i = 0; i < n; ++i) {
        const Round& r = rounds[static_cast<size_t>(i)];
        const int round_no = i + 1;
        if (r.reason.kind != ThoughtKind::reason || r.judgment.kind != ThoughtKind::judge) {
            throw Error("round thought kinds out of order");
        }
        if (r.reason.round != round_no || r.prompt.round != round_no ||
            r.image.round != round_no || r.judgment.round != round_no) {
            throw Error("round numbering mismatch");
        }
        if (r.prompt.well_formed) {
            if (r.prompt.text.empty()) throw Error("well-formed prompt must be non-empty");
        }
        if (!handles.insert(r.image.handle).second) {
            throw Error("duplicate image handle within trajectory: " + r.image.handle);
        }
        r.verdict.validate();
    }
}

json Trajectory::to_json() const {
    json rounds_json = json::array();
    for (const auto& r : rounds) rounds_json.push_back(r.to_json());
    json stream = json::array();
    for (const auto& tok : token_stream) {
        stream.push_back(json{{"text", tok.text},
                              {"source", tok.source == TokenSource::policy ? "policy" : "environment"},
                              {"loss_mask", tok.loss_mask()}});
    }
    return json{{"query", query.to_json()},
                {"rounds", rounds_json},
                {"terminated", terminated},
                {"n", n},
                {"n_max", n_max},
                {"tool_error", tool_error},
                {"parse_failures", parse_failures},
                {"token_stream", stream}};
}

Trajectory Trajectory::from_json(const json& j) {
    Trajectory t;
    t.query = Query::from_json(j.at("query"));
    for (const auto& r : j.at("rounds")) t.rounds.push_back(Round::from_json(r));
    t.terminated = j.at("terminated").get<bool>();
    t.n = j.at("n").get<int>();
    t.n_max = j.at("n_max").get<int>();
    t.tool_error = j.at("tool_error").get<bool>();
    t.parse_failures = j.value("parse_failures", 0);
    for (const auto& tok : j.at("token_stream")) {
        Token token;
        token.text = tok.at("text").get<std::string>();
        const std::string source = tok.at("source").get<std::string>();
        if (source == "policy") {
            token.source = TokenSource::policy;
        } else if (source == "environment") {
            token.source = TokenSource::environment;
        } else {
            throw Error("unknown token source: " + source);
        }
        if (tok.contains("loss_mask") && tok.at("loss_mask").get<bool>() != token.loss_mask()) {
            throw Error("token loss_mask inconsistent with source");
        }
        t.token_stream.push_back(std::move(token));
    }
    return t;
}

int trajectory_round_count(const Trajectory& t) {
    return static_cast<int>(t.rounds.size());
}

}  // namespace agentloop
