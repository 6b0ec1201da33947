#include "agent/episode.hpp"

#include "agent/tool_call.hpp"
#include "util/errors.hpp"
#include "util/rng.hpp"

namespace agentloop {

namespace {

std::string image_token_text(const ImageRef& image) {
    return "[image:" + image.handle + "]";
}

void append_policy_output(Trajectory& trajectory, const PolicyOutput& output) {
    for (const auto& piece : output.pieces) {
        Token token;
        token.text = piece.text;
        token.source = TokenSource::policy;
        token.action = piece.record;
        trajectory.token_stream.push_back(std::move(token));
    }
}

void append_environment_token(Trajectory& trajectory, std::string text) {
    Token token;
    token.text = std::move(text);
    token.source = TokenSource::environment;
    trajectory.token_stream.push_back(std::move(token));
}

}  // namespace

std::string PolicyOutput::text() const {
    std::string out;
    for (const auto& piece : pieces) out += piece.text;
    return out;
}

Trajectory run_episode(const Query& query, const PolicyHandle& policy, GeneratorBackend& generator,
                       JudgeBackend& judge, ImageStore& store, const EpisodeOptions& options) {
    if (options.n_max < 1) throw Error("n_max must be >= 1");
    query.validate();

    Trajectory trajectory;
    trajectory.query = query;
    trajectory.n_max = options.n_max;

    auto episode = policy.start_episode(query, options.seed);
    int round = 0;

    for (;;) {
        EpisodeContext ctx{query, round + 1, round >= 1, trajectory.rounds};

        // Sample until the output parses; the budget covers the original
        // sample plus parse_retries re-samples.
        std::optional<RefinedPrompt> prompt;
        std::string reasoning;
        bool terminate = false;
        for (int attempt = 0; attempt <= options.parse_retries; ++attempt) {
            PolicyOutput output = episode->next(ctx);
            append_policy_output(trajectory, output);
            PolicyOutputParse parsed = parse_policy_output(output.text());
            if (std::holds_alternative<ParseFailure>(parsed.value)) {
                ++trajectory.parse_failures;
                continue;
            }
            if (std::holds_alternative<TerminationSignal>(parsed.value)) {
                if (!ctx.termination_allowed) {
                    // Termination before any generation violates the grammar.
                    ++trajectory.parse_failures;
                    continue;
                }
                terminate = true;
                break;
            }
            prompt = std::get<RefinedPrompt>(parsed.value);
            reasoning = std::move(parsed.reasoning);
            break;
        }

        if (terminate) {
            trajectory.terminated = true;
            break;
        }
        if (!prompt) {
            trajectory.tool_error = true;
            break;
        }

        ++round;
        prompt->round = round;

        const uint64_t round_seed = mix_seed({options.seed, fnv1a64("round"), static_cast<uint64_t>(round)});
        ImageRef image = generate(generator, store, *prompt, round_seed);
        append_environment_token(trajectory, image_token_text(image));

        JudgePointResult point = judge_point(judge, store, query, image, {});
        append_environment_token(trajectory, point.reasoning);

        Round record;
        record.reason = ThoughtStep{ThoughtKind::reason, reasoning, round};
        record.prompt = *prompt;
        record.image = std::move(image);
        record.judgment = ThoughtStep{ThoughtKind::judge, point.reasoning, round};
        record.verdict.satisfied = point.pass;
        if (!point.pass) {
            record.verdict.deficiencies =
                point.deficiencies.empty() ? std::vector<std::string>{"unspecified deficiency"}
                                           : point.deficiencies;
        }
        trajectory.rounds.push_back(std::move(record));

        if (round == options.n_max) break;  // forced stop, no termination action
    }

    trajectory.n = round;
    trajectory.validate();
    return trajectory;
}

}  // namespace agentloop
