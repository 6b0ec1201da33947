#include "sim/policies.hpp"

#include <algorithm>

#include "agent/tool_call.hpp"
#include "sim/attributes.hpp"
#include "sim/image.hpp"
#include "util/errors.hpp"

namespace agentloop::sim {

namespace {

class ToyEpisodePolicy : public EpisodePolicy {
  public:
    ToyEpisodePolicy(const ToyPolicy& policy, int edits_per_round, const Query& query, uint64_t seed)
        : policy_(policy), edits_(edits_per_round), state_(query), rng_(seed) {
        if (static_cast<int>(state_.attribute_tokens.size()) != policy_.attribute_count()) {
            throw Error("query attribute count does not match policy");
        }
    }

    PolicyOutput next(const EpisodeContext& ctx) override {
        PolicyOutput out;
        const auto failed = state_.failed_bits(ctx.completed);
        for (int e = 0; e < edits_; ++e) {
            const bool terminate_masked = !(ctx.termination_allowed && e == 0);
            auto features = episode_features(ctx.next_round, policy_.n_max(), state_.emphasis, failed);
            PolicyStep step = policy_step(policy_, features, rng_, terminate_masked);
            ActionRecord record{step.action, std::move(features), terminate_masked, step.logprob};
            if (step.action == policy_.terminate_action()) {
                out.pieces.push_back({render_termination(), std::move(record)});
                return out;
            }
            const int j = policy_.action_attribute(step.action);
            const bool raise = policy_.is_raise(step.action);
            int& emphasis = state_.emphasis[static_cast<size_t>(j)];
            emphasis = std::clamp(emphasis + (raise ? 1 : -1), 0, kMaxEmphasis);
            out.pieces.push_back({edit_fragment(raise, state_.attribute_tokens[static_cast<size_t>(j)]),
                                  std::move(record)});
        }
        out.pieces.push_back({render_tool_call(state_.prompt(ctx.next_round)), std::nullopt});
        return out;
    }

  private:
    const ToyPolicy& policy_;
    int edits_;
    EpisodeProgramState state_;
    Rng rng_;
};

class ReflectiveEpisodePolicy : public EpisodePolicy {
  public:
    ReflectiveEpisodePolicy(int edits_per_round, const Query& query)
        : edits_(edits_per_round), state_(query) {}

    PolicyOutput next(const EpisodeContext& ctx) override {
        PolicyOutput out;
        if (ctx.termination_allowed && ctx.completed.back().verdict.satisfied) {
            out.pieces.push_back({render_termination(), std::nullopt});
            return out;
        }
        const auto failed = state_.failed_bits(ctx.completed);
        std::string reasoning;
        for (int e = 0; e < edits_; ++e) {
            const int j = pick_attribute(failed);
            if (j < 0) break;  // everything at maximum emphasis
            ++state_.emphasis[static_cast<size_t>(j)];
            reasoning += edit_fragment(true, state_.attribute_tokens[static_cast<size_t>(j)]);
        }
        out.pieces.push_back({reasoning + render_tool_call(state_.prompt(ctx.next_round)), std::nullopt});
        return out;
    }

  private:
    // Lowest-emphasis attribute with room to grow, failed ones first.
    int pick_attribute(const std::vector<uint8_t>& failed) const {
        int best = -1;
        bool best_failed = false;
        for (size_t j = 0; j < state_.emphasis.size(); ++j) {
            if (state_.emphasis[j] >= kMaxEmphasis) continue;
            const bool is_failed = failed[j] != 0;
            if (best < 0 || (is_failed && !best_failed) ||
                (is_failed == best_failed &&
                 state_.emphasis[j] < state_.emphasis[static_cast<size_t>(best)])) {
                best = static_cast<int>(j);
                best_failed = is_failed;
            }
        }
        return best;
    }

    int edits_;
    EpisodeProgramState state_;
};

}  // namespace

EpisodeProgramState::EpisodeProgramState(const Query& query)
    : attribute_tokens(parse_attribute_tokens(query.text)),
      emphasis(attribute_tokens.size(), 0) {
    if (attribute_tokens.empty()) throw Error("query text names no attributes");
}

std::vector<uint8_t> EpisodeProgramState::failed_bits(const std::vector<Round>& completed) const {
    std::vector<uint8_t> bits(attribute_tokens.size(), 0);
    if (completed.empty()) return bits;
    for (const auto& deficiency : completed.back().verdict.deficiencies) {
        auto it = std::find(attribute_tokens.begin(), attribute_tokens.end(), deficiency);
        if (it != attribute_tokens.end()) {
            bits[static_cast<size_t>(it - attribute_tokens.begin())] = 1;
        }
    }
    return bits;
}

RefinedPrompt EpisodeProgramState::prompt(int round) const {
    PromptProgram program{attribute_tokens, emphasis, 0};
    RefinedPrompt p;
    p.text = render_prompt_text(program);
    p.round = round;
    p.well_formed = true;
    return p;
}

std::string edit_fragment(bool raise, const std::string& attribute_token) {
    return std::string(raise ? "raise " : "lower ") + attribute_token + "; ";
}

std::unique_ptr<EpisodePolicy> ToyPolicyHandle::start_episode(const Query& query,
                                                              uint64_t seed) const {
    return std::make_unique<ToyEpisodePolicy>(*policy_, edits_per_round_, query, seed);
}

std::unique_ptr<EpisodePolicy> ReflectivePolicyHandle::start_episode(const Query& query,
                                                                     uint64_t /*seed*/) const {
    return std::make_unique<ReflectiveEpisodePolicy>(edits_per_round_, query);
}

}  // namespace agentloop::sim
