#pragma once

#include "agent/episode.hpp"
#include "sim/toy_policy.hpp"

namespace agentloop::sim {

// Emits `edits_per_round` emphasis edits, then the rendered generate call.
// The terminate action is only available as the first token after a
// completed round; the round-1 opener samples over edit actions only.
class ToyPolicyHandle : public PolicyHandle {
  public:
    ToyPolicyHandle(const ToyPolicy& policy, int edits_per_round)
        : policy_(&policy), edits_per_round_(edits_per_round) {}

    std::string name() const override { return "toy"; }
    std::unique_ptr<EpisodePolicy> start_episode(const Query& query, uint64_t seed) const override;

  private:
    const ToyPolicy* policy_;
    int edits_per_round_;
};

// Hand-coded reflective baseline: raise the attributes the previous verdict
// flagged (lowest emphasis first), terminate once a round passes.
class ReflectivePolicyHandle : public PolicyHandle {
  public:
    explicit ReflectivePolicyHandle(int edits_per_round) : edits_per_round_(edits_per_round) {}

    std::string name() const override { return "reflective"; }
    std::unique_ptr<EpisodePolicy> start_episode(const Query& query, uint64_t seed) const override;

  private:
    int edits_per_round_;
};

// Shared episode-state helpers for the simulated task family.
struct EpisodeProgramState {
    std::vector<std::string> attribute_tokens;  // parsed from the query text
    std::vector<int> emphasis;

    explicit EpisodeProgramState(const Query& query);

    std::vector<uint8_t> failed_bits(const std::vector<Round>& completed) const;
    RefinedPrompt prompt(int round) const;
};

std::string edit_fragment(bool raise, const std::string& attribute_token);

}  // namespace agentloop::sim
