#pragma once

#include <memory>
#include <string>
#include <vector>

#include "agent/types.hpp"
#include "backends/backend.hpp"

namespace agentloop {

struct EpisodeOptions {
    int n_max = 3;
    uint64_t seed = 0;
    // Extra samples allowed after a malformed tool call before the episode
    // is flagged with a tool invocation error.
    int parse_retries = 1;
};

struct EpisodeContext {
    const Query& query;
    int next_round = 1;                // 1-based round the output would open
    bool termination_allowed = false;  // only after a completed round
    const std::vector<Round>& completed;
};

// One policy emission, split into transcript fragments. Fragments carrying
// an ActionRecord are the stochastic tokens the trainer differentiates
// through; recordless fragments are deterministic renderings.
struct PolicyPiece {
    std::string text;
    std::optional<ActionRecord> record;
};

struct PolicyOutput {
    std::vector<PolicyPiece> pieces;
    std::string text() const;
};

// Per-episode sampling state. Never shared across episodes.
class EpisodePolicy {
  public:
    virtual ~EpisodePolicy() = default;
    virtual PolicyOutput next(const EpisodeContext& ctx) = 0;
};

// Reusable, thread-safe policy entry point.
class PolicyHandle {
  public:
    virtual ~PolicyHandle() = default;
    virtual std::string name() const = 0;
    virtual std::unique_ptr<EpisodePolicy> start_episode(const Query& query, uint64_t seed) const = 0;
};

// Runs the loop until the policy emits the termination action, n_max rounds
// complete, or a malformed tool call survives the retry budget (the episode
// is then flagged, not aborted). BackendUnavailable propagates.
Trajectory run_episode(const Query& query, const PolicyHandle& policy, GeneratorBackend& generator,
                       JudgeBackend& judge, ImageStore& store, const EpisodeOptions& options);

}  // namespace agentloop
