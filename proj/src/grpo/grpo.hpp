#pragma once

#include <map>
#include <vector>

#include <json.hpp>

#include "agent/episode.hpp"
#include "reward/reward.hpp"
#include "sim/toy_policy.hpp"

namespace agentloop::rl {

struct TrainerConfig {
    int g_prime = 12;
    int g = 8;
    double epsilon_clip = 0.2;
    double learning_rate = 1.0;
    double kl_coefficient = 0.0;
    int batch_size = 24;
    int iterations = 200;
    uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainerConfig from_json(const nlohmann::json& j);
};

struct RolloutGroup {
    Query query;
    std::vector<Trajectory> trajectories;
    std::vector<reward::RewardBreakdown> rewards;

    std::vector<double> reward_totals() const;
    std::vector<int> round_counts() const;
};

struct EnvHandles {
    GeneratorBackend& generator;
    JudgeBackend& judge;
    ImageStore& store;
    EpisodeOptions episode;
    int threads = 1;
};

// Samples cfg.g_prime complete trajectories for the query with rewards and
// per-token old-policy log-probabilities recorded in the token stream.
RolloutGroup rollout_group(const Query& query, const PolicyHandle& policy, EnvHandles& env,
                           const TrainerConfig& cfg, uint64_t seed);

// Quota per distinct round count: floor(G/B) each, remainder to ascending
// buckets, then shortfall against bucket sizes redistributed round-robin in
// ascending order.
std::map<int, int> bucket_quotas(const std::vector<int>& round_counts, int g);

// Uniform without-replacement selection inside each round-count bucket.
RolloutGroup resample_by_rounds(const RolloutGroup& group, int g, Rng& rng);

// (r_i - mean) / population std, all zeros at zero variance. Throws
// DegenerateGroup for fewer than two rewards.
std::vector<double> normalize_advantages(const std::vector<double>& rewards);

// min(sigma * A, clip(sigma, 1-eps, 1+eps) * A)
double clipped_term(double sigma, double advantage, double epsilon);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> gradient;
};

// Surrogate objective of the resampled group: mean over trajectories of the
// per-trajectory mean over recorded policy tokens of the clipped term, plus
// the optional KL penalty against the rollout policy. Environment tokens
// contribute exactly zero. The gradient points in the ascent direction.
LossGrad grpo_loss_and_gradient(const RolloutGroup& group, const std::vector<double>& advantages,
                                const sim::ToyPolicy& policy, const TrainerConfig& cfg);

}  // namespace agentloop::rl
