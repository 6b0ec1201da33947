#pragma once

#include <json.hpp>

#include "agent/types.hpp"
#include "backends/backend.hpp"
#include "util/rng.hpp"

namespace agentloop::reward {

inline constexpr double kPointPass = 0.7;
inline constexpr double kFormatPenalty = -0.2;
inline constexpr double kPairBonus = 0.3;

// r_total = r_point + r_format + lambda * r_pair, with lambda = 1 when the
// pointwise reward fired and 0.5 otherwise. Totals are computed in integer
// twentieths so the combination table is exact.
struct RewardBreakdown {
    double r_point = 0.0;
    double r_format = 0.0;
    double r_pair = 0.0;
    double lambda = 0.5;
    double r_total = 0.0;

    void validate() const;
    nlohmann::json to_json() const;
    static RewardBreakdown from_json(const nlohmann::json& j);
};

// 0.7 iff the pointwise judge passes the final image; 0 otherwise. A
// trajectory with no completed rounds scores 0. Judge errors propagate.
double pointwise_reward(const Trajectory& trajectory, JudgeBackend& judge, const ImageStore& store);

// -0.2 if any tool call failed to parse or the episode is flagged with a
// tool invocation error; 0 otherwise. Applied once per trajectory.
double format_reward(const Trajectory& trajectory);

// 0.3 iff the trajectory has n >= 2 rounds and every consecutive image pair
// is a strict win for the later image; 0 otherwise. Each comparison uses an
// independent presentation shuffle. Judge errors propagate.
double pairwise_reward(const Trajectory& trajectory, JudgeBackend& judge, const ImageStore& store,
                       Rng& rng);

// Throws IllegalRewardComponent for inputs outside the legal sets.
RewardBreakdown combine(double r_point, double r_format, double r_pair);

// Batch-facing wrapper: backend failures during a component yield the
// conservative value (0) instead of aborting the rollout.
RewardBreakdown compute_reward(const Trajectory& trajectory, JudgeBackend& judge,
                               const ImageStore& store, Rng& rng);

}  // namespace agentloop::reward
