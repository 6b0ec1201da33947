#include "reward/reward.hpp"

#include <iostream>

#include "util/errors.hpp"

namespace agentloop::reward {

namespace {

int point_twentieths(double r_point) {
    if (r_point == 0.0) return 0;
    if (r_point == kPointPass) return 14;
    throw IllegalRewardComponent("pointwise reward must be 0 or 0.7");
}

int format_twentieths(double r_format) {
    if (r_format == 0.0) return 0;
    if (r_format == kFormatPenalty) return -4;
    throw IllegalRewardComponent("format reward must be 0 or -0.2");
}

int pair_twentieths(double r_pair) {
    if (r_pair == 0.0) return 0;
    if (r_pair == kPairBonus) return 6;
    throw IllegalRewardComponent("pairwise reward must be 0 or 0.3");
}

}  // namespace

void RewardBreakdown::validate() const {
    const RewardBreakdown recomputed = combine(r_point, r_format, r_pair);
    if (recomputed.lambda != lambda || recomputed.r_total != r_total) {
        throw IllegalRewardComponent("reward breakdown is internally inconsistent");
    }
}

nlohmann::json RewardBreakdown::to_json() const {
    return nlohmann::json{{"r_point", r_point},
                          {"r_format", r_format},
                          {"r_pair", r_pair},
                          {"lambda", lambda},
                          {"r_total", r_total}};
}

RewardBreakdown RewardBreakdown::from_json(const nlohmann::json& j) {
    RewardBreakdown b;
    b.r_point = j.at("r_point").get<double>();
    b.r_format = j.at("r_format").get<double>();
    b.r_pair = j.at("r_pair").get<double>();
    b.lambda = j.at("lambda").get<double>();
    b.r_total = j.at("r_total").get<double>();
    return b;
}

double pointwise_reward(const Trajectory& trajectory, JudgeBackend& judge, const ImageStore& store) {
    if (trajectory.rounds.empty()) return 0.0;
    JudgePointResult result =
        judge_point(judge, store, trajectory.query, trajectory.final_image(), {});
    return result.pass ? kPointPass : 0.0;
}

double format_reward(const Trajectory& trajectory) {
    return (trajectory.parse_failures > 0 || trajectory.tool_error) ? kFormatPenalty : 0.0;
}

double pairwise_reward(const Trajectory& trajectory, JudgeBackend& judge, const ImageStore& store,
                       Rng& rng) {
    const int n = trajectory_round_count(trajectory);
    if (n < 2) return 0.0;
    for (int k = 0; k + 1 < n; ++k) {
        JudgePairResult result = judge_pair(judge, store, trajectory.rounds[static_cast<size_t>(k)].image,
                                            trajectory.rounds[static_cast<size_t>(k) + 1].image, rng);
        if (result.winner != JudgePairResult::Winner::second) return 0.0;
    }
    return kPairBonus;
}

RewardBreakdown combine(double r_point, double r_format, double r_pair) {
    const int point20 = point_twentieths(r_point);
    const int format20 = format_twentieths(r_format);
    const int pair20 = pair_twentieths(r_pair);
    const int lambda_halves = point20 == 14 ? 2 : 1;
    const int total20 = point20 + format20 + pair20 * lambda_halves / 2;
    RewardBreakdown b;
    b.r_point = r_point;
    b.r_format = r_format;
    b.r_pair = r_pair;
    b.lambda = static_cast<double>(lambda_halves) / 2.0;
    b.r_total = static_cast<double>(total20) / 20.0;
    return b;
}

RewardBreakdown compute_reward(const Trajectory& trajectory, JudgeBackend& judge,
                               const ImageStore& store, Rng& rng) {
    double r_point = 0.0;
    try {
        r_point = pointwise_reward(trajectory, judge, store);
    } catch (const BackendUnavailable& e) {
        std::cerr << "[agentloop] pointwise judge unavailable, scoring 0: " << e.what() << "\n";
    }
    const double r_format = format_reward(trajectory);
    double r_pair = 0.0;
    try {
        r_pair = pairwise_reward(trajectory, judge, store, rng);
    } catch (const BackendUnavailable& e) {
        std::cerr << "[agentloop] pairwise judge unavailable, scoring 0: " << e.what() << "\n";
    }
    return combine(r_point, r_format, r_pair);
}

}  // namespace agentloop::reward
