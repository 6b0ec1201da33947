#include "grpo/trainer.hpp"

#include <cstdio>

#include "sim/policies.hpp"

namespace agentloop::rl {

std::string metrics_csv(const std::vector<IterationMetrics>& rows) {
    std::string out = "iteration,mean_reward,mean_rounds,pass_rate,pair_reward_rate\n";
    char buf[160];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f\n", row.iteration, row.mean_reward,
                      row.mean_rounds, row.pass_rate, row.pair_reward_rate);
        out += buf;
    }
    return out;
}

TrainResult train(const TrainerConfig& cfg, TrainEnvironment& env, MetricsSink* sink) {
    cfg.validate();
    TrainResult result{sim::ToyPolicy(env.attribute_count, env.episode.n_max), {}};
    sim::ToyPolicy& policy = result.policy;

    EnvHandles handles{env.generator, env.judge, env.store, env.episode, env.threads};

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        std::vector<double> grad_total(policy.weight_count(), 0.0);
        double reward_sum = 0.0;
        double rounds_sum = 0.0;
        int pass_count = 0;
        int pair_count = 0;
        int episode_count = 0;

        for (int b = 0; b < cfg.batch_size; ++b) {
            const uint64_t query_seed = mix_seed({cfg.seed, fnv1a64("query"),
                                                  static_cast<uint64_t>(iter), static_cast<uint64_t>(b)});
            const Query query = env.sample_query(
                query_seed, "it" + std::to_string(iter) + "q" + std::to_string(b));

            sim::ToyPolicyHandle handle(policy, env.edits_per_round);
            const uint64_t rollout_seed = mix_seed({cfg.seed, fnv1a64("rollout"),
                                                    static_cast<uint64_t>(iter), static_cast<uint64_t>(b)});
            RolloutGroup group = rollout_group(query, handle, handles, cfg, rollout_seed);

            for (size_t k = 0; k < group.rewards.size(); ++k) {
                reward_sum += group.rewards[k].r_total;
                rounds_sum += trajectory_round_count(group.trajectories[k]);
                if (group.rewards[k].r_point == reward::kPointPass) ++pass_count;
                if (group.rewards[k].r_pair == reward::kPairBonus) ++pair_count;
                ++episode_count;
            }

            Rng resample_rng(mix_seed({cfg.seed, fnv1a64("resample"), static_cast<uint64_t>(iter),
                                       static_cast<uint64_t>(b)}));
            RolloutGroup retained = resample_by_rounds(group, cfg.g, resample_rng);
            const std::vector<double> advantages = normalize_advantages(retained.reward_totals());
            LossGrad lg = grpo_loss_and_gradient(retained, advantages, policy, cfg);
            for (size_t w = 0; w < grad_total.size(); ++w) grad_total[w] += lg.gradient[w];
        }

        const double step = cfg.learning_rate / static_cast<double>(cfg.batch_size);
        auto& weights = policy.weights();
        for (size_t w = 0; w < weights.size(); ++w) weights[w] += step * grad_total[w];

        IterationMetrics row;
        row.iteration = iter;
        row.mean_reward = reward_sum / episode_count;
        row.mean_rounds = rounds_sum / episode_count;
        row.pass_rate = static_cast<double>(pass_count) / episode_count;
        row.pair_reward_rate = static_cast<double>(pair_count) / episode_count;
        result.metrics.push_back(row);
        if (sink) sink->append(row);
    }
    return result;
}

}  // namespace agentloop::rl
