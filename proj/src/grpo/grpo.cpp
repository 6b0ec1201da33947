#include "grpo/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "util/errors.hpp"
#include "util/parallel.hpp"

namespace agentloop::rl {

void TrainerConfig::validate() const {
    if (g < 2) throw ConfigError("G must be >= 2");
    if (g_prime < g) throw ConfigError("G' must be >= G");
    if (!(epsilon_clip > 0.0 && epsilon_clip < 1.0)) throw ConfigError("epsilon_clip must lie in (0, 1)");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (kl_coefficient < 0.0) throw ConfigError("kl_coefficient must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
}

nlohmann::json TrainerConfig::to_json() const {
    return nlohmann::json{{"G_prime", g_prime},
                          {"G", g},
                          {"epsilon_clip", epsilon_clip},
                          {"learning_rate", learning_rate},
                          {"kl_coefficient", kl_coefficient},
                          {"batch_size", batch_size},
                          {"iterations", iterations},
                          {"seed", seed}};
}

TrainerConfig TrainerConfig::from_json(const nlohmann::json& j) {
    TrainerConfig cfg;
    cfg.g_prime = j.value("G_prime", cfg.g_prime);
    cfg.g = j.value("G", cfg.g);
    cfg.epsilon_clip = j.value("epsilon_clip", cfg.epsilon_clip);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.kl_coefficient = j.value("kl_coefficient", cfg.kl_coefficient);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

std::vector<double> RolloutGroup::reward_totals() const {
    std::vector<double> totals;
    totals.reserve(rewards.size());
    for (const auto& r : rewards) totals.push_back(r.r_total);
    return totals;
}

std::vector<int> RolloutGroup::round_counts() const {
    std::vector<int> counts;
    counts.reserve(trajectories.size());
    for (const auto& t : trajectories) counts.push_back(trajectory_round_count(t));
    return counts;
}

RolloutGroup rollout_group(const Query& query, const PolicyHandle& policy, EnvHandles& env,
                           const TrainerConfig& cfg, uint64_t seed) {
    cfg.validate();
    RolloutGroup group;
    group.query = query;
    group.trajectories.resize(static_cast<size_t>(cfg.g_prime));
    group.rewards.resize(static_cast<size_t>(cfg.g_prime));
    parallel_for(static_cast<size_t>(cfg.g_prime), env.threads, [&](size_t k) {
        EpisodeOptions options = env.episode;
        options.seed = mix_seed({seed, fnv1a64("episode"), static_cast<uint64_t>(k)});
        group.trajectories[k] =
            run_episode(query, policy, env.generator, env.judge, env.store, options);
        Rng reward_rng(mix_seed({seed, fnv1a64("reward"), static_cast<uint64_t>(k)}));
        group.rewards[k] =
            reward::compute_reward(group.trajectories[k], env.judge, env.store, reward_rng);
    });
    return group;
}

std::map<int, int> bucket_quotas(const std::vector<int>& round_counts, int g) {
    if (static_cast<int>(round_counts.size()) < g) {
        throw Error("cannot resample more trajectories than the group holds");
    }
    std::map<int, int> sizes;
    for (int n : round_counts) ++sizes[n];

    const int buckets = static_cast<int>(sizes.size());
    const int base = g / buckets;
    int remainder = g % buckets;

    std::map<int, int> quota;
    for (const auto& [n, size] : sizes) {
        int want = base + (remainder > 0 ? 1 : 0);
        if (remainder > 0) --remainder;
        quota[n] = std::min(want, size);
    }
    int shortfall = g;
    for (const auto& [n, q] : quota) shortfall -= q;
    while (shortfall > 0) {
        bool progressed = false;
        for (auto& [n, q] : quota) {
            if (shortfall == 0) break;
            if (q < sizes[n]) {
                ++q;
                --shortfall;
                progressed = true;
            }
        }
        if (!progressed) throw Error("quota redistribution failed");
    }
    return quota;
}

RolloutGroup resample_by_rounds(const RolloutGroup& group, int g, Rng& rng) {
    const std::vector<int> counts = group.round_counts();
    const std::map<int, int> quota = bucket_quotas(counts, g);

    std::map<int, std::vector<size_t>> members;
    for (size_t i = 0; i < counts.size(); ++i) members[counts[i]].push_back(i);

    std::vector<size_t> chosen;
    chosen.reserve(static_cast<size_t>(g));
    for (const auto& [n, indices] : members) {
        const int take = quota.at(n);
        auto picks = rng.sample_without_replacement(indices.size(), static_cast<size_t>(take));
        std::sort(picks.begin(), picks.end());
        for (size_t p : picks) chosen.push_back(indices[p]);
    }

    RolloutGroup out;
    out.query = group.query;
    for (size_t i : chosen) {
        out.trajectories.push_back(group.trajectories[i]);
        out.rewards.push_back(group.rewards[i]);
    }
    return out;
}

std::vector<double> normalize_advantages(const std::vector<double>& rewards) {
    const size_t n = rewards.size();
    if (n < 2) throw DegenerateGroup("advantage normalization needs at least two rewards");
    const auto [min_it, max_it] = std::minmax_element(rewards.begin(), rewards.end());
    if (*min_it == *max_it) return std::vector<double>(n, 0.0);
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(n);
    double variance = 0.0;
    for (double r : rewards) variance += (r - mean) * (r - mean);
    variance /= static_cast<double>(n);
    const double std_dev = std::sqrt(variance);
    std::vector<double> advantages;
    advantages.reserve(n);
    for (double r : rewards) advantages.push_back((r - mean) / std_dev);
    return advantages;
}

double clipped_term(double sigma, double advantage, double epsilon) {
    const double unclipped = sigma * advantage;
    const double clipped = std::clamp(sigma, 1.0 - epsilon, 1.0 + epsilon) * advantage;
    return std::min(unclipped, clipped);
}

LossGrad grpo_loss_and_gradient(const RolloutGroup& group, const std::vector<double>& advantages,
                                const sim::ToyPolicy& policy, const TrainerConfig& cfg) {
    if (group.trajectories.size() != advantages.size()) {
        throw Error("advantage count does not match group size");
    }
    const double eps = cfg.epsilon_clip;
    const double beta = cfg.kl_coefficient;
    const size_t group_size = group.trajectories.size();

    LossGrad out;
    out.gradient.assign(policy.weight_count(), 0.0);

    for (size_t i = 0; i < group_size; ++i) {
        const double advantage = advantages[i];
        if (!std::isfinite(advantage)) throw NonFiniteLoss("non-finite advantage");

        std::vector<const ActionRecord*> records;
        for (const auto& token : group.trajectories[i].token_stream) {
            if (token.source == TokenSource::policy && token.action.has_value()) {
                records.push_back(&*token.action);
            }
        }
        if (records.empty()) continue;  // no differentiable tokens

        const double inv = 1.0 / (static_cast<double>(group_size) * static_cast<double>(records.size()));
        for (const ActionRecord* rec : records) {
            const double new_logp =
                action_logprob(policy, rec->features, rec->action, rec->terminate_masked);
            const double sigma = std::exp(new_logp - rec->logprob);
            if (!std::isfinite(sigma)) throw NonFiniteLoss("non-finite likelihood ratio");

            const double unclipped = sigma * advantage;
            const double clipped = std::clamp(sigma, 1.0 - eps, 1.0 + eps) * advantage;
            double dterm_dsigma;
            if (unclipped <= clipped) {
                out.loss += inv * unclipped;
                dterm_dsigma = advantage;
            } else {
                out.loss += inv * clipped;
                dterm_dsigma = (sigma > 1.0 - eps && sigma < 1.0 + eps) ? advantage : 0.0;
            }
            double logp_coef = inv * dterm_dsigma * sigma;

            if (beta > 0.0) {
                const double d = rec->logprob - new_logp;  // reference minus current
                const double k3 = std::exp(d) - d - 1.0;
                out.loss -= inv * beta * k3;
                logp_coef += inv * beta * (std::exp(d) - 1.0);
            }
            if (logp_coef != 0.0) {
                accumulate_logprob_gradient(policy, rec->features, rec->action,
                                            rec->terminate_masked, logp_coef, out.gradient);
            }
        }
    }
    if (!std::isfinite(out.loss)) throw NonFiniteLoss("non-finite loss");
    return out;
}

}  // namespace agentloop::rl
