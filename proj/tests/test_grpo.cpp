#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "grpo/grpo.hpp"
#include "helpers.hpp"
#include "sim/policies.hpp"
#include "util/errors.hpp"

using namespace agentloop;
using namespace testutil;

namespace {

// Independent simulation of the quota rule: near-equal pre-cap targets with
// the remainder on ascending buckets, then the shortfall handed out with a
// cyclic ascending pointer that skips exhausted buckets.
std::map<int, int> quota_rule_oracle(const std::vector<int>& round_counts, int g) {
    std::vector<std::pair<int, int>> buckets;  // (round count, size), ascending
    {
        std::map<int, int> sizes;
        for (int n : round_counts) ++sizes[n];
        buckets.assign(sizes.begin(), sizes.end());
    }
    const int b = static_cast<int>(buckets.size());
    std::vector<int> target(static_cast<size_t>(b), g / b);
    for (int i = 0; i < g % b; ++i) ++target[static_cast<size_t>(i)];
    const auto [tmin, tmax] = std::minmax_element(target.begin(), target.end());
    REQUIRE(*tmax - *tmin <= 1);  // pre-cap targets differ by at most one

    std::vector<int> quota(static_cast<size_t>(b));
    int total = 0;
    for (int i = 0; i < b; ++i) {
        quota[static_cast<size_t>(i)] =
            std::min(target[static_cast<size_t>(i)], buckets[static_cast<size_t>(i)].second);
        total += quota[static_cast<size_t>(i)];
    }
    int cursor = 0;
    for (int shortfall = g - total; shortfall > 0; cursor = (cursor + 1) % b) {
        if (quota[static_cast<size_t>(cursor)] < buckets[static_cast<size_t>(cursor)].second) {
            ++quota[static_cast<size_t>(cursor)];
            --shortfall;
        }
    }
    std::map<int, int> out;
    for (int i = 0; i < b; ++i) out[buckets[static_cast<size_t>(i)].first] = quota[static_cast<size_t>(i)];
    return out;
}

// Group with prescribed round counts; each trajectory is tagged through its
// query id copy so membership can be traced after resampling.
rl::RolloutGroup group_with_round_counts(ImageStore& store, const std::vector<int>& counts,
                                         uint64_t seed) {
    Query q = fixed_query(3);
    rl::RolloutGroup group;
    group.query = q;
    for (size_t i = 0; i < counts.size(); ++i) {
        std::vector<int> per_round(static_cast<size_t>(counts[i]), 1);
        Trajectory t = trajectory_with_counts(store, q, per_round,
                                              mix_seed({seed, static_cast<uint64_t>(i)}), true);
        t.query.id = "member" + std::to_string(i);
        group.trajectories.push_back(std::move(t));
        group.rewards.push_back(reward::combine(0.0, 0.0, 0.0));
    }
    return group;
}

struct SyntheticGroup {
    sim::ToyPolicy old_policy;
    rl::RolloutGroup group;
    std::vector<double> advantages;
};

// Random trajectories of recorded action tokens with old-policy
// log-probabilities, interleaved with environment tokens.
SyntheticGroup synthetic_group(uint64_t seed, int trajectories = 8) {
    Rng rng(seed);
    SyntheticGroup out{sim::ToyPolicy(3, 3), {}, {}};
    for (auto& w : out.old_policy.weights()) w = rng.uniform01() - 0.5;

    out.group.query = fixed_query(3);
    std::vector<double> rewards;
    for (int i = 0; i < trajectories; ++i) {
        Trajectory t;
        t.query = out.group.query;
        t.n_max = 3;
        t.n = 1;
        t.terminated = true;
        const int tokens = 2 + static_cast<int>(rng.below(6));
        for (int k = 0; k < tokens; ++k) {
            ActionRecord record;
            record.terminate_masked = rng.bernoulli(0.5);
            const int limit =
                record.terminate_masked ? out.old_policy.vocab_size() - 1 : out.old_policy.vocab_size();
            record.action = static_cast<int>(rng.below(static_cast<uint64_t>(limit)));
            for (int f = 0; f < out.old_policy.feature_dim(); ++f) {
                record.features.push_back(rng.uniform01() * 2 - 1);
            }
            record.logprob = action_logprob(out.old_policy, record.features, record.action,
                                            record.terminate_masked);
            t.token_stream.push_back(Token{"a" + std::to_string(k), TokenSource::policy, record});
            if (rng.bernoulli(0.4)) {
                t.token_stream.push_back(
                    Token{"[env " + std::to_string(k) + "]", TokenSource::environment, std::nullopt});
            }
        }
        out.group.trajectories.push_back(std::move(t));
        out.group.rewards.push_back(reward::combine(0.0, 0.0, 0.0));
        rewards.push_back(rng.uniform01());
    }
    out.advantages = rl::normalize_advantages(rewards);
    return out;
}

}  // namespace

TEST_CASE("trainer config bounds") {
    rl::TrainerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.g_prime == 12);
    CHECK(cfg.g == 8);
    CHECK(cfg.kl_coefficient == 0.0);

    rl::TrainerConfig bad = cfg;
    bad.g_prime = 4;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.epsilon_clip = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.g = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("advantage normalization examples") {
    CHECK(rl::normalize_advantages({1.0, 1.0, 1.0, 1.0}) ==
          std::vector<double>{0.0, 0.0, 0.0, 0.0});

    auto ab = rl::normalize_advantages({1.0, 0.0});
    CHECK(ab[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ab[1] == doctest::Approx(-1.0).epsilon(1e-12));

    CHECK_THROWS_AS(rl::normalize_advantages({1.0}), DegenerateGroup);
}

TEST_CASE("advantage normalization properties over random groups") {
    Rng rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 2 + rng.below(14);
        std::vector<double> rewards;
        for (size_t i = 0; i < n; ++i) rewards.push_back(rng.uniform01() * 2 - 0.5);
        auto adv = rl::normalize_advantages(rewards);
        double mean = 0;
        for (double a : adv) mean += a;
        mean /= static_cast<double>(n);
        double var = 0;
        for (double a : adv) var += (a - mean) * (a - mean);
        var /= static_cast<double>(n);
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);

        // permutation equivariance
        std::vector<double> reversed(rewards.rbegin(), rewards.rend());
        auto adv_rev = rl::normalize_advantages(reversed);
        for (size_t i = 0; i < n; ++i) {
            CHECK(adv_rev[i] == doctest::Approx(adv[n - 1 - i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("bucket quotas match the spec examples") {
    std::vector<int> counts;
    auto add = [&](int n, int times) {
        for (int i = 0; i < times; ++i) counts.push_back(n);
    };
    add(1, 4);
    add(2, 5);
    add(3, 3);
    auto quota = rl::bucket_quotas(counts, 8);
    CHECK(quota[1] == 3);
    CHECK(quota[2] == 3);
    CHECK(quota[3] == 2);

    counts.clear();
    add(1, 1);
    add(2, 1);
    add(3, 10);
    quota = rl::bucket_quotas(counts, 8);
    CHECK(quota[1] == 1);
    CHECK(quota[2] == 1);
    CHECK(quota[3] == 6);

    counts.assign(12, 1);  // single bucket
    quota = rl::bucket_quotas(counts, 8);
    CHECK(quota[1] == 8);
}

TEST_CASE("quotas agree with the rule oracle over every multiset, G' <= 12") {
    // Enumerate all round-count multisets over {1,2,3} with 8..12 members.
    for (int total = 8; total <= 12; ++total) {
        for (int ones = 0; ones <= total; ++ones) {
            for (int twos = 0; twos + ones <= total; ++twos) {
                const int threes = total - ones - twos;
                std::vector<int> counts;
                counts.insert(counts.end(), static_cast<size_t>(ones), 1);
                counts.insert(counts.end(), static_cast<size_t>(twos), 2);
                counts.insert(counts.end(), static_cast<size_t>(threes), 3);
                auto expected = quota_rule_oracle(counts, 8);
                auto actual = rl::bucket_quotas(counts, 8);
                CHECK(actual == expected);
                int assigned = 0;
                for (const auto& [n, q] : actual) {
                    (void)n;
                    assigned += q;
                }
                CHECK(assigned == 8);
            }
        }
    }
}

TEST_CASE("resampling returns exactly G members of the input group") {
    ImageStore store;
    rl::RolloutGroup group = group_with_round_counts(store, {1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3}, 9);
    Rng rng(77);
    rl::RolloutGroup retained = rl::resample_by_rounds(group, 8, rng);
    REQUIRE(retained.trajectories.size() == 8);
    std::map<int, int> bucket_counts;
    for (const auto& t : retained.trajectories) {
        ++bucket_counts[trajectory_round_count(t)];
        bool member = false;
        for (const auto& original : group.trajectories) {
            if (original.query.id == t.query.id) member = true;
        }
        CHECK(member);
    }
    CHECK(bucket_counts[1] == 3);
    CHECK(bucket_counts[2] == 3);
    CHECK(bucket_counts[3] == 2);
}

TEST_CASE("degenerate G' == G resampling keeps every trajectory") {
    ImageStore store;
    rl::RolloutGroup group = group_with_round_counts(store, {1, 2}, 10);
    Rng rng(3);
    rl::RolloutGroup retained = rl::resample_by_rounds(group, 2, rng);
    REQUIRE(retained.trajectories.size() == 2);
    std::set<std::string> ids;
    for (const auto& t : retained.trajectories) ids.insert(t.query.id);
    CHECK(ids == std::set<std::string>{"member0", "member1"});
}

TEST_CASE("within-bucket selection is uniform") {
    ImageStore store;
    rl::RolloutGroup group = group_with_round_counts(store, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, 11);
    std::map<std::string, int> picked;
    const int trials = 6000;
    for (int i = 0; i < trials; ++i) {
        Rng rng(mix_seed({808ull, static_cast<uint64_t>(i)}));
        for (const auto& t : rl::resample_by_rounds(group, 8, rng).trajectories) {
            ++picked[t.query.id];
        }
    }
    // Each of the 12 members should appear in ~8/12 of trials.
    const double expected = trials * 8.0 / 12.0;
    for (const auto& [id, count] : picked) {
        (void)id;
        CHECK(std::abs(count - expected) < 0.05 * trials);
    }
    CHECK(picked.size() == 12);
}

TEST_CASE("clipped term lies between its branches and respects the bound") {
    Rng rng(2001);
    const double eps = 0.2;
    for (int trial = 0; trial < 5000; ++trial) {
        const double sigma = std::exp(rng.uniform01() * 4 - 2);
        const double advantage = rng.uniform01() * 4 - 2;
        const double term = rl::clipped_term(sigma, advantage, eps);
        const double u1 = sigma * advantage;
        const double u2 = std::clamp(sigma, 1 - eps, 1 + eps) * advantage;
        CHECK(term <= std::max(u1, u2) + 1e-15);
        CHECK(term >= std::min(u1, u2) - 1e-15);
        // The clip caps the favorable side; the unfavorable side stays open.
        if (advantage > 0) CHECK(term <= (1 + eps) * advantage + 1e-15);
        if (advantage < 0) CHECK(term <= (1 - eps) * advantage + 1e-15);
    }
}

TEST_CASE("ratio-one identity: loss is the mean advantage, gradient is plain policy gradient") {
    SyntheticGroup s = synthetic_group(31337);
    rl::TrainerConfig cfg;
    auto lg = rl::grpo_loss_and_gradient(s.group, s.advantages, s.old_policy, cfg);

    double mean_adv = 0;
    for (double a : s.advantages) mean_adv += a;
    mean_adv /= static_cast<double>(s.advantages.size());
    CHECK(lg.loss == doctest::Approx(mean_adv).epsilon(1e-12));

    // Independent REINFORCE estimator with its own softmax arithmetic.
    std::vector<double> expected(s.old_policy.weight_count(), 0.0);
    const int fdim = s.old_policy.feature_dim();
    const size_t g = s.group.trajectories.size();
    for (size_t i = 0; i < g; ++i) {
        std::vector<const ActionRecord*> records;
        for (const auto& token : s.group.trajectories[i].token_stream) {
            if (token.action) records.push_back(&*token.action);
        }
        const double scale = s.advantages[i] / (static_cast<double>(g) * records.size());
        for (const auto* rec : records) {
            const int limit = rec->terminate_masked ? s.old_policy.vocab_size() - 1
                                                    : s.old_policy.vocab_size();
            std::vector<double> exps(static_cast<size_t>(limit));
            double z = 0;
            for (int a = 0; a < limit; ++a) {
                double logit = 0;
                for (int f = 0; f < fdim; ++f) {
                    logit += s.old_policy.weights()[static_cast<size_t>(a * fdim + f)] *
                             rec->features[static_cast<size_t>(f)];
                }
                exps[static_cast<size_t>(a)] = std::exp(logit);
                z += exps[static_cast<size_t>(a)];
            }
            for (int a = 0; a < limit; ++a) {
                const double p = exps[static_cast<size_t>(a)] / z;
                const double coef = scale * ((a == rec->action ? 1.0 : 0.0) - p);
                for (int f = 0; f < fdim; ++f) {
                    expected[static_cast<size_t>(a * fdim + f)] +=
                        coef * rec->features[static_cast<size_t>(f)];
                }
            }
        }
    }
    for (size_t w = 0; w < expected.size(); ++w) {
        CHECK(lg.gradient[w] == doctest::Approx(expected[w]).epsilon(1e-9));
    }
}

TEST_CASE("environment token content never touches loss or gradient") {
    SyntheticGroup s = synthetic_group(515);
    rl::TrainerConfig cfg;
    auto before = rl::grpo_loss_and_gradient(s.group, s.advantages, s.old_policy, cfg);

    rl::RolloutGroup mutated = s.group;
    int mutations = 0;
    for (auto& t : mutated.trajectories) {
        for (auto& token : t.token_stream) {
            if (token.source == TokenSource::environment) {
                token.text = "CORRUPTED " + std::to_string(mutations++);
            }
        }
    }
    REQUIRE(mutations > 0);
    auto after = rl::grpo_loss_and_gradient(mutated, s.advantages, s.old_policy, cfg);
    CHECK(after.loss == before.loss);
    CHECK(after.gradient == before.gradient);
}

TEST_CASE("clipped tokens have zero gradient") {
    // One token, advantage +1, ratio far above 1+eps: term is clipped and
    // constant, so the gradient must vanish.
    sim::ToyPolicy old_policy(2, 2);
    sim::ToyPolicy current = old_policy;
    ActionRecord record;
    record.action = 0;
    record.terminate_masked = false;
    record.features.assign(static_cast<size_t>(old_policy.feature_dim()), 0.0);
    record.features[0] = 1.0;
    record.logprob = action_logprob(old_policy, record.features, 0, false) - 2.0;  // sigma = e^2

    rl::RolloutGroup group;
    group.query = fixed_query(2);
    Trajectory t;
    t.query = group.query;
    t.n_max = 2;
    t.n = 1;
    t.terminated = true;
    t.token_stream.push_back(Token{"a", TokenSource::policy, record});
    group.trajectories.push_back(t);
    group.trajectories.push_back(t);  // two members so advantages are defined
    group.rewards.resize(2, reward::combine(0.0, 0.0, 0.0));

    rl::TrainerConfig cfg;
    auto lg = rl::grpo_loss_and_gradient(group, {1.0, 1.0}, current, cfg);
    CHECK(lg.loss == doctest::Approx(1.2).epsilon(1e-12));  // both tokens clip at 1+eps
    for (double gw : lg.gradient) CHECK(gw == 0.0);
}

TEST_CASE("analytic gradient matches central finite differences, with and without KL") {
    Rng rng(616);
    const double h = 1e-5;
    for (double kl : {0.0, 0.3}) {
        rl::TrainerConfig cfg;
        cfg.kl_coefficient = kl;
        double max_rel = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            SyntheticGroup s = synthetic_group(mix_seed({909ull, static_cast<uint64_t>(trial),
                                                         static_cast<uint64_t>(kl * 10)}));
            sim::ToyPolicy current = s.old_policy;
            for (auto& w : current.weights()) w += (rng.uniform01() - 0.5) * 0.02;

            auto lg = rl::grpo_loss_and_gradient(s.group, s.advantages, current, cfg);
            for (size_t w = 0; w < current.weight_count(); ++w) {
                const double saved = current.weights()[w];
                current.weights()[w] = saved + h;
                const double up =
                    rl::grpo_loss_and_gradient(s.group, s.advantages, current, cfg).loss;
                current.weights()[w] = saved - h;
                const double down =
                    rl::grpo_loss_and_gradient(s.group, s.advantages, current, cfg).loss;
                current.weights()[w] = saved;
                const double fd = (up - down) / (2 * h);
                const double denom = std::max({1e-3, std::abs(fd), std::abs(lg.gradient[w])});
                max_rel = std::max(max_rel, std::abs(fd - lg.gradient[w]) / denom);
            }
        }
        CHECK(max_rel < 1e-5);
    }
}

TEST_CASE("non-finite advantages are rejected") {
    SyntheticGroup s = synthetic_group(717);
    std::vector<double> advantages = s.advantages;
    advantages[0] = std::numeric_limits<double>::infinity();
    rl::TrainerConfig cfg;
    CHECK_THROWS_AS(rl::grpo_loss_and_gradient(s.group, advantages, s.old_policy, cfg),
                    NonFiniteLoss);
}

TEST_CASE("rollout groups are bit-identical for identical seeds") {
    SimulatedGenerator generator("sim", {});
    OracleJudge judge("oracle");
    ImageStore store;
    rl::EnvHandles env{generator, judge, store, EpisodeOptions{3, 0, 1}, 2};
    sim::ToyPolicy policy(3, 3);
    sim::ToyPolicyHandle handle(policy, 3);
    Query q = fixed_query(3);
    rl::TrainerConfig cfg;

    rl::RolloutGroup a = rl::rollout_group(q, handle, env, cfg, 444);
    rl::RolloutGroup b = rl::rollout_group(q, handle, env, cfg, 444);
    REQUIRE(a.trajectories.size() == static_cast<size_t>(cfg.g_prime));
    for (size_t i = 0; i < a.trajectories.size(); ++i) {
        CHECK(a.trajectories[i].to_json() == b.trajectories[i].to_json());
        CHECK(a.rewards[i].r_total == b.rewards[i].r_total);
    }
}
