#include "sim/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sim/image.hpp"
#include "util/errors.hpp"

namespace agentloop::sim {

ToyPolicy::ToyPolicy(int attribute_count, int n_max) : k_(attribute_count), n_max_(n_max) {
    if (k_ < 1) throw Error("policy needs at least one attribute");
    if (n_max_ < 1) throw Error("policy needs n_max >= 1");
    weights_.assign(static_cast<size_t>(vocab_size()) * static_cast<size_t>(feature_dim()), 0.0);
}

double& ToyPolicy::weight_at(int action, int feature) {
    return weights_[static_cast<size_t>(action) * static_cast<size_t>(feature_dim()) +
                    static_cast<size_t>(feature)];
}

std::vector<double> ToyPolicy::action_log_probs(const std::vector<double>& features,
                                                bool terminate_masked) const {
    if (static_cast<int>(features.size()) != feature_dim()) {
        throw Error("feature vector has wrong dimension");
    }
    const int vocab = vocab_size();
    const int fdim = feature_dim();
    std::vector<double> logits(static_cast<size_t>(vocab));
    for (int a = 0; a < vocab; ++a) {
        double z = 0.0;
        const double* row = weights_.data() + static_cast<size_t>(a) * static_cast<size_t>(fdim);
        for (int f = 0; f < fdim; ++f) z += row[f] * features[static_cast<size_t>(f)];
        if (!std::isfinite(z)) throw Error("non-finite policy logit");
        logits[static_cast<size_t>(a)] = z;
    }
    const int limit = terminate_masked ? vocab - 1 : vocab;
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < limit; ++a) max_logit = std::max(max_logit, logits[static_cast<size_t>(a)]);
    double sum = 0.0;
    for (int a = 0; a < limit; ++a) sum += std::exp(logits[static_cast<size_t>(a)] - max_logit);
    const double lse = max_logit + std::log(sum);
    std::vector<double> logp(static_cast<size_t>(vocab),
                             -std::numeric_limits<double>::infinity());
    for (int a = 0; a < limit; ++a) logp[static_cast<size_t>(a)] = logits[static_cast<size_t>(a)] - lse;
    return logp;
}

nlohmann::json ToyPolicy::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    const int fdim = feature_dim();
    for (int a = 0; a < vocab_size(); ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (int f = 0; f < fdim; ++f) {
            row.push_back(weights_[static_cast<size_t>(a) * static_cast<size_t>(fdim) +
                                   static_cast<size_t>(f)]);
        }
        rows.push_back(std::move(row));
    }
    return nlohmann::json{{"attribute_count", k_}, {"n_max", n_max_}, {"weights", rows}};
}

ToyPolicy ToyPolicy::from_json(const nlohmann::json& j) {
    ToyPolicy policy(j.at("attribute_count").get<int>(), j.at("n_max").get<int>());
    const auto& rows = j.at("weights");
    if (static_cast<int>(rows.size()) != policy.vocab_size()) {
        throw Error("checkpoint weight rows do not match vocabulary");
    }
    const int fdim = policy.feature_dim();
    for (int a = 0; a < policy.vocab_size(); ++a) {
        const auto& row = rows[static_cast<size_t>(a)];
        if (static_cast<int>(row.size()) != fdim) {
            throw Error("checkpoint weight row has wrong dimension");
        }
        for (int f = 0; f < fdim; ++f) {
            policy.weight_at(a, f) = row[static_cast<size_t>(f)].get<double>();
        }
    }
    return policy;
}

PolicyStep policy_step(const ToyPolicy& policy, const std::vector<double>& features, Rng& rng,
                       bool terminate_masked) {
    const auto logp = policy.action_log_probs(features, terminate_masked);
    const int limit = terminate_masked ? policy.vocab_size() - 1 : policy.vocab_size();
    const double u = rng.uniform01();
    double cum = 0.0;
    int chosen = limit - 1;
    for (int a = 0; a < limit; ++a) {
        cum += std::exp(logp[static_cast<size_t>(a)]);
        if (u < cum) {
            chosen = a;
            break;
        }
    }
    return {chosen, logp[static_cast<size_t>(chosen)]};
}

double action_logprob(const ToyPolicy& policy, const std::vector<double>& features, int action,
                      bool terminate_masked) {
    if (terminate_masked && action == policy.terminate_action()) {
        throw Error("terminate action queried under mask");
    }
    return policy.action_log_probs(features, terminate_masked)[static_cast<size_t>(action)];
}

void accumulate_logprob_gradient(const ToyPolicy& policy, const std::vector<double>& features,
                                 int action, bool terminate_masked, double scale,
                                 std::vector<double>& grad) {
    const auto logp = policy.action_log_probs(features, terminate_masked);
    const int limit = terminate_masked ? policy.vocab_size() - 1 : policy.vocab_size();
    const int fdim = policy.feature_dim();
    if (grad.size() != policy.weight_count()) throw Error("gradient buffer has wrong size");
    for (int a = 0; a < limit; ++a) {
        const double p = std::exp(logp[static_cast<size_t>(a)]);
        const double coef = scale * ((a == action ? 1.0 : 0.0) - p);
        if (coef == 0.0) continue;
        double* row = grad.data() + static_cast<size_t>(a) * static_cast<size_t>(fdim);
        for (int f = 0; f < fdim; ++f) row[f] += coef * features[static_cast<size_t>(f)];
    }
}

std::vector<double> episode_features(int next_round, int n_max, const std::vector<int>& emphasis,
                                     const std::vector<uint8_t>& failed_bits) {
    if (next_round < 1 || next_round > n_max) throw Error("round index out of range");
    if (emphasis.size() != failed_bits.size()) throw Error("feature length mismatch");
    std::vector<double> features;
    features.reserve(1 + static_cast<size_t>(n_max) + 2 * emphasis.size());
    features.push_back(1.0);
    for (int r = 1; r <= n_max; ++r) features.push_back(r == next_round ? 1.0 : 0.0);
    for (int e : emphasis) features.push_back(static_cast<double>(e) / kMaxEmphasis);
    for (uint8_t b : failed_bits) features.push_back(b ? 1.0 : 0.0);
    return features;
}

}  // namespace agentloop::sim
