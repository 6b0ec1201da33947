#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "util/rng.hpp"

namespace agentloop::sim {

// Linear-softmax policy over the episode action vocabulary:
//   0..K-1    raise emphasis on attribute j
//   K..2K-1   lower emphasis on attribute j
//   2K        terminate
// Features: [bias, one-hot upcoming round (n_max), emphasis / 2, failure
// bits from the previous round's verdict].
class ToyPolicy {
  public:
    ToyPolicy(int attribute_count, int n_max);

    int attribute_count() const { return k_; }
    int n_max() const { return n_max_; }
    int vocab_size() const { return 2 * k_ + 1; }
    int feature_dim() const { return 1 + n_max_ + 2 * k_; }
    int terminate_action() const { return 2 * k_; }
    int raise_action(int j) const { return j; }
    int lower_action(int j) const { return k_ + j; }
    bool is_raise(int action) const { return action < k_; }
    bool is_lower(int action) const { return action >= k_ && action < 2 * k_; }
    int action_attribute(int action) const { return is_raise(action) ? action : action - k_; }

    size_t weight_count() const { return weights_.size(); }
    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }
    double& weight_at(int action, int feature);

    // Log-probabilities over the vocabulary. With terminate_masked the
    // terminate action is excluded from the softmax and gets -inf.
    std::vector<double> action_log_probs(const std::vector<double>& features,
                                         bool terminate_masked) const;

    nlohmann::json to_json() const;
    static ToyPolicy from_json(const nlohmann::json& j);

  private:
    int k_;
    int n_max_;
    std::vector<double> weights_;  // row-major [action][feature]
};

struct PolicyStep {
    int action = 0;
    double logprob = 0.0;
};

PolicyStep policy_step(const ToyPolicy& policy, const std::vector<double>& features, Rng& rng,
                       bool terminate_masked = false);

double action_logprob(const ToyPolicy& policy, const std::vector<double>& features, int action,
                      bool terminate_masked);

// grad += scale * d(log p(action)) / dW
void accumulate_logprob_gradient(const ToyPolicy& policy, const std::vector<double>& features,
                                 int action, bool terminate_masked, double scale,
                                 std::vector<double>& grad);

// next_round is 1-based; failed_bits come from the previous round's verdict
// (all zero when there is no prior round).
std::vector<double> episode_features(int next_round, int n_max, const std::vector<int>& emphasis,
                                     const std::vector<uint8_t>& failed_bits);

}  // namespace agentloop::sim
