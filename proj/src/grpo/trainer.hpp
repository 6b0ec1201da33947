#pragma once

#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "grpo/grpo.hpp"

namespace agentloop::rl {

struct IterationMetrics {
    int iteration = 0;
    double mean_reward = 0.0;
    double mean_rounds = 0.0;
    double pass_rate = 0.0;
    double pair_reward_rate = 0.0;
};

class MetricsSink {
  public:
    virtual ~MetricsSink() = default;
    virtual void append(const IterationMetrics& row) = 0;
};

class VectorMetricsSink : public MetricsSink {
  public:
    void append(const IterationMetrics& row) override {
        std::lock_guard<std::mutex> lock(mutex_);
        rows_.push_back(row);
    }
    const std::vector<IterationMetrics>& rows() const { return rows_; }

  private:
    std::mutex mutex_;
    std::vector<IterationMetrics> rows_;
};

std::string metrics_csv(const std::vector<IterationMetrics>& rows);

struct TrainEnvironment {
    GeneratorBackend& generator;
    JudgeBackend& judge;
    ImageStore& store;
    EpisodeOptions episode;                       // per-episode seed is overwritten
    int edits_per_round = 1;
    int attribute_count = 3;
    int threads = 1;
    std::function<Query(uint64_t, const std::string&)> sample_query;
};

struct TrainResult {
    sim::ToyPolicy policy;
    std::vector<IterationMetrics> metrics;
};

// One policy update per iteration: rollout G' per query, resample to G,
// group-normalized advantages, gradient ascent on the clipped surrogate.
// Fully deterministic given cfg.seed.
TrainResult train(const TrainerConfig& cfg, TrainEnvironment& env, MetricsSink* sink);

}  // namespace agentloop::rl
