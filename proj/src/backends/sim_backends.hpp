#pragma once

#include <mutex>

#include "backends/backend.hpp"
#include "sim/image.hpp"

namespace agentloop {

// Deterministic generator over the synthetic attribute model. Image bytes
// are the canonical SimImage serialization.
class SimulatedGenerator : public GeneratorBackend {
  public:
    SimulatedGenerator(std::string name, sim::SimParams params)
        : name_(std::move(name)), params_(params) {}

    std::string name() const override { return name_; }
    GeneratedImage generate_bytes(const std::string& prompt_text, uint64_t seed) override;

    const sim::SimParams& params() const { return params_; }

  private:
    std::string name_;
    sim::SimParams params_;
};

// Pure function of (query, simulated image state). Pass requires every
// constraint satisfied; deficiencies are the unmet constraint tokens.
class OracleJudge : public JudgeBackend {
  public:
    explicit OracleJudge(std::string name) : name_(std::move(name)) {}

    std::string name() const override { return name_; }
    JudgePointResult judge_point_bytes(const Query& query, const std::string& image_bytes,
                                       const std::vector<std::string>& hints) override;
    PairChoice judge_pair_presented(const std::string& first_bytes,
                                    const std::string& second_bytes) override;

  private:
    std::string name_;
};

// Oracle whose final verdict flips with a fixed probability. Stateful RNG,
// serialized by a mutex.
class NoisyOracleJudge : public JudgeBackend {
  public:
    NoisyOracleJudge(std::string name, double flip_probability, uint64_t seed);

    std::string name() const override { return name_; }
    JudgePointResult judge_point_bytes(const Query& query, const std::string& image_bytes,
                                       const std::vector<std::string>& hints) override;
    PairChoice judge_pair_presented(const std::string& first_bytes,
                                    const std::string& second_bytes) override;

  private:
    std::string name_;
    OracleJudge inner_;
    double flip_probability_;
    std::mutex mutex_;
    Rng rng_;
};

}  // namespace agentloop
